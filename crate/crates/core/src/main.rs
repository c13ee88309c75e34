fn main() {
    std::process::exit(gcnas::cli::run_command(std::env::args_os()));
}
