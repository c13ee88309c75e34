//! Command-line front end.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::arch_graph::{build_graph, ArchGraph, Sample};
use crate::config::{load_config, RunConfig};
use crate::error::{Error, Result};
use crate::evaluator::{calibrate_sigma, checkpoint_consistency, Evaluator};
use crate::gcn::{self, write_loss_csv, GcnModel};
use crate::metrics::kendall_tau;
use crate::report::{fixed6, to_json, write_predictions_csv};
use crate::search::{run_round, run_search_with, RoundOutcome, RoundReport, SearchConfig};
use crate::search_space::{Architecture, Subspace};
use crate::seeds::derive_seed;

#[derive(Debug, Parser)]
#[command(name = "gcnas", version, about = "GCN-assisted architecture search on a synthetic supernet")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every round of the segment plan.
    Search(RunArgs),
    /// Run the first round only and save its model.
    Round(RunArgs),
    /// Score every node of the first-round graph with a saved model.
    Predict {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        model: PathBuf,
    },
    /// Kendall tau between two CSV columns, given as FILE:COLUMN (1-based).
    Tau {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Find the noise level whose two-checkpoint tau matches a target.
    CalibrateSigma {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0.547)]
        target: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0.005)]
        tolerance: f64,
    },
    /// Rank agreement of sampled architectures between two checkpoints.
    Consistency {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Search, then select the best architecture within a multiply-add budget.
    Constraint {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        budget: u64,
    },
}

/// Every emitted report carries the config hash and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub report: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub samples: usize,
    #[serde(with = "fixed6")]
    pub sigma: f64,
    #[serde(with = "fixed6")]
    pub tau: f64,
    #[serde(with = "fixed6")]
    pub tau_same_checkpoint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaFragment {
    #[serde(with = "fixed6")]
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub simulator: SigmaFragment,
}

struct Run {
    config: RunConfig,
    hash: String,
}

impl Run {
    fn load(args: &RunArgs) -> Result<Self> {
        let mut config = match &args.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = args.seed {
            config.seed = seed;
        }
        if let Some(dir) = &args.output_dir {
            config.output_dir = dir.clone();
        }
        let hash = config.hash()?;
        fs::create_dir_all(&config.output_dir).map_err(|source| Error::File {
            path: config.output_dir.clone(),
            source,
        })?;
        Ok(Self { config, hash })
    }

    fn envelope<T>(&self, command: &str, report: T) -> Envelope<T> {
        Envelope {
            command: command.into(),
            config_sha256: self.hash.clone(),
            seed: self.config.seed,
            report,
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|source| Error::File { path: path.clone(), source })?;
        Ok(path)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|source| Error::File { path, source })
    }

    fn first_subspace(&self, search: &SearchConfig) -> Result<Subspace> {
        let spec = self.config.spec()?;
        let base = search.initial.clone().unwrap_or_else(|| spec.default_initial());
        let plan = crate::search_space::make_segment_plan(&spec, &search.plan)?;
        Subspace::around(&spec, &base, &plan.segments()[0], Vec::new())
    }

    fn write_round(&self, outcome: &RoundOutcome, dump_predictions: bool) -> Result<()> {
        let t = outcome.report.round;
        self.write(
            &format!("round_{t}.json"),
            &to_json(&self.envelope("round", &outcome.report))?,
        )?;
        let mut w = self.create(&format!("loss_round_{t}.csv"))?;
        write_loss_csv(&mut w, &outcome.losses)?;
        w.flush()?;
        if dump_predictions {
            self.write_predictions(&format!("predictions_round_{t}.csv"), &outcome.graph, &outcome.predictions)?;
        }
        Ok(())
    }

    fn write_predictions(&self, name: &str, graph: &ArchGraph, predictions: &[f64]) -> Result<PathBuf> {
        let sub = graph.subspace();
        let rows = predictions
            .iter()
            .enumerate()
            .map(|(i, &p)| Ok((sub.materialize(&sub.assignment_of(i)?)?, p)))
            .collect::<Result<Vec<(Architecture, f64)>>>()?;
        let mut w = self.create(name)?;
        write_predictions_csv(&mut w, rows)?;
        w.flush()?;
        Ok(self.path(name))
    }
}

fn search(run: &Run, command: &str, budget: Option<u64>) -> Result<()> {
    let spec = run.config.spec()?;
    let mut search = run.config.search_config()?;
    if budget.is_some() {
        search.constraint_budget = budget;
    }
    let costs = run.config.cost_model(&spec)?;
    let mut sim = run.config.supernet()?;
    let dump = run.config.search.dump_predictions;
    let result = run_search_with(&spec, &mut sim, &search, Some(&costs), |o| run.write_round(o, dump))?;
    let path = run.write("result.json", &to_json(&run.envelope(command, &result))?)?;
    println!("architecture {}", result.architecture);
    println!("accuracy {:.6}", result.accuracy);
    if let Some(f) = result.flops {
        println!("flops {f}");
    }
    println!("report {}", path.display());
    Ok(())
}

fn round(run: &Run) -> Result<()> {
    let search = run.config.search_config()?;
    let sub = run.first_subspace(&search)?;
    let sim = run.config.supernet()?;
    let outcome = run_round(&sub, &sim, &search, 0).map_err(|e| e.in_round(0))?;
    run.write_round(&outcome, true)?;
    let model_path = run.path("model.bin");
    outcome.model.save(&model_path)?;
    let r: &RoundReport = &outcome.report;
    println!("best_selected {} {:.6}", r.best_selected.architecture, r.best_selected.accuracy);
    if let Some(t) = r.tau_val {
        println!("tau_val {t:.6}");
    }
    println!("model {}", model_path.display());
    Ok(())
}

fn predict(run: &Run, model_path: &Path) -> Result<()> {
    let search = run.config.search_config()?;
    let sub = run.first_subspace(&search)?;
    let model = GcnModel::load(model_path)?;
    let samples: Option<Vec<Sample>> = if search.similarity == Default::default() {
        None
    } else {
        // Same draw as the first round, so the measured weights match.
        let sim = run.config.supernet()?;
        let m = search.m_samples.min(sub.node_count() as usize);
        let nodes = sub.sample_nodes(m, derive_seed(search.seed, "sample", 0))?;
        Some(
            nodes
                .into_iter()
                .map(|i| {
                    let assignment = sub.assignment_of(i)?;
                    let acc = sim.evaluate(&sub.materialize(&assignment)?);
                    Ok((assignment, acc))
                })
                .collect::<Result<_>>()?,
        )
    };
    let mut graph = build_graph(&sub, &search.similarity, samples.as_deref(), search.node_cap)?;
    graph.normalize();
    let predictions = gcn::predict(&graph, &model)?;
    let path = run.write_predictions("predictions.csv", &graph, &predictions)?;
    println!("predictions {}", path.display());
    Ok(())
}

fn sample_full_space(run: &Run, samples: usize) -> Result<Vec<Architecture>> {
    let spec = run.config.spec()?;
    let full = Subspace::full(&spec)?;
    full.sample_uniform(samples, derive_seed(run.config.seed, "consistency", 0))?
        .iter()
        .map(|a| full.materialize(a))
        .collect()
}

fn calibrate(run: &Run, target: f64, samples: usize, tolerance: f64) -> Result<()> {
    let archs = sample_full_space(run, samples)?;
    let sim = run.config.supernet()?;
    let sigma = calibrate_sigma(&sim, &archs, target, tolerance)?;
    let text = to_json(&CalibrationReport {
        simulator: SigmaFragment { sigma },
    })?;
    run.write("sigma.json", &text)?;
    print!("{text}");
    Ok(())
}

fn consistency(run: &Run, samples: usize) -> Result<()> {
    let archs = sample_full_space(run, samples)?;
    let sim = run.config.supernet()?;
    let tau = checkpoint_consistency(&sim, &archs)?;
    let now: Vec<f64> = archs.iter().map(|a| sim.evaluate(a)).collect();
    let again: Vec<f64> = archs.iter().map(|a| sim.evaluate(a)).collect();
    let report = ConsistencyReport {
        samples,
        sigma: sim.sigma(),
        tau,
        tau_same_checkpoint: kendall_tau(&now, &again)?,
    };
    run.write("consistency.json", &to_json(&run.envelope("consistency", report))?)?;
    println!("{tau:.6}");
    Ok(())
}

/// Values of a 1-based column; a non-numeric first row is taken as a header.
pub fn read_column(spec: &str) -> Result<Vec<f64>> {
    let (file, col) = spec
        .rsplit_once(':')
        .ok_or_else(|| Error::Parse(format!("expected FILE:COLUMN, got {spec:?}")))?;
    let col: usize = col
        .parse()
        .ok()
        .filter(|&c| c >= 1)
        .ok_or_else(|| Error::Parse(format!("column must be a positive integer in {spec:?}")))?;
    let file_err = |source| Error::File { path: PathBuf::from(file), source };
    let reader = File::open(file).map_err(file_err)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let field = record
            .get(col - 1)
            .ok_or_else(|| Error::Parse(format!("{file}: row {} has no column {col}", line + 1)))?;
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if line == 0 => {}
            Err(_) => return Err(Error::Parse(format!("{file}: row {}: {field:?} is not a number", line + 1))),
        }
    }
    Ok(values)
}

fn tau(a: &str, b: &str) -> Result<()> {
    let t = kendall_tau(&read_column(a)?, &read_column(b)?)?;
    println!("{t:.6}");
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Search(args) => search(&Run::load(&args)?, "search", None),
        Command::Constraint { run, budget } => search(&Run::load(&run)?, "constraint", Some(budget)),
        Command::Round(args) => round(&Run::load(&args)?),
        Command::Predict { run, model } => predict(&Run::load(&run)?, &model),
        Command::Tau { a, b } => tau(&a, &b),
        Command::CalibrateSigma {
            run,
            target,
            samples,
            tolerance,
        } => calibrate(&Run::load(&run)?, target, samples, tolerance),
        Command::Consistency { run, samples } => consistency(&Run::load(&run)?, samples),
    }
}

/// Parses `argv` (program name first) and runs the command. Returns the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
