use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid search space: {0}")]
    InvalidSpec(String),

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("length mismatch: {left} != {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("cannot sample {requested} distinct architectures from a subspace of {available} nodes")]
    SampleTooLarge { requested: usize, available: usize },

    #[error("assignment has {got} entries but the subspace has {expected} searchable positions")]
    MissingAssignment { expected: usize, got: usize },

    #[error("choice {choice} at searchable position {position} is out of range (limit {limit})")]
    ChoiceOutOfRange {
        position: usize,
        choice: usize,
        limit: usize,
    },

    #[error("segment sizes sum to {sum}, but the search space has {layers} layers")]
    PlanSizeMismatch { sum: usize, layers: usize },

    #[error("index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("subspace has {nodes} nodes, above the graph cap of {cap}")]
    NodeCapExceeded { nodes: u128, cap: usize },

    #[error("measured similarity requires evaluated samples")]
    MissingSamples,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training requires at least one labeled node")]
    EmptyLabels,

    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("need at least 2 paired values, got {len}")]
    InsufficientLength { len: usize },

    #[error("non-finite value at index {index}")]
    NonFiniteValue { index: usize },

    #[error("statistic undefined: {0}")]
    ZeroVariance(&'static str),

    #[error("no architecture within budget {budget}; cheapest achievable cost is {min_cost}")]
    NoFeasibleArchitecture { budget: u64, min_cost: u64 },

    #[error("candidate list is empty")]
    EmptyCandidates,

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn in_round(self, round: usize) -> Self {
        Error::Round {
            round,
            source: Box::new(self),
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
