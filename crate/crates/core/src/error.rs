use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("regularizer delta must be positive and finite, got {0}")]
    InvalidDelta(f64),

    #[error("rbf bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),

    #[error("need at least {min} {what}, got {got}")]
    TooSmall {
        what: &'static str,
        min: usize,
        got: usize,
    },

    #[error("invalid probabilities: {0}")]
    InvalidProbability(String),

    #[error("no connected graph after {attempts} attempts; parameters too sparse")]
    RetryBudgetExhausted { attempts: usize },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("conflicting weights for edge ({i}, {j}): {first} vs {second}")]
    ConflictingWeight {
        i: usize,
        j: usize,
        first: f64,
        second: f64,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("node {0} is not in the unlabeled set")]
    NotUnlabeled(usize),

    #[error("node {0} out of range for graph with {1} nodes")]
    NodeOutOfRange(usize, usize),

    #[error("observed value must be -1 or +1, got {0}")]
    InvalidObservation(f64),

    #[error("degenerate pivot g_kk = {value:e} at node {node}")]
    DegeneratePivot { node: usize, value: f64 },

    #[error("class {class} out of range for {num_classes} classes")]
    InvalidClass { class: usize, num_classes: usize },

    #[error("at least one node must be labeled")]
    NoLabels,

    #[error("unlabeled set is empty")]
    EmptyUnlabeled,

    #[error("confidence weight must lie in [0, 1], got {0}")]
    InvalidConfidence(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("label missing for node {0}")]
    MissingLabel(usize),

    #[error("no results to emit")]
    EmptyResults,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
