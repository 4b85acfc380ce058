use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid transition kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid reward process: {0}")]
    InvalidMrp(String),

    #[error("chain is not irreducible and aperiodic")]
    NotErgodic,

    #[error("singular linear system while computing {0}")]
    Singular(&'static str),

    #[error("invalid feature matrix: {0}")]
    InvalidFeatures(String),

    #[error("feature matrix is rank deficient after {attempts} draws")]
    RankDeficient { attempts: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("smallest eigenvalue of the feature covariance is not positive ({0})")]
    NonPositiveOmega(f64),

    #[error("delay {delay} for agent {agent} at step {step} exceeds tau_max = {tau_max}")]
    BufferMiss {
        agent: usize,
        step: usize,
        delay: usize,
        tau_max: usize,
    },

    #[error("invalid delay model: {0}")]
    InvalidDelay(String),

    #[error("full theta trajectory was not recorded for this run")]
    TrajectoryNotRecorded,

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("mixing coefficient did not fall below {epsilon} within {cap} steps")]
    MixingCapExceeded { epsilon: f64, cap: usize },

    #[error("theorem hypotheses violated: {0}")]
    HypothesisViolated(String),

    #[error("horizon T = {got} is too small; the step-size rule requires T >= {required}")]
    HorizonTooSmall { got: u64, required: u64 },

    #[error("recursion is not a contraction: p + q = {0} >= 1")]
    ContractionViolated(f64),

    #[error("tail window has {got} points, at least {required} required")]
    WindowTooShort { got: usize, required: usize },

    #[error("insufficient grid: {0}")]
    InsufficientGrid(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
