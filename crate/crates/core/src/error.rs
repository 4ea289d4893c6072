use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("quantile distribution must have at least one value")]
    EmptyDistribution,

    #[error("quantile value at index {index} is not finite")]
    NonFiniteValue { index: usize },

    #[error("quantile values must be non-decreasing (index {index})")]
    Unsorted { index: usize },

    #[error("fraction {0} outside [0, 1]")]
    FractionOutOfRange(f64),

    #[error("invalid risk interval [{alpha}, {beta}]: need 0 <= alpha < beta <= 1")]
    InvalidInterval { alpha: f64, beta: f64 },

    #[error("quantile counts differ: {left} vs {right}")]
    QuantileCountMismatch { left: usize, right: usize },

    #[error("Wasserstein order must be >= 1, got {0}")]
    InvalidOrder(u32),

    #[error("Huber threshold kappa must be positive, got {0}")]
    InvalidKappa(f64),

    #[error("target sample set is empty")]
    EmptyTargets,

    #[error("sample count must be at least 1")]
    ZeroSamples,

    #[error("no legal actions to choose from")]
    NoLegalActions,

    #[error("action {action} out of range (only {n_actions} actions)")]
    InvalidAction { action: usize, n_actions: usize },

    #[error("epsilon {0} outside [0, 1]")]
    InvalidEpsilon(f64),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid learner config: {0}")]
    InvalidLearnerConfig(String),

    #[error("joint action space of {size} exceeds enumeration cap {cap}")]
    JointSpaceTooLarge { size: u128, cap: u128 },

    #[error("invalid environment setup: {0}")]
    InvalidEnv(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed checkpoint at line {line}: {reason}")]
    Checkpoint { line: usize, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
