use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("training data contains a single class ({0})")]
    SingleClass(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{0} used before fitting")]
    NotFitted(&'static str),

    #[error("solver did not converge after {iterations} iterations (violation {violation:.3e})")]
    NotConverged { iterations: usize, violation: f64 },

    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),

    #[error("invalid hyperparameter: {0}")]
    Hyperparameter(String),

    #[error("config: {0}")]
    Config(String),

    #[error("unsupported model file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
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
