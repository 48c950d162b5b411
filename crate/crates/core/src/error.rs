use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum NbvError {
    #[error("{path}: line {line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("sampling failure: acceptance rate {acceptance_rate:.3e} after {draws} draws")]
    SamplingFailure { acceptance_rate: f64, draws: usize },

    #[error("rank-deficient design matrix (condition number {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("setup error: {0}")]
    Setup(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl NbvError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        NbvError::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        NbvError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = NbvError> = std::result::Result<T, E>;
