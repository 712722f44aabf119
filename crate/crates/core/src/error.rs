use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the restoration pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: String, actual: String },

    #[error("invalid image: {0}")]
    Image(String),

    #[error("invalid mask: {0}")]
    Mask(String),

    #[error("backbone: {0}")]
    Backbone(String),

    #[error("network: {0}")]
    Network(String),

    #[error("loss: {0}")]
    Loss(String),

    #[error("non-finite loss at iteration {iteration}: {detail}")]
    NonFinite { iteration: usize, detail: String },

    #[error("checkpoint version mismatch: file has {found}, expected {expected}")]
    Version { found: u32, expected: u32 },

    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),

    #[error("{0}")]
    Metric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Decode { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the numerical run itself rather than by the
    /// caller's inputs.
    pub fn is_runtime(&self) -> bool {
        matches!(self, Error::NonFinite { .. })
    }
}
