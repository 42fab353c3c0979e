use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch { expected: usize, actual: usize, context: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("degenerate dissimilarities: {0}")]
    Degenerate(String),

    #[error("solver did not converge after {iterations} iterations (KKT violation {violation:e})")]
    NoConvergence { iterations: usize, violation: f64 },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("model bundle: {0}")]
    Bundle(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(expected: usize, actual: usize, context: impl Into<String>) -> Self {
        Error::DimensionMismatch { expected, actual, context: context.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by unreadable or malformed input files.
    pub fn is_io_or_parse(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Parse { .. } | Error::Csv(_) | Error::Json(_) | Error::Bundle(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
