use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure category, used by the CLI to pick a stable exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments or parameters supplied by the caller.
    Usage,
    /// Missing, malformed or inconsistent input data.
    Data,
    /// A numerical routine could not produce a result.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("class {class} has no training rows")]
    EmptyClass { class: usize },

    #[error("non-finite embedding value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric: |S[{row},{col}] - S[{col},{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("covariance is not positive definite (pivot {pivot} = {value:e}); increase the ridge")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("eigen solver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("empty {side} score set")]
    EmptyScores { side: &'static str },

    #[error("class {class} would keep {rows} rows after subsampling; at least 2 are required")]
    ClassTooSmall { class: usize, rows: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("malformed file at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("{path}: {source}")]
    File { path: String, source: io::Error },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format { offset, message: message.into() }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    pub(crate) fn data(message: impl Into<String>) -> Self {
        Error::InvalidData(message.into())
    }

    pub(crate) fn file(path: &std::path::Path, source: io::Error) -> Self {
        Error::File { path: path.display().to_string(), source }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) => ErrorKind::Usage,
            Error::NotSymmetric { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::NoConvergence { .. } => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}
