use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("inner time {tau} is not an integer multiple of the step {dtau}")]
    NotMultipleOfStep { tau: f64, dtau: f64 },

    #[error("index ({i}, {j}, {k}) out of range for a {n}x{n}x{kk} stack")]
    IndexOutOfRange {
        i: usize,
        j: usize,
        k: usize,
        n: usize,
        kk: usize,
    },

    #[error("zero pivot in tridiagonal solve at row {row}")]
    SingularSystem { row: usize },

    #[error("least-squares fit is ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
