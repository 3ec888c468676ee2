use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}: file contains no usable records")]
    Empty(PathBuf),

    #[error("no token of {sentence:?} is in the vocabulary")]
    AllTokensUnknown { sentence: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("zero-norm vector at {side} row {row}")]
    DegenerateVector { side: &'static str, row: usize },

    #[error("series is constant; correlation undefined")]
    ConstantSeries,

    #[error("need at least {needed} values, got {actual}")]
    TooFewValues { needed: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by invalid user input rather than data or I/O.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
