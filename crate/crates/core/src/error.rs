use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("no discordant pairs to learn from")]
    NoPairs,

    #[error("{pairs} training pairs exceed the kernel matrix budget of {budget}")]
    MatrixBudget { pairs: usize, budget: usize },

    #[error("model file line {line}: {reason}")]
    ModelFormat { line: usize, reason: String },
}

impl Error {
    pub(crate) fn parse(line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            line,
            reason: reason.into(),
        }
    }

    pub(crate) fn model(line: usize, reason: impl Into<String>) -> Self {
        Error::ModelFormat {
            line,
            reason: reason.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by the input data rather than by I/O.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
