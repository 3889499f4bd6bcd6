//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Shape disagreement between tensor operands.
    #[error("{op}: dimension mismatch, left {left:?} vs right {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    /// An operation was called with arguments that violate its contract.
    #[error("{op}: {msg}")]
    Precondition { op: &'static str, msg: String },

    /// Logarithm of a non-positive value.
    #[error("ln: non-positive input {value}")]
    LogDomain { value: f64 },

    /// Token id outside the vocabulary.
    #[error("token id {id} out of range for vocabulary of size {size}")]
    UnknownId { id: usize, size: usize },

    /// Word not present in the vocabulary.
    #[error("unknown token {token:?}")]
    UnknownToken { token: String },

    /// Malformed corpus or vocabulary file.
    #[error("{path}:{line}: {msg}")]
    Ingestion {
        path: String,
        line: usize,
        msg: String,
    },

    /// Bad run configuration.
    #[error("config: {0}")]
    Config(String),

    /// Non-finite value encountered during optimization; training aborts.
    #[error("numeric abort: {what} in {param}")]
    Numeric { what: &'static str, param: String },

    /// Malformed or incompatible checkpoint.
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 ingestion, 4 numeric abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric { .. } => 4,
            Error::Ingestion { .. } | Error::Io(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
