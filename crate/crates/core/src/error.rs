use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("need at least {needed} rows, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("class {label} has {available} members, need at least {needed}")]
    InsufficientClass { label: u8, needed: usize, available: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no positive labels; precision-recall is undefined")]
    NoPositives,

    #[error("a batch is already pending")]
    BatchPending,

    #[error("no batch is pending")]
    NoPendingBatch,

    #[error("unlabeled pool is exhausted")]
    PoolExhausted,

    #[error("answers do not match the pending batch: {0}")]
    AnswerMismatch(String),

    #[error("invalid label {0}; expected 0 or 1")]
    InvalidLabel(i64),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
