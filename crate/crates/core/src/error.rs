use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid costs: {0}")]
    InvalidCosts(String),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid budget: k = {k} for a pool of {pool} members")]
    InvalidBudget { k: usize, pool: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("stream is empty")]
    EmptyStream,
    #[error("invalid Beta fit: {0}")]
    InvalidFit(String),
    #[error("slot {slot}: {source}")]
    Slot {
        slot: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn in_slot(self, slot: usize) -> Self {
        Error::Slot {
            slot,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
