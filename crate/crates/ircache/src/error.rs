use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("encoding contains a non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("encoding must have at least one value")]
    EmptyEncoding,

    #[error("content id must be non-empty")]
    EmptyContentId,

    #[error("cache capacity of {capacity} exceeded")]
    CapacityFull { capacity: usize },

    #[error("store is empty")]
    EmptyStore,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("cloud unreachable: {0}")]
    CloudUnreachable(String),

    #[error("request timed out")]
    Timeout,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
