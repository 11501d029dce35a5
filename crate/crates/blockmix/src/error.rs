use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("partition mismatch: {0}")]
    PartitionMismatch(String),

    #[error("family mismatch: {0}")]
    FamilyMismatch(String),

    #[error("invalid statistics: {0}")]
    InvalidStats(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
