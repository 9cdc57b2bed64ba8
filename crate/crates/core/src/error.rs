use std::io;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid compressor table: {0}")]
    InvalidTable(String),
    #[error("unknown multiplier config `{0}`")]
    UnknownConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid dataset: {0}")]
    Dataset(String),
    #[error("invalid weight file: {0}")]
    Weights(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
