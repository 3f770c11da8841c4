use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape error: {0}")]
    Shape(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("data integrity error: {0}")]
    DataIntegrity(String),

    #[error("subject {subject_id} rejected: {reason}")]
    SubjectRejected { subject_id: String, reason: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}
