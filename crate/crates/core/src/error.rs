use thiserror::Error;

/// Errors produced by the gesture pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("framing error: {0}")]
    Framing(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("config/recording mismatch: {0}")]
    Mismatch(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("bad recording: {0}")]
    Recording(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
