use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid distribution: {0}")]
    Distribution(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("resource cap exceeded: {0}")]
    Resource(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
