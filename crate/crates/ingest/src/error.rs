use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("invalid host name {0:?}")]
    InvalidHost(String),
    #[error("request to {url} failed after {attempts} attempt(s): {message}")]
    Fetch { url: String, attempts: u32, message: String },
    #[error("malformed response from {url}: {message}")]
    Malformed { url: String, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] modq_core::Error),
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;
