use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error("config {path}: {message}")]
    Config { path: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] modq_core::Error),
    #[error(transparent)]
    Model(#[from] modq_models::ModelError),
    #[error(transparent)]
    Ingest(#[from] modq_ingest::IngestError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AppError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        AppError::Io { path: path.display().to_string(), source }
    }
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;
