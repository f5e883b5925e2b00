use thiserror::Error;

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("tensor error: {0}")]
    Candle(#[from] candle_core::Error),

    #[error(transparent)]
    Core(#[from] modq_core::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint is missing weight `{0}`")]
    MissingWeight(String),

    #[error("non-finite loss at epoch {epoch}, step {step} (batch starting with `{first_id}`)")]
    NonFinite { epoch: usize, step: usize, first_id: String },

    #[error("no trainable examples: {0}")]
    NoExamples(String),
}

impl From<ModelError> for modq_core::Error {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Core(inner) => inner,
            ModelError::Io(inner) => modq_core::Error::Io(inner),
            other => modq_core::Error::Other(other.to_string()),
        }
    }
}
