//! Transformer predictors: span extraction over the rule context and
//! pairwise rule selection, with training and checkpoint I/O.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod extract;
pub mod nn;
pub mod select;
pub mod tokenizer;
pub mod train;

pub use checkpoint::{load_checkpoint, loader_registry, predictor_from, save_checkpoint, Checkpoint, CheckpointConfig};
pub use config::TrainConfig;
pub use error::{ModelError, Result};
pub use extract::{train_extract, ExtractPredictor, SpanPrediction, TrainedExtract};
pub use nn::EncoderConfig;
pub use select::{train_select, PairScorer, SelectPredictor, TrainedSelect};
pub use train::{select_best, EpochMetrics};
