//! Rule-sensitive moderation framed as question answering over a
//! community's rule list.
//!
//! This crate holds everything that does not need a neural network: record
//! types, rule extraction and matching, dataset construction and splits,
//! the per-community baselines and the evaluation harness.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod evalkit;
pub mod predictor;
pub mod registry;
pub mod rulekit;
pub mod spans;
pub mod synth;
pub mod text;
pub mod types;

pub use error::{Error, Result};
pub use predictor::{argmax_rule, candidates, prediction_from_scores, LoaderRegistry, PredictorLoader, RulePredictor};
pub use registry::Registry;
pub use types::*;
