use modq_core::spans::Coverage;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Examples per micro-batch (pairs for the selector).
    pub batch_size: usize,
    pub grad_accum_steps: usize,
    pub ema_decay: f64,
    pub seed: u64,
    pub max_sequence_length: usize,
    /// Longest decoded answer, in tokens.
    pub max_answer_tokens: usize,
    /// How a decoded span is attributed to a rule.
    pub coverage: Coverage,
    /// Loss weight of positive pairs for the selector.
    pub positive_weight: f64,
    /// Words seen fewer times than this go to hash buckets.
    pub min_word_freq: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-5,
            weight_decay: 0.001,
            epochs: 5,
            batch_size: 8,
            grad_accum_steps: 4,
            ema_decay: 0.999,
            seed: 0,
            max_sequence_length: 512,
            max_answer_tokens: 64,
            coverage: Coverage::Rule,
            positive_weight: 1.0,
            min_word_freq: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.weight_decay >= 0.0
            && self.epochs >= 1
            && self.batch_size >= 1
            && self.grad_accum_steps >= 1
            && (0.0..1.0).contains(&self.ema_decay)
            && self.max_sequence_length >= 8
            && self.max_answer_tokens >= 1
            && self.positive_weight > 0.0
            && self.min_word_freq >= 1;
        if ok {
            Ok(())
        } else {
            Err(ModelError::Config(format!("invalid training configuration: {self:?}")))
        }
    }
}
