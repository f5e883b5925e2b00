//! Checkpoint directories: `weights.safetensors`, `tokenizer.json`,
//! `config.json` and `metrics.jsonl`.

use std::path::Path;
use std::sync::Arc;

use candle_core::Device;
use modq_core::{LoaderRegistry, ModelKind, PredictorLoader, RulePredictor};
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{ModelError, Result};
use crate::extract::ExtractPredictor;
use crate::nn::{EncoderConfig, Weights};
use crate::select::{NetScorer, SelectPredictor};
use crate::tokenizer::Tokenizer;
use crate::train::EpochMetrics;

pub const FORMAT_VERSION: u32 = 1;
pub const WEIGHTS_FILE: &str = "weights.safetensors";
pub const TOKENIZER_FILE: &str = "tokenizer.json";
pub const CONFIG_FILE: &str = "config.json";
pub const METRICS_FILE: &str = "metrics.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointConfig {
    pub format_version: u32,
    pub model_kind: ModelKind,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub best_epoch: usize,
}

pub struct Checkpoint {
    pub config: CheckpointConfig,
    pub weights: Weights,
    pub tokenizer: Tokenizer,
}

pub fn save_checkpoint(
    dir: &Path,
    config: &CheckpointConfig,
    weights: &Weights,
    tokenizer: &Tokenizer,
    metrics: &[EpochMetrics],
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let map: std::collections::HashMap<&str, candle_core::Tensor> =
        weights.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    candle_core::safetensors::save(&map, dir.join(WEIGHTS_FILE))?;
    tokenizer.save(&dir.join(TOKENIZER_FILE))?;
    std::fs::write(dir.join(CONFIG_FILE), serde_json::to_vec_pretty(config)?)?;
    let mut lines = String::new();
    for m in metrics {
        lines.push_str(&serde_json::to_string(m)?);
        lines.push('\n');
    }
    std::fs::write(dir.join(METRICS_FILE), lines)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let config: CheckpointConfig = serde_json::from_slice(&std::fs::read(dir.join(CONFIG_FILE))?)?;
    if config.format_version != FORMAT_VERSION {
        return Err(ModelError::Config(format!(
            "checkpoint format version {} (expected {FORMAT_VERSION})",
            config.format_version
        )));
    }
    let weights: Weights = candle_core::safetensors::load(dir.join(WEIGHTS_FILE), &Device::Cpu)?.into_iter().collect();
    let tokenizer = Tokenizer::load(&dir.join(TOKENIZER_FILE))?;
    Ok(Checkpoint { config, weights, tokenizer })
}

pub fn read_metrics(dir: &Path) -> Result<Vec<EpochMetrics>> {
    Ok(modq_core::dataset::read_jsonl(&dir.join(METRICS_FILE))?)
}

/// Builds the predictor recorded in the checkpoint config.
pub fn predictor_from(ck: Checkpoint) -> Result<Arc<dyn RulePredictor>> {
    let Checkpoint { config, weights, tokenizer } = ck;
    Ok(match config.model_kind {
        ModelKind::Extract => Arc::new(ExtractPredictor::new(&config.encoder, &weights, tokenizer, &config.train)?),
        ModelKind::Select => Arc::new(SelectPredictor::new(Box::new(NetScorer::new(
            &config.encoder,
            &weights,
            tokenizer,
            &config.train,
        )?))),
        ModelKind::Baseline => return Err(ModelError::Config("baseline banks are not checkpoint directories".into())),
    })
}

pub struct CheckpointLoader {
    pub kind: ModelKind,
}

impl PredictorLoader for CheckpointLoader {
    fn load(&self, path: &Path) -> modq_core::Result<Arc<dyn RulePredictor>> {
        let ck = load_checkpoint(path)?;
        if ck.config.model_kind != self.kind {
            return Err(modq_core::Error::invalid(format!(
                "{} holds a {} checkpoint, expected {}",
                path.display(),
                ck.config.model_kind,
                self.kind
            )));
        }
        Ok(predictor_from(ck)?)
    }
}

/// Loaders for every model kind, keyed `extract`, `select`, `baseline`.
pub fn loader_registry() -> LoaderRegistry {
    let mut reg = LoaderRegistry::new("model kind");
    reg.register("extract", Arc::new(CheckpointLoader { kind: ModelKind::Extract }));
    reg.register("select", Arc::new(CheckpointLoader { kind: ModelKind::Select }));
    reg.register("baseline", Arc::new(modq_core::baselines::BankLoader));
    reg
}
