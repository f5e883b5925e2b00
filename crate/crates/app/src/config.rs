//! Run configuration: built-in defaults, overlaid by an optional TOML file,
//! overlaid by command-line flags.

use std::path::{Path, PathBuf};

use modq_core::dataset::{AugmentPlan, SplitSpec};
use modq_core::rulekit::DEFAULT_MATCH_THRESHOLD;
use modq_core::synth::SynthConfig;
use modq_ingest::{ClientConfig, HarvestConfig};
use modq_models::{EncoderConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// `list` (offline) or `remote`.
    pub extractor: String,
    pub encoder: String,
    pub categorizer: String,
    /// Replaces the built-in keyword table (`category<TAB>pattern`).
    pub keyword_table: Option<PathBuf>,
    pub match_threshold: f64,
    pub remote: RemoteExtractorConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            extractor: "list".into(),
            encoder: "lexicon".into(),
            categorizer: "keyword".into(),
            keyword_table: None,
            match_threshold: DEFAULT_MATCH_THRESHOLD,
            remote: RemoteExtractorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteExtractorConfig {
    pub url: String,
    pub model: String,
    pub api_key_env: String,
}

impl Default for RemoteExtractorConfig {
    fn default() -> Self {
        RemoteExtractorConfig {
            url: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub addr: String,
    /// Forward passes running at once.
    pub max_concurrent: usize,
    /// Requests allowed to wait for a slot before the service answers busy.
    pub queue_depth: usize,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig { addr: "127.0.0.1:8080".into(), max_concurrent: 2, queue_depth: 64 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub harvest: HarvestConfig,
    pub client: ClientConfig,
    pub dataset: DatasetConfig,
    pub split: SplitSpec,
    pub train: TrainConfig,
    pub encoder: EncoderConfig,
    pub augment: AugmentPlan,
    pub synth: SynthConfig,
    pub serve: ServeConfig,
}

impl AppConfig {
    /// Defaults, or the TOML file at `path` laid over them.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(AppConfig::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_toml(&text).map_err(|message| AppError::Config { path: path.display().to_string(), message })
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(json))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
