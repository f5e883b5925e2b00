//! Locating and loading predictors by path.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use modq_core::{ModelKind, RulePredictor};
use modq_models::checkpoint::{CheckpointConfig, CONFIG_FILE};

use crate::error::{AppError, Result};

/// File name of a baseline bank inside a model directory.
pub const BANK_FILE: &str = "bank.json";

/// Kind and load path of the model at `path`: a checkpoint directory
/// records its kind in its config; a bank is a JSON file, or a directory
/// holding [`BANK_FILE`].
pub fn resolve(path: &Path) -> Result<(ModelKind, PathBuf)> {
    if path.is_dir() {
        let cfg_path = path.join(CONFIG_FILE);
        if cfg_path.is_file() {
            let bytes = std::fs::read(&cfg_path).map_err(|e| AppError::io(&cfg_path, e))?;
            let cfg: CheckpointConfig = serde_json::from_slice(&bytes)?;
            return Ok((cfg.model_kind, path.to_path_buf()));
        }
        if path.join(BANK_FILE).is_file() {
            return Ok((ModelKind::Baseline, path.join(BANK_FILE)));
        }
    } else if path.is_file() {
        return Ok((ModelKind::Baseline, path.to_path_buf()));
    }
    Err(AppError::Usage(format!("no model at {}", path.display())))
}

pub fn load_model(path: &Path) -> Result<(ModelKind, Arc<dyn RulePredictor>)> {
    let (kind, at) = resolve(path)?;
    let loader = modq_models::loader_registry().get(&kind.to_string())?;
    Ok((kind, loader.load(&at)?))
}

#[derive(Clone)]
pub struct ServedModel {
    pub kind: ModelKind,
    pub path: PathBuf,
    pub predictor: Arc<dyn RulePredictor>,
}

/// Every model directly under `dir`, keyed by directory name, or by file
/// stem for bare `*.json` banks.
pub fn scan_model_dir(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| AppError::io(dir, e))?;
    for entry in entries {
        let p = entry.map_err(|e| AppError::io(dir, e))?.path();
        let name = p.file_name().unwrap_or_default().to_string_lossy().to_string();
        if p.is_dir() && (p.join(CONFIG_FILE).is_file() || p.join(BANK_FILE).is_file()) {
            out.insert(name, p);
        } else if p.is_file() && name.ends_with(".json") && name != "manifest.json" {
            out.insert(name.trim_end_matches(".json").to_string(), p);
        }
    }
    Ok(out)
}

pub fn load_all(paths: &BTreeMap<String, PathBuf>) -> Result<BTreeMap<String, ServedModel>> {
    paths
        .iter()
        .map(|(id, path)| {
            let (kind, predictor) = load_model(path)?;
            log::info!("loaded {kind} model `{id}` from {}", path.display());
            Ok((id.clone(), ServedModel { kind, path: path.clone(), predictor }))
        })
        .collect()
}
