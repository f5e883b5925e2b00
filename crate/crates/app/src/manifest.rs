//! `manifest.json`: what a run consumed and produced, without timestamps,
//! so identical inputs give an identical manifest.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, AppConfig};
use crate::error::{AppError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: AppConfig,
    /// File name to SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| AppError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

/// Digests of a file, or of every file below a directory keyed by
/// relative path.
fn digests(path: &Path, into: &mut BTreeMap<String, String>) -> Result<()> {
    if path.is_dir() {
        let mut entries: Vec<_> = std::fs::read_dir(path)
            .map_err(|e| AppError::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        for p in entries {
            if p.file_name().is_some_and(|n| n == "manifest.json") {
                continue;
            }
            let mut inner = BTreeMap::new();
            digests(&p, &mut inner)?;
            let prefix = p.file_name().unwrap_or_default().to_string_lossy().to_string();
            for (k, v) in inner {
                let key = if p.is_dir() { format!("{prefix}/{k}") } else { k };
                into.insert(key, v);
            }
        }
    } else {
        let name = path.file_name().unwrap_or_default().to_string_lossy().to_string();
        into.insert(name, sha256_file(path)?);
    }
    Ok(())
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: &AppConfig) -> Self {
        Manifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_hash: config.hash(),
            config: config.clone(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        digests(path, &mut self.inputs)?;
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> Result<&mut Self> {
        digests(path, &mut self.outputs)?;
        Ok(self)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| AppError::io(path, e))
    }
}
