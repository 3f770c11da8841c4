//! Provenance stamped into every output artifact: tool version, a hash of the
//! effective configuration, and hashes of every input file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use goreg_core::error::Result;

use crate::config::PipelineConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_hash: String,
    pub inputs: Vec<InputHash>,
    pub config: PipelineConfig,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Provenance {
    pub fn new(config: &PipelineConfig, inputs: &[&Path]) -> Result<Self> {
        let config_text = toml::to_string(config)
            .map_err(|e| goreg_core::Error::Config(format!("config serialization: {e}")))?;
        let config_hash = hex(&Sha256::digest(config_text.as_bytes()));
        let mut hashed = Vec::with_capacity(inputs.len());
        for p in inputs {
            hashed.push(InputHash {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            });
        }
        Ok(Provenance {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
            inputs: hashed,
            config: config.clone(),
        })
    }
}
