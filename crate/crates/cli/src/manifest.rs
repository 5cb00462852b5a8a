//! Run manifests: every file-producing run writes one JSON manifest with
//! the resolved parameter set, the canonical scenario, the seed, and a
//! SHA-256 digest of each output. Replaying a manifest re-executes the run
//! from the embedded configuration and must reproduce every output
//! byte-for-byte.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vlcra_core::util::sha256_hex;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub command: String,
    /// Fully resolved parameters, stringified; file references are inlined
    /// so a manifest is self-contained.
    pub args: BTreeMap<String, String>,
    /// Canonical serialization of the resolved scenario.
    pub scenario_toml: String,
    pub seed: Option<u64>,
    pub outputs: Vec<OutputDigest>,
}

impl RunManifest {
    pub fn new(
        command: &str,
        args: BTreeMap<String, String>,
        scenario_toml: String,
        seed: Option<u64>,
    ) -> Self {
        RunManifest {
            artifact_version: ARTIFACT_VERSION.to_string(),
            command: command.to_string(),
            args,
            scenario_toml,
            seed,
            outputs: Vec::new(),
        }
    }

    pub fn record_output(&mut self, path: &str, content: &str) {
        self.outputs.push(OutputDigest {
            path: path.to_string(),
            sha256: sha256_hex(content.as_bytes()),
        });
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }

    pub fn from_path(path: &Path) -> std::io::Result<RunManifest> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}
