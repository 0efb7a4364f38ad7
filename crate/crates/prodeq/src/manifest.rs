//! Run manifests: every successful command writes one, capturing the fully
//! resolved configuration, input digests, seed, and output list. Feeding a
//! manifest back to the same subcommand reproduces seeded outputs
//! bit-identically.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Fully resolved configuration as flat key=value pairs; the same keys
    /// the config-file format uses.
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<FileDigest>,
    pub seed: Option<u64>,
    pub duration_seconds: f64,
    /// Data files written by the run, relative to the output directory.
    pub outputs: Vec<String>,
    /// Subcommand-specific result summary (conserved totals, acceptance
    /// rate, fit quality, ...).
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        Self {
            tool: "prodeq".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            config: BTreeMap::new(),
            inputs: Vec::new(),
            seed: None,
            duration_seconds: 0.0,
            outputs: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        let mut body = serde_json::to_string_pretty(self)?;
        body.push('\n');
        fs::write(path, body)
    }

    pub fn read_from(path: &Path) -> std::io::Result<Self> {
        let body = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&body)?)
    }
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut file = fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex_string(&hasher.finalize()))
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
