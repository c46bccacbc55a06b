//! `manifest.json` under the output directory: per command, the effective
//! config, its fingerprint and a SHA-256 of every artifact written.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wltscan::Error;

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub commands: BTreeMap<String, CommandEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CommandEntry {
    pub seed: u64,
    pub config_fingerprint: String,
    pub config: BTreeMap<String, String>,
    /// Artifact path relative to the output directory, to its SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

/// Collects artifacts for one command run.
pub struct Artifacts {
    out: PathBuf,
    files: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(out: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        Ok(Artifacts { out: out.to_path_buf(), files: Vec::new() })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let p = self.path(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        self.files.push(p.clone());
        Ok(p)
    }

    /// Records a file written by other means.
    pub fn record(&mut self, path: PathBuf) {
        self.files.push(path);
    }

    /// Updates this command's manifest entry.
    pub fn finish(self, command: &str, config: &RunConfig) -> Result<(), CliError> {
        let path = self.out.join(MANIFEST);
        let mut manifest: Manifest = match fs::read(&path) {
            Ok(b) => serde_json::from_slice(&b).map_err(Error::from)?,
            Err(_) => Manifest::default(),
        };
        manifest.version = env!("CARGO_PKG_VERSION").to_string();
        let mut artifacts = BTreeMap::new();
        for f in &self.files {
            let bytes = fs::read(f).map_err(|e| Error::io(f, e))?;
            let rel = f.strip_prefix(&self.out).unwrap_or(f);
            artifacts.insert(rel.to_string_lossy().replace('\\', "/"), hex::encode(Sha256::digest(&bytes)));
        }
        manifest.commands.insert(
            command.to_string(),
            CommandEntry {
                seed: config.seed()?,
                config_fingerprint: config.fingerprint(),
                config: config.entries().clone(),
                artifacts,
            },
        );
        let mut json = serde_json::to_vec_pretty(&manifest).map_err(Error::from)?;
        json.push(b'\n');
        fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }
}
