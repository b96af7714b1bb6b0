//! Run directory writer and manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: String,
    pub code_version: String,
    pub seed: u64,
    pub started: String,
    pub finished: String,
    pub warnings: Vec<String>,
    /// Echo of the effective configuration, as TOML.
    pub config: String,
    /// Keyed by path relative to the run directory.
    pub artifacts: BTreeMap<String, ArtifactRecord>,
}

impl RunManifest {
    /// Equal up to the timestamps.
    pub fn same_content(&self, other: &RunManifest) -> bool {
        self.kind == other.kind
            && self.code_version == other.code_version
            && self.seed == other.seed
            && self.warnings == other.warnings
            && self.config == other.config
            && self.artifacts == other.artifacts
    }

    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Manifest(e.to_string()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// The only writer of a run directory. Every file goes through
/// [`RunWriter::write`] so the manifest sees it.
#[derive(Debug)]
pub struct RunWriter {
    dir: PathBuf,
    artifacts: BTreeMap<String, ArtifactRecord>,
}

impl RunWriter {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.artifacts.insert(
            name.to_string(),
            ArtifactRecord {
                bytes: bytes.len() as u64,
                sha256: sha256_hex(bytes),
            },
        );
        Ok(path)
    }

    pub fn finish(self, mut manifest: RunManifest) -> Result<RunManifest, CliError> {
        manifest.artifacts = self.artifacts;
        let text = toml::to_string(&manifest).map_err(|e| CliError::Manifest(e.to_string()))?;
        let path = self.dir.join(MANIFEST_NAME);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}
