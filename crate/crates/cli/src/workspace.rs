//! The output directory: stage artifacts plus one manifest per stage
//! recording the config hash, the seed and a checksum of every file.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Embed,
    Score,
    Detect,
    Audit,
    Sweep,
    Report,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Embed => "embed",
            Stage::Score => "score",
            Stage::Detect => "detect",
            Stage::Audit => "audit",
            Stage::Sweep => "sweep",
            Stage::Report => "report",
        }
    }

    fn manifest_name(self) -> String {
        format!("{}.manifest.json", self.as_str())
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    /// Relative path -> hex SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct Workspace {
    dir: PathBuf,
    config_hash: String,
    seed: u64,
}

impl Workspace {
    pub fn open(dir: &Path, config_hash: &str, seed: u64) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Workspace {
            dir: dir.to_path_buf(),
            config_hash: config_hash.to_string(),
            seed,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn read(&self, name: &str) -> Result<Vec<u8>> {
        let p = self.path(name);
        fs::read(&p).map_err(|e| CliError::io(p, e))
    }

    pub fn read_json<T: serde::de::DeserializeOwned>(&self, name: &str) -> Result<T> {
        let bytes = self.read(name)?;
        serde_json::from_slice(&bytes).map_err(|source| CliError::Json {
            path: self.path(name),
            source,
        })
    }

    /// Writes a stage's files, then its manifest.
    pub fn publish(&self, stage: Stage, files: Vec<(String, Vec<u8>)>) -> Result<Manifest> {
        let mut artifacts = BTreeMap::new();
        for (name, bytes) in files {
            let p = self.path(&name);
            if let Some(parent) = p.parent() {
                fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
            fs::write(&p, &bytes).map_err(|e| CliError::io(&p, e))?;
            artifacts.insert(name, sha256_hex(&bytes));
        }
        let manifest = Manifest {
            stage: stage.as_str().to_string(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            artifacts,
        };
        let p = self.path(&stage.manifest_name());
        let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        json.push(b'\n');
        fs::write(&p, json).map_err(|e| CliError::io(&p, e))?;
        Ok(manifest)
    }

    /// Loads the manifest of a prerequisite stage and checks that it was
    /// produced by the current configuration and that its files are intact.
    pub fn require(&self, stage: Stage) -> Result<Manifest> {
        let p = self.path(&stage.manifest_name());
        if !p.exists() {
            return Err(CliError::Validation(format!(
                "no {stage} output in {}; run {stage} first",
                self.dir.display()
            )));
        }
        let m: Manifest = self.read_json(&stage.manifest_name())?;
        if m.config_hash != self.config_hash {
            return Err(CliError::Validation(format!(
                "{stage} output in {} was produced by a different configuration (hash {} vs {}); run {stage} again",
                self.dir.display(),
                short(&m.config_hash),
                short(&self.config_hash)
            )));
        }
        if m.seed != self.seed {
            return Err(CliError::Validation(format!(
                "{stage} output was produced with seed {} but this run uses {}; run {stage} again",
                m.seed, self.seed
            )));
        }
        for (name, expected) in &m.artifacts {
            let bytes = self
                .read(name)
                .map_err(|_| CliError::Validation(format!("{name} is missing; run {stage} again")))?;
            if &sha256_hex(&bytes) != expected {
                return Err(CliError::Validation(format!(
                    "{name} changed after {stage} wrote it; run {stage} again"
                )));
            }
        }
        Ok(m)
    }
}

fn short(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn publish_require_and_tamper() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path(), "abc", 1).unwrap();
        assert!(ws
            .require(Stage::Detect)
            .unwrap_err()
            .to_string()
            .contains("run detect first"));
        ws.publish(Stage::Detect, vec![("sub/x.csv".into(), b"a,b\n".to_vec())])
            .unwrap();
        assert_eq!(ws.require(Stage::Detect).unwrap().artifacts.len(), 1);

        let other = Workspace::open(dir.path(), "def", 1).unwrap();
        assert!(other
            .require(Stage::Detect)
            .unwrap_err()
            .to_string()
            .contains("different configuration"));

        fs::write(dir.path().join("sub/x.csv"), "tampered").unwrap();
        assert!(ws.require(Stage::Detect).unwrap_err().to_string().contains("changed"));
    }
}
