use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Hex SHA-256 of the comment text.
pub fn text_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCacheEntry {
    pub text_hash: String,
    pub model: String,
    pub attribute: String,
    pub value: f64,
    /// Seconds since the Unix epoch.
    pub fetched_at: u64,
}

type Key = (String, String, String);

/// Append-only JSON-lines score cache. Later lines win on duplicate keys.
#[derive(Debug)]
pub struct ScoreCache {
    path: PathBuf,
    entries: HashMap<Key, f64>,
}

impl ScoreCache {
    /// Loads the cache, or starts an empty one if the file does not exist.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        match File::open(path) {
            Ok(f) => {
                for (i, line) in BufReader::new(f).lines().enumerate() {
                    let line = line.map_err(|e| Error::io(path, e))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let e: ScoreCacheEntry = serde_json::from_str(&line)
                        .map_err(|e| Error::Format(format!("{} line {}: {e}", path.display(), i + 1)))?;
                    if !(0.0..=1.0).contains(&e.value) {
                        return Err(Error::Format(format!(
                            "{} line {}: cached score {} is outside [0, 1]",
                            path.display(),
                            i + 1,
                            e.value
                        )));
                    }
                    entries.insert((e.text_hash, e.model, e.attribute), e.value);
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(Error::io(path, e)),
        }
        Ok(ScoreCache {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, text_hash: &str, model: &str, attribute: &str) -> Option<f64> {
        self.entries
            .get(&(text_hash.to_string(), model.to_string(), attribute.to_string()))
            .copied()
    }

    /// Appends entries to the file, then to the in-memory map.
    pub fn insert_all(&mut self, new: &[ScoreCacheEntry]) -> Result<()> {
        if new.is_empty() {
            return Ok(());
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        let mut buf = String::new();
        for e in new {
            buf.push_str(&serde_json::to_string(e)?);
            buf.push('\n');
        }
        f.write_all(buf.as_bytes()).map_err(|e| Error::io(&self.path, e))?;
        for e in new {
            self.entries
                .insert((e.text_hash.clone(), e.model.clone(), e.attribute.clone()), e.value);
        }
        Ok(())
    }
}

pub(crate) fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_sha256_hex() {
        assert_eq!(
            text_hash(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let mut c = ScoreCache::open(&path).unwrap();
        assert!(c.is_empty());
        c.insert_all(&[ScoreCacheEntry {
            text_hash: text_hash("hi"),
            model: "m".into(),
            attribute: "toxicity".into(),
            value: 0.125,
            fetched_at: 7,
        }])
        .unwrap();
        let c = ScoreCache::open(&path).unwrap();
        assert_eq!(c.get(&text_hash("hi"), "m", "toxicity"), Some(0.125));
        assert_eq!(c.get(&text_hash("hi"), "m", "insult"), None);
    }
}
