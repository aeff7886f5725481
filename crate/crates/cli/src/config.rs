//! The JSON run configuration.

use std::fs;
use std::path::{Path, PathBuf};

use margin_audit::audit::BreakdownOptions;
use margin_audit::outlier::{OutlierConfig, Space};
use margin_audit::scorer::ScorerEndpointConfig;
use margin_audit::sweep::DEFAULT_SCHEDULE_PERCENT;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Input CSV.
    pub dataset: PathBuf,
    /// Schema JSON; the Jigsaw layout when absent.
    #[serde(default)]
    pub schema: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub scores: ScoreConfig,
    #[serde(default = "default_outliers")]
    pub outliers: Vec<OutlierConfig>,
    #[serde(default)]
    pub breakdown: BreakdownOptions,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Models to audit; every scored model when absent.
    #[serde(default)]
    pub models: Option<Vec<String>>,
    /// Toxicity types to audit; every toxicity annotation when absent.
    #[serde(default)]
    pub toxicity_types: Option<Vec<String>>,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Output directory; `--out` takes precedence. Not part of the hash.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Directory relative paths were resolved against.
    #[serde(skip)]
    base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Per-group stratified sampling fraction.
    #[serde(default)]
    pub sample_fraction: Option<f64>,
    /// Drop rows whose text repeats an earlier row.
    #[serde(default)]
    pub dedup: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_min_df")]
    pub min_df: usize,
    /// Precomputed `EMBD` matrix used instead of the builtin embedder.
    #[serde(default)]
    pub external: Option<PathBuf>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: default_dim(),
            min_df: default_min_df(),
            external: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreImport {
    pub path: PathBuf,
    pub model: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreConfig {
    #[serde(default)]
    pub imports: Vec<ScoreImport>,
    #[serde(default)]
    pub endpoint: Option<ScorerEndpointConfig>,
    /// Score cache; `<out>/score_cache.jsonl` when absent.
    #[serde(default)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_schedule")]
    pub schedule_percent: Vec<f64>,
    /// Spaces to sweep; every detected space when absent.
    #[serde(default)]
    pub spaces: Option<Vec<Space>>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            schedule_percent: default_schedule(),
            spaces: None,
        }
    }
}

fn default_outliers() -> Vec<OutlierConfig> {
    Space::ALL.iter().map(|&s| OutlierConfig::new(s)).collect()
}
fn default_alpha() -> f64 {
    0.05
}
fn default_dim() -> usize {
    margin_audit::embed::DEFAULT_DIM
}
fn default_min_df() -> usize {
    margin_audit::embed::DEFAULT_MIN_DF
}
fn default_schedule() -> Vec<f64> {
    DEFAULT_SCHEDULE_PERCENT.to_vec()
}

/// Value of `--space`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceSelection {
    All,
    One(Space),
}

impl std::str::FromStr for SpaceSelection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "all" {
            return Ok(SpaceSelection::All);
        }
        s.parse()
            .map(SpaceSelection::One)
            .map_err(|e: margin_audit::error::Error| e.to_string())
    }
}

impl RunConfig {
    pub fn minimal(dataset: impl Into<PathBuf>) -> Self {
        serde_json::from_value(serde_json::json!({ "dataset": dataset.into() })).expect("defaults deserialize")
    }

    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn map_paths(&mut self, f: impl Fn(&mut PathBuf)) {
        f(&mut self.dataset);
        let optional = [
            &mut self.schema,
            &mut self.embedding.external,
            &mut self.scores.cache,
            &mut self.out,
        ];
        for p in optional.into_iter().flatten() {
            f(p);
        }
        for i in &mut self.scores.imports {
            f(&mut i.path);
        }
    }

    fn rebase(&mut self, base: &Path) {
        self.map_paths(|p| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        });
        self.base_dir = Some(base.to_path_buf());
    }

    pub fn apply_space(&mut self, selection: SpaceSelection) {
        if let SpaceSelection::One(space) = selection {
            let cfg = self
                .outliers
                .iter()
                .find(|c| c.space == space)
                .cloned()
                .unwrap_or_else(|| OutlierConfig::new(space));
            self.outliers = vec![cfg];
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut inputs = vec![("dataset", &self.dataset)];
        inputs.extend(self.schema.iter().map(|p| ("schema", p)));
        inputs.extend(self.embedding.external.iter().map(|p| ("embedding.external", p)));
        inputs.extend(self.scores.imports.iter().map(|i| ("scores.imports", &i.path)));
        for (field, p) in inputs {
            if !p.is_file() {
                return Err(CliError::Validation(format!("{field}: {} does not exist", p.display())));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Validation(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.outliers.is_empty() {
            return Err(CliError::Validation("no outlier spaces configured".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for o in &self.outliers {
            if !seen.insert(o.space) {
                return Err(CliError::Validation(format!(
                    "outlier space `{}` is configured twice",
                    o.space
                )));
            }
            margin_audit::outlier::check_contamination(o.contamination)?;
        }
        margin_audit::sweep::normalize_schedule(&self.sweep.schedule_percent)?;
        if let Some(f) = self.preprocess.sample_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(CliError::Validation(format!(
                    "sample_fraction must be in (0, 1], got {f}"
                )));
            }
        }
        if let Some(e) = &self.scores.endpoint {
            e.validate()?;
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON of everything that affects results.
    /// The output directory is excluded, so the same run written to two
    /// places carries the same hash.
    /// Paths are hashed as written in the file, so moving a config together
    /// with its inputs keeps the hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        if let Some(base) = c.base_dir.take() {
            c.map_paths(|p| {
                if let Ok(rel) = p.strip_prefix(&base) {
                    *p = rel.to_path_buf();
                }
            });
        }
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn spaces(&self) -> Vec<Space> {
        let mut s: Vec<Space> = self.outliers.iter().map(|o| o.space).collect();
        s.sort();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_hash() {
        let mut c = RunConfig::minimal("data.csv");
        assert_eq!(c.outliers.len(), 3);
        assert_eq!(c.alpha, 0.05);
        assert_eq!(c.sweep.schedule_percent.len(), 15);
        let h = c.hash();
        c.out = Some("elsewhere".into());
        assert_eq!(c.hash(), h);
        c.seed = 1;
        assert_ne!(c.hash(), h);
    }

    #[test]
    fn hash_ignores_config_location() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"{"dataset": "d.csv", "schema": "s.json", "seed": 4}"#;
        for sub in ["a", "b/c"] {
            std::fs::create_dir_all(dir.path().join(sub)).unwrap();
            std::fs::write(dir.path().join(sub).join("cfg.json"), text).unwrap();
        }
        let a = RunConfig::load(&dir.path().join("a/cfg.json")).unwrap();
        let b = RunConfig::load(&dir.path().join("b/c/cfg.json")).unwrap();
        assert_ne!(a.dataset, b.dataset);
        assert!(a.dataset.ends_with("a/d.csv"));
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn space_override() {
        let mut c = RunConfig::minimal("d.csv");
        c.apply_space("demographic".parse().unwrap());
        assert_eq!(c.spaces(), vec![Space::Demographic]);
        assert!("nowhere".parse::<SpaceSelection>().is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"dataset": "x", "sede": 3}"#).is_err());
    }
}
