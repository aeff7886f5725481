//! Model scores: an HTTP client for comment-scoring services that accept
//! `{"comment": {"text": ..}, "requestedAttributes": {..}}` requests, and a
//! CSV importer for scores computed elsewhere.

mod cache;
mod import;
mod limiter;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::data::{DatasetTable, ScoreColumn};
use crate::error::{Error, Result};

pub use cache::{text_hash, ScoreCache, ScoreCacheEntry};
pub use import::{export_scores, import_scores, import_scores_from_reader, score_column_name};
pub use limiter::RateLimiter;

pub const API_KEY_ENV: &str = "SCORER_API_KEY";
pub const MAX_RETRIES_LIMIT: u32 = 10;

fn default_rps() -> f64 {
    1.0
}
fn default_retries() -> u32 {
    3
}
fn default_timeout() -> f64 {
    30.0
}
fn default_backoff() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerEndpointConfig {
    pub base_url: String,
    /// Model id the fetched scores are stored under.
    pub model_id: String,
    /// Local toxicity attribute -> remote attribute name.
    pub attribute_map: BTreeMap<String, String>,
    #[serde(default = "default_rps")]
    pub requests_per_second: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    /// Recorded in reports for provenance.
    #[serde(default)]
    pub api_version: Option<String>,
    /// First retry delay; doubles on every further retry.
    #[serde(default = "default_backoff")]
    pub backoff_base_secs: f64,
    /// Read from [`API_KEY_ENV`], never from the config file.
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl ScorerEndpointConfig {
    pub fn new(base_url: &str, model_id: &str, attribute_map: BTreeMap<String, String>) -> Self {
        ScorerEndpointConfig {
            base_url: base_url.to_string(),
            model_id: model_id.to_string(),
            attribute_map,
            requests_per_second: default_rps(),
            max_retries: default_retries(),
            timeout_secs: default_timeout(),
            api_version: None,
            backoff_base_secs: default_backoff(),
            api_key: None,
        }
    }

    /// Default mapping from the six toxicity attributes to upper-case remote
    /// names.
    pub fn perspective_attributes() -> BTreeMap<String, String> {
        crate::data::DEFAULT_TOXICITY_TYPES
            .iter()
            .map(|a| (a.to_string(), a.to_uppercase()))
            .collect()
    }

    pub fn with_env_key(mut self) -> Self {
        self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.requests_per_second.is_finite() && self.requests_per_second > 0.0) {
            return Err(Error::Config("requests_per_second must be positive".into()));
        }
        if self.max_retries > MAX_RETRIES_LIMIT {
            return Err(Error::Config(format!(
                "max_retries must be at most {MAX_RETRIES_LIMIT}"
            )));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(Error::Config("timeout_secs must be positive".into()));
        }
        if !(self.backoff_base_secs.is_finite() && self.backoff_base_secs >= 0.0) {
            return Err(Error::Config("backoff_base_secs must be non-negative".into()));
        }
        if self.attribute_map.is_empty() {
            return Err(Error::Config("attribute_map is empty".into()));
        }
        reqwest::Url::parse(&self.base_url)
            .map_err(|e| Error::Config(format!("invalid base_url `{}`: {e}", self.base_url)))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub id: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchOutcome {
    pub table: DatasetTable,
    pub n_requests: usize,
    pub errors: Vec<RowError>,
}

enum Failure {
    Transient(String),
    Permanent(String),
}

/// Request body for one comment and a set of remote attributes.
pub fn request_body(text: &str, remote_attributes: &[&str]) -> Value {
    let requested: serde_json::Map<String, Value> =
        remote_attributes.iter().map(|a| (a.to_string(), json!({}))).collect();
    json!({"comment": {"text": text}, "requestedAttributes": requested})
}

/// Extracts `attributeScores.<ATTR>.summaryScore.value` for each attribute.
pub fn parse_response(body: &Value, remote_attributes: &[&str]) -> std::result::Result<Vec<f64>, String> {
    remote_attributes
        .iter()
        .map(|a| {
            let v = body
                .pointer(&format!("/attributeScores/{a}/summaryScore/value"))
                .and_then(Value::as_f64)
                .ok_or_else(|| format!("response lacks a summary score for `{a}`"))?;
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(format!("score {v} for `{a}` is outside [0, 1]"))
            }
        })
        .collect()
}

struct Client {
    http: reqwest::blocking::Client,
    url: reqwest::Url,
    limiter: RateLimiter,
    config: ScorerEndpointConfig,
    n_requests: usize,
}

impl Client {
    fn new(config: &ScorerEndpointConfig) -> Result<Self> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| Error::Scorer(e.to_string()))?;
        let mut url =
            reqwest::Url::parse(&config.base_url).map_err(|e| Error::Config(format!("invalid base_url: {e}")))?;
        if let Some(key) = &config.api_key {
            url.query_pairs_mut().append_pair("key", key);
        }
        Ok(Client {
            http,
            url,
            limiter: RateLimiter::per_second(config.requests_per_second),
            config: config.clone(),
            n_requests: 0,
        })
    }

    fn attempt(&mut self, body: &Value) -> std::result::Result<Value, Failure> {
        self.limiter.acquire();
        self.n_requests += 1;
        let resp = self
            .http
            .post(self.url.clone())
            .json(body)
            .send()
            .map_err(|e| Failure::Transient(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Failure::Transient(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Failure::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(Failure::Permanent(format!("HTTP {status}: {}", text.trim())));
        }
        serde_json::from_str(&text).map_err(|e| Failure::Permanent(format!("malformed JSON: {e}")))
    }

    /// One logical request with exponential backoff on transient failures.
    fn score(&mut self, body: &Value) -> std::result::Result<Value, String> {
        let mut delay = self.config.backoff_base_secs;
        for attempt in 0..=self.config.max_retries {
            match self.attempt(body) {
                Ok(v) => return Ok(v),
                Err(Failure::Permanent(m)) => return Err(m),
                Err(Failure::Transient(m)) => {
                    if attempt == self.config.max_retries {
                        return Err(format!("{m} (gave up after {} retries)", self.config.max_retries));
                    }
                    log::debug!("transient scorer failure ({m}); retrying in {delay}s");
                    std::thread::sleep(Duration::from_secs_f64(delay));
                    delay *= 2.0;
                }
            }
        }
        unreachable!("loop returns on the last attempt")
    }
}

/// Scores every row for every mapped attribute, using the cache where
/// possible. Each row needing scores costs one request covering all its
/// uncached attributes. Failed rows are recorded and left unscored; a
/// response without the expected fields is a parse error.
pub fn fetch_scores(table: &DatasetTable, config: &ScorerEndpointConfig, cache_path: &Path) -> Result<FetchOutcome> {
    config.validate()?;
    for local in config.attribute_map.keys() {
        if table.toxicity(local).is_none() {
            return Err(Error::Config(format!(
                "attribute `{local}` is not a toxicity annotation of the dataset"
            )));
        }
    }
    if table.is_empty() {
        return Ok(FetchOutcome {
            table: table.clone(),
            n_requests: 0,
            errors: vec![],
        });
    }
    let model = config.model_id.as_str();
    let mut cache = ScoreCache::open(cache_path)?;
    let mut client: Option<Client> = None;
    let locals: Vec<&str> = config.attribute_map.keys().map(String::as_str).collect();
    let mut values = vec![vec![None; table.n_rows()]; locals.len()];
    let mut errors = Vec::new();

    for (r, (&id, text)) in table.ids().iter().zip(table.texts()).enumerate() {
        let hash = text_hash(text);
        let mut missing = Vec::new();
        for (slot, &local) in locals.iter().enumerate() {
            match cache.get(&hash, model, local) {
                Some(v) => values[slot][r] = Some(v),
                None => missing.push(slot),
            }
        }
        if missing.is_empty() {
            continue;
        }
        let remote: Vec<&str> = missing
            .iter()
            .map(|&s| config.attribute_map[locals[s]].as_str())
            .collect();
        let c = match client.as_mut() {
            Some(c) => c,
            None => client.insert(Client::new(config)?),
        };
        let body = match c.score(&request_body(text, &remote)) {
            Ok(b) => b,
            Err(message) => {
                log::warn!("row {id}: {message}");
                errors.push(RowError { id, message });
                continue;
            }
        };
        let scores = parse_response(&body, &remote).map_err(|message| Error::Parse {
            row: id as usize,
            column: "response".into(),
            message,
        })?;
        let fetched_at = cache::now_unix();
        let entries: Vec<ScoreCacheEntry> = missing
            .iter()
            .zip(&scores)
            .map(|(&slot, &value)| {
                values[slot][r] = Some(value);
                ScoreCacheEntry {
                    text_hash: hash.clone(),
                    model: model.to_string(),
                    attribute: locals[slot].to_string(),
                    value,
                    fetched_at,
                }
            })
            .collect();
        cache.insert_all(&entries)?;
    }

    let columns = locals
        .iter()
        .zip(values)
        .map(|(&local, values)| ScoreColumn {
            name: score_column_name(model, local),
            model: model.to_string(),
            target: local.to_string(),
            values,
        })
        .collect();
    Ok(FetchOutcome {
        table: table.with_scores(columns)?,
        n_requests: client.map(|c| c.n_requests).unwrap_or(0),
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_shape() {
        let b = request_body("hi", &["TOXICITY"]);
        assert_eq!(
            b,
            json!({"comment": {"text": "hi"}, "requestedAttributes": {"TOXICITY": {}}})
        );
    }

    #[test]
    fn response_parsing() {
        let body = json!({"attributeScores": {"TOXICITY": {"summaryScore": {"value": 0.42, "type": "PROBABILITY"}}}});
        assert_eq!(parse_response(&body, &["TOXICITY"]), Ok(vec![0.42]));
        assert!(parse_response(&body, &["INSULT"]).is_err());
        let bad = json!({"attributeScores": {"TOXICITY": {"summaryScore": {"value": 1.5}}}});
        assert!(parse_response(&bad, &["TOXICITY"]).is_err());
    }

    #[test]
    fn config_limits() {
        let mut c = ScorerEndpointConfig::new(
            "http://localhost:1",
            "m",
            ScorerEndpointConfig::perspective_attributes(),
        );
        assert!(c.validate().is_ok());
        c.max_retries = 11;
        assert!(c.validate().is_err());
        c.max_retries = 3;
        c.requests_per_second = 0.0;
        assert!(c.validate().is_err());
    }
}
