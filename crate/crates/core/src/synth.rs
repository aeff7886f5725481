//! Synthetic audit datasets with a planted disparity.
//!
//! Ground truth is drawn independently of group membership, so with an
//! inflation factor of 1 every group's expected WMSE is zero. Rows of the
//! planted group get model noise with a larger standard deviation and also
//! mention a few other randomly chosen identities, so they sit in a sparse
//! multi-identity region of the demographic space.
//!
//! Texts are a few words from a small, common filler vocabulary plus each
//! mentioned identity and some of its topic words. Rows mentioning several
//! identities therefore carry many rare terms and tend to be text outliers.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{
    AnnotationColumn, ChannelKind, DatasetTable, ScoreColumn, DEFAULT_DEMOGRAPHICS, DEFAULT_TOXICITY_TYPES,
};
use crate::error::{Error, Result};
use crate::scorer::score_column_name;

/// Model id of the simulated scores.
pub const SYNTHETIC_MODEL: &str = "synthetic";
/// Minimum number of planted rows.
pub const MIN_PLANTED_ROWS: f64 = 20.0;

/// Beta parameters of the ground truth per toxicity type.
const TRUTH_SHAPES: [(f64, f64); 6] = [(0.7, 1.6), (0.3, 3.0), (0.4, 2.0), (0.5, 1.8), (0.6, 1.6), (0.3, 2.5)];

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ra", "tu", "ne", "so", "vi", "de", "pa", "ri", "go", "ba", "le", "nu", "ste",
];
const FILLER_WORDS: usize = 40;
const TOPIC_WORDS: usize = 5;
const TOPIC_PER_MENTION: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub group: String,
    /// Share of rows in the planted group.
    pub prevalence: f64,
    /// Multiplier on the model-noise standard deviation for planted rows.
    pub inflation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub n_groups: usize,
    pub planted: PlantedSpec,
    pub seed: u64,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    /// Membership probability range of the other groups.
    #[serde(default = "default_prevalence_range")]
    pub prevalence_range: (f64, f64),
    /// Extra identities mentioned by each planted row.
    #[serde(default = "default_companions")]
    pub n_companions: usize,
}

fn default_noise_sd() -> f64 {
    0.15
}
fn default_prevalence_range() -> (f64, f64) {
    (0.03, 0.08)
}
fn default_companions() -> usize {
    3
}

impl SynthConfig {
    pub fn new(n: usize, n_groups: usize, planted: PlantedSpec, seed: u64) -> Self {
        SynthConfig {
            n,
            n_groups,
            planted,
            seed,
            noise_sd: default_noise_sd(),
            prevalence_range: default_prevalence_range(),
            n_companions: default_companions(),
        }
    }
}

/// Channel names: the default identities when `n_groups <= 24`, otherwise
/// `group_00`, `group_01`, ...
pub fn group_names(n_groups: usize) -> Vec<String> {
    if n_groups <= DEFAULT_DEMOGRAPHICS.len() {
        DEFAULT_DEMOGRAPHICS[..n_groups].iter().map(|s| s.to_string()).collect()
    } else {
        (0..n_groups).map(|i| format!("group_{i:02}")).collect()
    }
}

/// The `j`-th topic word of identity `i`. The trailing `x` keeps topic words
/// apart from filler words.
fn topic_word(i: usize, j: usize) -> String {
    let s = SYLLABLES.len();
    let k = i * TOPIC_WORDS + j;
    format!("{}{}x", SYLLABLES[k % s], SYLLABLES[(k / s) % s])
}

fn filler_word(i: usize) -> String {
    let s = SYLLABLES.len();
    format!(
        "{}{}{}",
        SYLLABLES[i % s],
        SYLLABLES[(i / s) % s],
        SYLLABLES[(i * 7 + 3) % s]
    )
}

pub fn generate_synthetic(n: usize, n_groups: usize, planted: &PlantedSpec, seed: u64) -> Result<DatasetTable> {
    generate(&SynthConfig::new(n, n_groups, planted.clone(), seed))
}

pub fn generate(cfg: &SynthConfig) -> Result<DatasetTable> {
    let PlantedSpec {
        group,
        prevalence,
        inflation,
    } = &cfg.planted;
    let names = group_names(cfg.n_groups);
    let planted_idx = names.iter().position(|g| g == group).ok_or_else(|| {
        Error::Config(format!(
            "planted group `{group}` is not among the {} groups",
            cfg.n_groups
        ))
    })?;
    if !(*prevalence > 0.0 && *prevalence < 1.0) {
        return Err(Error::Config(format!("prevalence must be in (0, 1), got {prevalence}")));
    }
    if prevalence * (cfg.n as f64) < MIN_PLANTED_ROWS {
        return Err(Error::Config(format!(
            "prevalence {prevalence} of {} rows leaves fewer than {MIN_PLANTED_ROWS} planted rows",
            cfg.n
        )));
    }
    if !(inflation.is_finite() && *inflation > 0.0) {
        return Err(Error::Config(format!("inflation must be positive, got {inflation}")));
    }
    if !(cfg.noise_sd.is_finite() && cfg.noise_sd > 0.0) {
        return Err(Error::Config("noise_sd must be positive".into()));
    }
    let (lo, hi) = cfg.prevalence_range;
    if !(0.0..=hi).contains(&lo) || hi >= 1.0 {
        return Err(Error::Config(format!("invalid prevalence range ({lo}, {hi})")));
    }
    if cfg.n_companions >= cfg.n_groups {
        return Err(Error::Config("n_companions must be smaller than n_groups".into()));
    }

    let n = cfg.n;
    let g = cfg.n_groups;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let member_p: Vec<f64> = (0..g)
        .map(|i| {
            if i == planted_idx {
                0.0
            } else {
                rng.random_range(lo..=hi)
            }
        })
        .collect();
    let n_planted = (prevalence * n as f64).round() as usize;
    let mut is_planted = vec![false; n];
    for r in sample(&mut rng, n, n_planted) {
        is_planted[r] = true;
    }
    let others: Vec<usize> = (0..g).filter(|&i| i != planted_idx).collect();

    let truth_dists: Vec<Beta<f64>> = TRUTH_SHAPES
        .iter()
        .map(|&(a, b)| Beta::new(a, b).expect("valid beta shape"))
        .collect();
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let phrases: Vec<String> = names.iter().map(|s| s.replace('_', " ")).collect();

    let mut demo = vec![Vec::with_capacity(n); g];
    let mut truth = vec![Vec::with_capacity(n); TRUTH_SHAPES.len()];
    let mut scores = vec![Vec::with_capacity(n); TRUTH_SHAPES.len()];
    let mut texts = Vec::with_capacity(n);
    for &planted in &is_planted {
        let companions: Vec<usize> = if planted {
            sample(&mut rng, others.len(), cfg.n_companions)
                .into_iter()
                .map(|i| others[i])
                .collect()
        } else {
            Vec::new()
        };
        let mut mentions = Vec::new();
        for (i, col) in demo.iter_mut().enumerate() {
            let member = if planted {
                i == planted_idx || companions.contains(&i)
            } else {
                rng.random_bool(member_p[i])
            };
            let v = if member {
                rng.random_range(0.5..=1.0)
            } else if rng.random_bool(0.3) {
                rng.random_range(0.0..0.2)
            } else {
                0.0
            };
            if v >= 0.5 {
                mentions.push(i);
            }
            col.push(v);
        }
        let sd = cfg.noise_sd * if planted { *inflation } else { 1.0 };
        for t in 0..TRUTH_SHAPES.len() {
            let y = (truth_dists[t].sample(&mut rng) * 10.0).round() / 10.0;
            let s = (y + sd * noise.sample(&mut rng)).clamp(0.0, 1.0);
            truth[t].push(y);
            scores[t].push(Some(s));
        }
        let n_words = rng.random_range(6..=14);
        let mut words: Vec<String> = Vec::with_capacity(n_words + 4 * mentions.len());
        for &m in &mentions {
            words.push(phrases[m].clone());
            for _ in 0..TOPIC_PER_MENTION {
                words.push(topic_word(m, rng.random_range(0..TOPIC_WORDS)));
            }
        }
        for _ in 0..n_words {
            let u: f64 = rng.random();
            words.push(filler_word((u * u * FILLER_WORDS as f64) as usize));
        }
        texts.push(words.join(" "));
    }

    let toxicity = DEFAULT_TOXICITY_TYPES
        .iter()
        .zip(truth)
        .map(|(name, v)| AnnotationColumn::new(*name, ChannelKind::ToxicityAnnotation, v))
        .collect();
    let demographics = names
        .iter()
        .zip(demo)
        .map(|(name, v)| AnnotationColumn::new(name.clone(), ChannelKind::DemographicAnnotation, v))
        .collect();
    let score_cols = DEFAULT_TOXICITY_TYPES
        .iter()
        .zip(scores)
        .map(|(t, values)| ScoreColumn {
            name: score_column_name(SYNTHETIC_MODEL, t),
            model: SYNTHETIC_MODEL.to_string(),
            target: t.to_string(),
            values,
        })
        .collect();
    DatasetTable::new((0..n as u64).collect(), texts, toxicity, demographics, score_cols)
}
