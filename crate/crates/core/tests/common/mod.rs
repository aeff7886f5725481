//! Reference implementations used as test oracles. Written for clarity, not
//! speed, and independent of the library code paths.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use margin_audit::audit::Membership;
use margin_audit::data::{AnnotationColumn, ChannelKind, DatasetTable, ScoreColumn};
use margin_audit::embed::EmbeddingMatrix;
use margin_audit::outlier::{LofResult, OutlierAssignment, Space};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Negated LOF straight from the textbook definitions, O(n^2 log n).
pub fn naive_lof(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = points.len();
    let d: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| dist(&points[i], &points[j])).collect())
        .collect();
    let mut kdist = vec![0.0; n];
    let mut hood: Vec<Vec<usize>> = vec![vec![]; n];
    for p in 0..n {
        let mut others: Vec<f64> = (0..n).filter(|&q| q != p).map(|q| d[p][q]).collect();
        others.sort_by(|a, b| a.partial_cmp(b).unwrap());
        kdist[p] = others[k - 1];
        hood[p] = (0..n).filter(|&q| q != p && d[p][q] <= kdist[p]).collect();
    }
    let lrd: Vec<f64> = (0..n)
        .map(|p| {
            let reach: f64 = hood[p].iter().map(|&o| kdist[o].max(d[p][o])).sum();
            hood[p].len() as f64 / (reach + 1e-10)
        })
        .collect();
    (0..n)
        .map(|p| {
            let s: f64 = hood[p].iter().map(|&o| lrd[o]).sum();
            -(s / (hood[p].len() as f64 * lrd[p] + 1e-10))
        })
        .collect()
}

/// The `floor(c n)` lowest scores, ties by ascending id.
pub fn naive_flags(ids: &[u64], scores: &[f64], c: f64) -> Vec<bool> {
    let m = (c * scores.len() as f64 + 1e-9).floor() as usize;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(ids[a].cmp(&ids[b])));
    let mut flags = vec![false; scores.len()];
    for &i in &idx[..m] {
        flags[i] = true;
    }
    flags
}

pub fn random_points<R: Rng>(rng: &mut R, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

pub fn flatten(points: &[Vec<f64>]) -> Vec<f64> {
    points.iter().flatten().copied().collect()
}

/// WMSE from raw vectors: one entry per toxicity type of (truth, scores,
/// binary labels).
pub fn naive_wmse(mask: &[bool], channels: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let mut total = 0.0;
    for (truth, score) in channels {
        let (mut si, mut ni, mut so, mut no, mut pos) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..mask.len() {
            let e = (score[i] - truth[i]).powi(2);
            if mask[i] {
                si += e;
                ni += 1.0;
                if truth[i] >= 0.5 {
                    pos += 1.0;
                }
            } else {
                so += e;
                no += 1.0;
            }
        }
        let (mi, mo) = (si / ni, so / no);
        if mo > 1e-12 {
            total += pos / ni * (mi - mo) / mo;
        }
    }
    total
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// One toxicity type: name, decimal truth, model scores.
pub type Channel<'a> = (&'a str, Vec<f64>, Vec<f64>);

/// Binarized table with model `m` scoring every channel.
pub fn audit_table(groups: &[(&str, Vec<f64>)], channels: &[Channel]) -> DatasetTable {
    let n = channels.first().map(|c| c.1.len()).unwrap_or_else(|| groups[0].1.len());
    DatasetTable::new(
        (0..n as u64).collect(),
        vec![String::new(); n],
        channels
            .iter()
            .map(|(name, truth, _)| AnnotationColumn::new(*name, ChannelKind::ToxicityAnnotation, truth.clone()))
            .collect(),
        groups
            .iter()
            .map(|(name, v)| AnnotationColumn::new(*name, ChannelKind::DemographicAnnotation, v.clone()))
            .collect(),
        channels
            .iter()
            .map(|(name, _, s)| ScoreColumn {
                name: format!("m_{name}"),
                model: "m".into(),
                target: name.to_string(),
                values: s.iter().map(|&v| Some(v)).collect(),
            })
            .collect(),
    )
    .unwrap()
    .preprocess()
}

/// An assignment with the given flags in every listed space.
pub fn fixed_assignment(flags: &[Vec<bool>], spaces: &[Space]) -> OutlierAssignment {
    let mut a = OutlierAssignment::default();
    for (f, &space) in flags.iter().zip(spaces) {
        let n = f.len();
        a.insert(LofResult {
            space,
            n_neighbors: 1,
            contamination: f.iter().filter(|&&x| x).count() as f64 / n as f64,
            ids: (0..n as u64).collect(),
            scores: f.iter().map(|&x| if x { -2.0 } else { -1.0 }).collect(),
            flags: f.clone(),
            threshold: -2.0,
        });
    }
    a
}

/// Exactly `m` of `n` rows flagged, chosen at random.
pub fn random_flags<R: Rng>(rng: &mut R, n: usize, m: usize) -> Vec<bool> {
    let mut f = vec![false; n];
    for i in rand::seq::index::sample(rng, n, m) {
        f[i] = true;
    }
    f
}

/// Random labels for `n_groups` demographics and the given toxicity types,
/// independent of everything else.
pub fn random_label_table<R: Rng>(rng: &mut R, n: usize, n_groups: usize, types: &[&str]) -> DatasetTable {
    let names: Vec<String> = (0..n_groups).map(|g| format!("g{g:02}")).collect();
    let groups: Vec<(&str, Vec<f64>)> = names
        .iter()
        .map(|name| {
            (
                name.as_str(),
                (0..n).map(|_| if rng.random_bool(0.15) { 1.0 } else { 0.0 }).collect(),
            )
        })
        .collect();
    let channels: Vec<Channel> = types
        .iter()
        .map(|&t| {
            let truth: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.2) { 0.8 } else { 0.1 }).collect();
            let scores = truth.clone();
            (t, truth, scores)
        })
        .collect();
    audit_table(&groups, &channels)
}

/// Short texts drawn from five topic vocabularies plus shared filler.
pub fn corpus(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topics: Vec<Vec<String>> = (0..5).map(|t| (0..10).map(|w| format!("t{t}w{w}")).collect()).collect();
    let common: Vec<String> = (0..8).map(|w| format!("common{w}")).collect();
    (0..n)
        .map(|_| {
            let t = rng.random_range(0..5);
            let len = rng.random_range(8..20);
            (0..len)
                .map(|_| {
                    if rng.random_bool(0.7) {
                        topics[t].choose(&mut rng).unwrap().clone()
                    } else {
                        common.choose(&mut rng).unwrap().clone()
                    }
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

/// Exact TF-IDF vectors as term -> weight maps.
pub fn tfidf(texts: &[String], min_df: usize) -> Vec<BTreeMap<String, f64>> {
    let docs: Vec<Vec<String>> = texts
        .iter()
        .map(|t| {
            t.to_lowercase()
                .split(|c: char| !c.is_alphanumeric())
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect()
        })
        .collect();
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for d in &docs {
        for term in d.iter().collect::<BTreeSet<_>>() {
            *df.entry(term.clone()).or_default() += 1;
        }
    }
    let n = docs.len() as f64;
    docs.iter()
        .map(|d| {
            let mut tf: BTreeMap<String, f64> = BTreeMap::new();
            for t in d {
                if df[t] >= min_df {
                    *tf.entry(t.clone()).or_default() += 1.0;
                }
            }
            tf.into_iter()
                .map(|(t, c)| {
                    let w = c * ((n / (1.0 + df[&t] as f64)).ln() + 1.0);
                    (t, w)
                })
                .collect()
        })
        .collect()
}

pub fn sparse_cos(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let dot: f64 = a.iter().filter_map(|(t, x)| b.get(t).map(|y| x * y)).sum();
    let na: f64 = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub fn dense_cos(m: &EmbeddingMatrix, i: usize, j: usize) -> f64 {
    m.row(i).iter().zip(m.row(j)).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Table whose scores are truth plus `lambda` times a fixed small residual.
pub fn residual_table(seed: u64, lambda: f64, n: usize, types: &[&str]) -> (DatasetTable, Membership) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask: Vec<bool> = (0..n).map(|i| i < n / 3 || rng.random_bool(0.1)).collect();
    let channels: Vec<Channel> = types
        .iter()
        .map(|&name| {
            let truth: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.9)).collect();
            let resid: Vec<f64> = (0..n).map(|_| rng.random_range(-0.009..0.009)).collect();
            let scores = truth.iter().zip(&resid).map(|(y, r)| y + lambda * r).collect();
            (name, truth, scores)
        })
        .collect();
    let g: Vec<f64> = mask.iter().map(|&m| m as u8 as f64).collect();
    (audit_table(&[("g", g)], &channels), Membership::new("g", mask))
}
