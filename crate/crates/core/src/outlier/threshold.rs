use crate::error::{Error, Result};

/// `floor(contamination * n)`, tolerant of representation error such as
/// `0.29 * 100 = 28.999999999999996`.
pub fn flagged_count(contamination: f64, n: usize) -> usize {
    (contamination * n as f64 + 1e-9).floor() as usize
}

pub fn check_contamination(contamination: f64) -> Result<()> {
    if contamination > 0.0 && contamination <= 0.5 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "contamination must be in (0, 0.5], got {contamination}"
        )))
    }
}

/// Row indices ordered from most to least outlying: ascending score, ties by
/// ascending id.
pub fn outlier_order(ids: &[u64], scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(ids[a].cmp(&ids[b])));
    order
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flagging {
    pub flags: Vec<bool>,
    /// The m-th lowest score.
    pub threshold: f64,
    pub n_flagged: usize,
}

/// Flags exactly the `floor(c * n)` lowest-scoring records, breaking ties by
/// ascending id.
pub fn threshold_by_contamination(ids: &[u64], scores: &[f64], contamination: f64) -> Result<Flagging> {
    check_contamination(contamination)?;
    if ids.len() != scores.len() {
        return Err(Error::Alignment {
            expected: ids.len(),
            found: scores.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Config("outlier scores must be finite".into()));
    }
    let m = flagged_count(contamination, scores.len());
    if m == 0 {
        return Err(Error::Config(format!(
            "contamination {contamination} flags no records out of {}",
            scores.len()
        )));
    }
    Ok(flag_lowest(ids, scores, m))
}

/// Flags the `m` lowest-scoring records (`1 <= m <= n`).
pub fn flag_lowest(ids: &[u64], scores: &[f64], m: usize) -> Flagging {
    let order = outlier_order(ids, scores);
    let mut flags = vec![false; scores.len()];
    for &r in &order[..m] {
        flags[r] = true;
    }
    Flagging {
        flags,
        threshold: scores[order[m - 1]],
        n_flagged: m,
    }
}
