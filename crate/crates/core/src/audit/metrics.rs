use serde::{Deserialize, Serialize};

use crate::audit::groups::Membership;
use crate::data::DatasetTable;
use crate::error::{Error, Result};

/// Complement MSEs at or below this are treated as zero denominators.
pub const MSE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseSplit {
    pub mse_in: f64,
    pub mse_out: f64,
    pub n_in: usize,
    pub n_out: usize,
}

fn degenerate(group: &str, reason: impl Into<String>) -> Error {
    Error::DegenerateGroup {
        group: group.to_string(),
        reason: reason.into(),
    }
}

/// Mean squared error of `model`'s score against the decimal ground truth of
/// `toxicity_type`, inside the group and in its complement. Rows without a
/// score are excluded.
pub fn mse(table: &DatasetTable, group: &Membership, model: &str, toxicity_type: &str) -> Result<MseSplit> {
    let truth = table
        .toxicity(toxicity_type)
        .ok_or_else(|| Error::Config(format!("unknown toxicity type `{toxicity_type}`")))?;
    let scores = table
        .score(model, toxicity_type)
        .ok_or_else(|| Error::Config(format!("model `{model}` has no scores for `{toxicity_type}`")))?;
    if group.mask.len() != table.n_rows() {
        return Err(Error::Alignment {
            expected: table.n_rows(),
            found: group.mask.len(),
        });
    }
    let (mut s_in, mut s_out, mut n_in, mut n_out) = (0.0, 0.0, 0usize, 0usize);
    for ((&member, &y), s) in group.mask.iter().zip(&truth.values).zip(&scores.values) {
        let Some(s) = *s else { continue };
        let e = (s - y) * (s - y);
        if member {
            s_in += e;
            n_in += 1;
        } else {
            s_out += e;
            n_out += 1;
        }
    }
    if n_in == 0 {
        return Err(degenerate(&group.name, "no scored rows inside the group"));
    }
    if n_out == 0 {
        return Err(degenerate(&group.name, "no scored rows in the complement"));
    }
    Ok(MseSplit {
        mse_in: s_in / n_in as f64,
        mse_out: s_out / n_out as f64,
        n_in,
        n_out,
    })
}

/// `(mse_in - mse_out) / mse_out`, or `None` when the complement MSE is zero.
pub fn relative_mse_diff(mse_in: f64, mse_out: f64) -> Option<f64> {
    (mse_out > MSE_EPSILON).then(|| (mse_in - mse_out) / mse_out)
}

/// Share of group rows whose binary label for `toxicity_type` is positive.
pub fn freq(table: &DatasetTable, group: &Membership, toxicity_type: &str) -> Result<f64> {
    let col = table
        .toxicity(toxicity_type)
        .ok_or_else(|| Error::Config(format!("unknown toxicity type `{toxicity_type}`")))?;
    let labels = col
        .binary
        .as_deref()
        .ok_or_else(|| Error::Config("freq requires binarized labels".into()))?;
    let (mut pos, mut n) = (0usize, 0usize);
    for (&m, &b) in group.mask.iter().zip(labels) {
        if m {
            n += 1;
            pos += b as usize;
        }
    }
    if n == 0 {
        return Err(degenerate(&group.name, "group is empty"));
    }
    Ok(pos as f64 / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WmseTerm {
    pub model: String,
    pub toxicity_type: String,
    pub freq: f64,
    pub mse_in: f64,
    pub mse_out: f64,
    pub relative_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedTerm {
    pub model: String,
    pub toxicity_type: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WmseResult {
    pub group: String,
    pub group_size: usize,
    pub value: f64,
    pub terms: Vec<WmseTerm>,
    pub skipped: Vec<SkippedTerm>,
}

/// Frequency-weighted relative MSE difference between a group and its
/// complement, summed over every (model, toxicity type) score channel.
/// Positive means the models do worse on the group.
pub fn wmse(table: &DatasetTable, group: &Membership, models: &[&str], toxicity_types: &[&str]) -> Result<WmseResult> {
    let mut terms = Vec::new();
    let mut skipped = Vec::new();
    for &model in models {
        for &t in toxicity_types {
            if table.score(model, t).is_none() {
                skipped.push(SkippedTerm {
                    model: model.to_string(),
                    toxicity_type: t.to_string(),
                    reason: "no score channel".into(),
                });
                continue;
            }
            let split = mse(table, group, model, t)?;
            match relative_mse_diff(split.mse_in, split.mse_out) {
                Some(rel) => terms.push(WmseTerm {
                    model: model.to_string(),
                    toxicity_type: t.to_string(),
                    freq: freq(table, group, t)?,
                    mse_in: split.mse_in,
                    mse_out: split.mse_out,
                    relative_diff: rel,
                }),
                None => skipped.push(SkippedTerm {
                    model: model.to_string(),
                    toxicity_type: t.to_string(),
                    reason: "complement MSE is zero".into(),
                }),
            }
        }
    }
    if terms.is_empty() {
        return Err(Error::EmptyResult(format!(
            "every WMSE term for group `{}` was skipped",
            group.name
        )));
    }
    let value = terms.iter().map(|t| t.freq * t.relative_diff).sum();
    Ok(WmseResult {
        group: group.name.clone(),
        group_size: group.size(),
        value,
        terms,
        skipped,
    })
}

/// Percentage of `pool` values that are `<= target`.
pub fn percentile_rank(target: f64, pool: &[f64]) -> f64 {
    if pool.is_empty() {
        return 0.0;
    }
    let at_or_below = pool.iter().filter(|&&v| v <= target).count();
    100.0 * at_or_below as f64 / pool.len() as f64
}
