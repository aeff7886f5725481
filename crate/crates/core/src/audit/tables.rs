use serde::{Deserialize, Serialize};

use crate::audit::groups::Membership;
use crate::audit::metrics::{mse, relative_mse_diff, MSE_EPSILON};
use crate::audit::stats::chi_square_homogeneity;
use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::outlier::{OutlierAssignment, Space};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToxicityGap {
    pub group: String,
    pub toxicity_type: String,
    pub mean_in: f64,
    pub mean_out: f64,
    /// `None` when the complement mean is zero.
    pub relative_pct: Option<f64>,
}

/// Mean decimal ground truth inside vs outside a group.
pub fn toxicity_gap_for(table: &DatasetTable, group: &Membership, toxicity_type: &str) -> Result<ToxicityGap> {
    let col = table
        .toxicity(toxicity_type)
        .ok_or_else(|| Error::Config(format!("unknown toxicity type `{toxicity_type}`")))?;
    let (mut s_in, mut s_out, mut n_in, mut n_out) = (0.0, 0.0, 0usize, 0usize);
    for (&m, &v) in group.mask.iter().zip(&col.values) {
        if m {
            s_in += v;
            n_in += 1;
        } else {
            s_out += v;
            n_out += 1;
        }
    }
    if n_in == 0 || n_out == 0 {
        return Err(Error::DegenerateGroup {
            group: group.name.clone(),
            reason: "toxicity gap needs rows on both sides".into(),
        });
    }
    let (mean_in, mean_out) = (s_in / n_in as f64, s_out / n_out as f64);
    Ok(ToxicityGap {
        group: group.name.clone(),
        toxicity_type: toxicity_type.to_string(),
        mean_in,
        mean_out,
        relative_pct: (mean_out > MSE_EPSILON).then(|| (mean_in - mean_out) / mean_out * 100.0),
    })
}

pub fn toxicity_gap(
    table: &DatasetTable,
    assignment: &OutlierAssignment,
    space: Space,
    toxicity_type: &str,
) -> Result<ToxicityGap> {
    let group = Membership::new(space.group_name(), assignment.flags(space)?.to_vec());
    toxicity_gap_for(table, &group, toxicity_type)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub group: String,
    pub toxicity_type: String,
    pub outlier_space: Space,
    pub chi2: f64,
    pub p_value: f64,
    pub significant_after_bonferroni: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UndefinedTest {
    pub group: String,
    pub toxicity_type: String,
    pub outlier_space: Space,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignificanceCount {
    pub outlier_space: Space,
    pub toxicity_type: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceSummary {
    pub alpha: f64,
    /// Number of valid tests, the Bonferroni divisor.
    pub n_tests: usize,
    pub counts: Vec<SignificanceCount>,
    pub results: Vec<SignificanceResult>,
    pub undefined: Vec<UndefinedTest>,
}

impl SignificanceSummary {
    pub fn count(&self, space: Space, toxicity_type: &str) -> usize {
        self.counts
            .iter()
            .find(|c| c.outlier_space == space && c.toxicity_type == toxicity_type)
            .map(|c| c.count)
            .unwrap_or(0)
    }
}

/// For every demographic group, outlier space and toxicity type, tests
/// whether outliers inside the group carry the positive label at a different
/// rate than non-outliers inside the group. Significance uses a Bonferroni
/// threshold of `alpha / m` over the `m` valid tests.
pub fn count_significant_groups(
    table: &DatasetTable,
    assignment: &OutlierAssignment,
    spaces: &[Space],
    toxicity_types: &[&str],
    alpha: f64,
) -> Result<SignificanceSummary> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let mut raw = Vec::new();
    let mut undefined = Vec::new();
    for &space in spaces {
        let flags = assignment.flags(space)?;
        for &t in toxicity_types {
            let labels = table
                .toxicity(t)
                .ok_or_else(|| Error::Config(format!("unknown toxicity type `{t}`")))?
                .binary
                .as_deref()
                .ok_or_else(|| Error::Config("significance tests need binarized labels".into()))?;
            for g in table.demographic_columns() {
                let mut cells = [0u64; 4];
                for ((&member, &flag), &pos) in g.labels().iter().zip(flags).zip(labels) {
                    if member {
                        cells[(!flag as usize) * 2 + (!pos as usize)] += 1;
                    }
                }
                match chi_square_homogeneity(cells[0], cells[1], cells[2], cells[3]) {
                    Some(c) => raw.push((g.name.clone(), t.to_string(), space, c)),
                    None => undefined.push(UndefinedTest {
                        group: g.name.clone(),
                        toxicity_type: t.to_string(),
                        outlier_space: space,
                    }),
                }
            }
        }
    }
    let n_tests = raw.len();
    let cutoff = alpha / n_tests.max(1) as f64;
    let results: Vec<SignificanceResult> = raw
        .into_iter()
        .map(|(group, toxicity_type, outlier_space, c)| SignificanceResult {
            group,
            toxicity_type,
            outlier_space,
            chi2: c.chi2,
            p_value: c.p_value,
            significant_after_bonferroni: c.p_value < cutoff,
        })
        .collect();
    let mut counts = Vec::new();
    for &space in spaces {
        for &t in toxicity_types {
            counts.push(SignificanceCount {
                outlier_space: space,
                toxicity_type: t.to_string(),
                count: results
                    .iter()
                    .filter(|r| r.outlier_space == space && r.toxicity_type == t && r.significant_after_bonferroni)
                    .count(),
            });
        }
    }
    Ok(SignificanceSummary {
        alpha,
        n_tests,
        counts,
        results,
        undefined,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub model: String,
    pub toxicity_type: String,
    pub overall_mse: f64,
    pub outlier_mse: f64,
    pub non_outlier_mse: f64,
    /// Percent increase on outliers; `None` when the non-outlier MSE is zero.
    pub pct_increase: Option<f64>,
}

/// Overall, outlier and non-outlier MSE for every (model, type) channel,
/// sorted by percent increase (largest first, undefined last).
pub fn mse_table(
    table: &DatasetTable,
    outliers: &Membership,
    models: &[&str],
    toxicity_types: &[&str],
) -> Result<Vec<MseRow>> {
    let mut rows = Vec::new();
    for &model in models {
        for &t in toxicity_types {
            if table.score(model, t).is_none() {
                continue;
            }
            let s = mse(table, outliers, model, t)?;
            let overall = (s.mse_in * s.n_in as f64 + s.mse_out * s.n_out as f64) / (s.n_in + s.n_out) as f64;
            rows.push(MseRow {
                model: model.to_string(),
                toxicity_type: t.to_string(),
                overall_mse: overall,
                outlier_mse: s.mse_in,
                non_outlier_mse: s.mse_out,
                pct_increase: relative_mse_diff(s.mse_in, s.mse_out).map(|r| r * 100.0),
            });
        }
    }
    rows.sort_by(|a, b| match (a.pct_increase, b.pct_increase) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(rows)
}

pub fn outlier_mse_table(
    table: &DatasetTable,
    assignment: &OutlierAssignment,
    space: Space,
    models: &[&str],
    toxicity_types: &[&str],
) -> Result<Vec<MseRow>> {
    let group = Membership::new(space.group_name(), assignment.flags(space)?.to_vec());
    mse_table(table, &group, models, toxicity_types)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AnnotationColumn, ChannelKind, ScoreColumn};

    fn table(truth: &[f64], scores: &[f64]) -> DatasetTable {
        let n = truth.len();
        DatasetTable::new(
            (0..n as u64).collect(),
            vec![String::new(); n],
            vec![AnnotationColumn::new(
                "toxicity",
                ChannelKind::ToxicityAnnotation,
                truth.to_vec(),
            )],
            vec![AnnotationColumn::new(
                "g",
                ChannelKind::DemographicAnnotation,
                vec![1.0; n],
            )],
            vec![ScoreColumn {
                name: "m_toxicity".into(),
                model: "m".into(),
                target: "toxicity".into(),
                values: scores.iter().map(|&s| Some(s)).collect(),
            }],
        )
        .unwrap()
        .binarize()
    }

    #[test]
    fn gap_hand_arithmetic() {
        let t = table(&[0.3, 0.3, 0.2, 0.2, 0.2], &[0.0; 5]);
        let g = toxicity_gap_for(
            &t,
            &Membership::new("o", vec![true, true, false, false, false]),
            "toxicity",
        )
        .unwrap();
        assert!((g.relative_pct.unwrap() - 50.0).abs() < 1e-9);
        let g = toxicity_gap_for(
            &t,
            &Membership::new("o", vec![false, false, true, true, false]),
            "toxicity",
        )
        .unwrap();
        assert!((g.mean_in - 0.2).abs() < 1e-15);
        let same = table(&[0.4; 4], &[0.0; 4]);
        let g = toxicity_gap_for(&same, &Membership::new("o", vec![true, false, true, false]), "toxicity").unwrap();
        assert_eq!(g.relative_pct, Some(0.0));
    }

    #[test]
    fn mse_table_rows() {
        // Outliers: rows 0,1 (errors 0.5, 0.5); others rows 2,3 (errors 0.1, 0.3).
        let t = table(&[1.0, 0.0, 0.5, 0.5], &[0.5, 0.5, 0.6, 0.8]);
        let rows = mse_table(
            &t,
            &Membership::new("o", vec![true, true, false, false]),
            &["m"],
            &["toxicity"],
        )
        .unwrap();
        let r = &rows[0];
        assert!((r.outlier_mse - 0.25).abs() < 1e-15);
        assert!((r.non_outlier_mse - 0.05).abs() < 1e-15);
        assert!((r.overall_mse - 0.15).abs() < 1e-15);
        assert!((r.pct_increase.unwrap() - 400.0).abs() < 1e-9);
    }

    #[test]
    fn perfect_model_pct_undefined() {
        let t = table(&[1.0, 0.0, 0.5], &[1.0, 0.0, 0.5]);
        let rows = mse_table(
            &t,
            &Membership::new("o", vec![true, false, false]),
            &["m"],
            &["toxicity"],
        )
        .unwrap();
        assert_eq!(rows[0].pct_increase, None);
        assert_eq!(rows[0].overall_mse, 0.0);
    }
}
