//! Contamination sweep: re-threshold fixed LOF scores over a schedule, trace
//! outlier-group WMSE against group size, and compare demographic groups with
//! that curve.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::audit::{wmse, Membership, WmseResult};
use crate::data::DatasetTable;
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::outlier::{
    check_contamination, feature_points, flag_lowest, flagged_count, run_lof, LofResult, OutlierConfig, Space,
};

/// Contamination levels in percent.
pub const DEFAULT_SCHEDULE_PERCENT: [f64; 15] = [
    0.1, 0.25, 0.5, 0.75, 1.0, 2.5, 5.0, 7.5, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0,
];

/// Converts percentages to fractions and checks each lies in (0, 0.5].
pub fn normalize_schedule(percent: &[f64]) -> Result<Vec<f64>> {
    percent
        .iter()
        .map(|&p| {
            let c = p / 100.0;
            check_contamination(c).map(|_| c)
        })
        .collect()
}

pub fn default_schedule() -> Vec<f64> {
    normalize_schedule(&DEFAULT_SCHEDULE_PERCENT).expect("default schedule is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub contamination: f64,
    pub group_size: usize,
    pub threshold: f64,
    pub wmse: WmseResult,
    #[serde(skip)]
    pub flags: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedLevel {
    pub contamination: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub space: Space,
    pub model: String,
    pub n_neighbors: usize,
    /// Sorted by group size.
    pub points: Vec<SweepPoint>,
    pub skipped: Vec<SkippedLevel>,
}

/// Sweeps a schedule over already computed scores. Levels that flag nobody,
/// or whose outlier group has an undefined WMSE, are skipped with a warning.
pub fn sweep_scores(
    table: &DatasetTable,
    lof: &LofResult,
    schedule: &[f64],
    model: &str,
    toxicity_types: &[&str],
) -> Result<SweepCurve> {
    if lof.scores.len() != table.n_rows() {
        return Err(Error::Alignment {
            expected: table.n_rows(),
            found: lof.scores.len(),
        });
    }
    let n = table.n_rows();
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for &c in schedule {
        check_contamination(c)?;
        let m = flagged_count(c, n);
        if m == 0 {
            log::warn!("contamination {c} flags no records out of {n}; skipping");
            skipped.push(SkippedLevel {
                contamination: c,
                reason: format!("flags no records out of {n}"),
            });
            continue;
        }
        let f = flag_lowest(&lof.ids, &lof.scores, m);
        let group = Membership::new(lof.space.group_name(), f.flags);
        match wmse(table, &group, &[model], toxicity_types) {
            Ok(w) => points.push(SweepPoint {
                contamination: c,
                group_size: m,
                threshold: f.threshold,
                wmse: w,
                flags: group.mask,
            }),
            Err(e @ (Error::DegenerateGroup { .. } | Error::EmptyResult(_))) => {
                log::warn!("contamination {c}: {e}; skipping");
                skipped.push(SkippedLevel {
                    contamination: c,
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    points.sort_by(|a, b| {
        a.group_size
            .cmp(&b.group_size)
            .then(a.contamination.total_cmp(&b.contamination))
    });
    Ok(SweepCurve {
        space: lof.space,
        model: model.to_string(),
        n_neighbors: lof.n_neighbors,
        points,
        skipped,
    })
}

/// Computes LOF scores once for `space` and sweeps the schedule over them.
#[allow(clippy::too_many_arguments)]
pub fn contamination_sweep(
    table: &DatasetTable,
    embeddings: Option<&EmbeddingMatrix>,
    space: Space,
    schedule: &[f64],
    n_neighbors: Option<usize>,
    model: &str,
    toxicity_types: &[&str],
) -> Result<SweepCurve> {
    let points = feature_points(table, embeddings, space)?;
    let mut cfg = OutlierConfig::new(space);
    cfg.n_neighbors = n_neighbors;
    let lof = run_lof(table.ids(), &points, &cfg)?;
    sweep_scores(table, &lof, schedule, model, toxicity_types)
}

impl SweepCurve {
    /// `(group_size, wmse)` pairs with equal sizes averaged.
    pub fn knots(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64, usize)> = Vec::new();
        for p in &self.points {
            let x = p.group_size as f64;
            match out.last_mut() {
                Some(last) if last.0 == x => {
                    last.1 += p.wmse.value;
                    last.2 += 1;
                }
                _ => out.push((x, p.wmse.value, 1)),
            }
        }
        out.into_iter().map(|(x, s, c)| (x, s / c as f64)).collect()
    }

    /// `contamination,group_size,wmse`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["contamination", "group_size", "wmse"])?;
        for p in &self.points {
            w.write_record([
                p.contamination.to_string(),
                p.group_size.to_string(),
                p.wmse.value.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<sweep csv>", e))?;
        Ok(())
    }
}

/// Piecewise-linear interpolation; `None` outside the knot span or with
/// fewer than two knots.
pub fn interpolate(knots: &[(f64, f64)], x: f64) -> Option<f64> {
    if knots.len() < 2 || x < knots[0].0 || x > knots[knots.len() - 1].0 {
        return None;
    }
    let i = knots.partition_point(|k| k.0 <= x).clamp(1, knots.len() - 1);
    let ((x0, y0), (x1, y1)) = (knots[i - 1], knots[i]);
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Below,
    Above,
    OutOfRange,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Below => "below",
            Verdict::Above => "above",
            Verdict::OutOfRange => "out-of-range",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupVerdict {
    pub group: String,
    pub size: usize,
    pub wmse: f64,
    pub curve_value: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveComparison {
    pub below: usize,
    pub above: usize,
    pub out_of_range: usize,
    pub verdicts: Vec<GroupVerdict>,
}

/// A group is below the curve iff its WMSE is strictly less than the curve
/// interpolated at its size.
pub fn groups_below_curve(curve: &SweepCurve, groups: &[WmseResult]) -> CurveComparison {
    let knots = curve.knots();
    let verdicts: Vec<GroupVerdict> = groups
        .iter()
        .map(|g| {
            let curve_value = interpolate(&knots, g.group_size as f64);
            let verdict = match curve_value {
                None => Verdict::OutOfRange,
                Some(v) if g.value < v => Verdict::Below,
                Some(_) => Verdict::Above,
            };
            GroupVerdict {
                group: g.group.clone(),
                size: g.group_size,
                wmse: g.value,
                curve_value,
                verdict,
            }
        })
        .collect();
    let count = |v: Verdict| verdicts.iter().filter(|g| g.verdict == v).count();
    CurveComparison {
        below: count(Verdict::Below),
        above: count(Verdict::Above),
        out_of_range: count(Verdict::OutOfRange),
        verdicts,
    }
}

impl CurveComparison {
    /// `group,size,wmse,curve_value,verdict`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["group", "size", "wmse", "curve_value", "verdict"])?;
        for g in &self.verdicts {
            w.write_record([
                g.group.clone(),
                g.size.to_string(),
                g.wmse.to_string(),
                g.curve_value.map(|v| v.to_string()).unwrap_or_default(),
                g.verdict.as_str().to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<verdict csv>", e))?;
        Ok(())
    }
}
