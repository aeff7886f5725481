//! Who the outliers are: per-group outlier shares and identity counts.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::audit::{welch_normal_test, MeanComparison};
use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::outlier::{flagged_count, OutlierAssignment, Space};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionRow {
    pub group: String,
    pub n_members: usize,
    pub n_outliers: usize,
    /// `None` for an empty group.
    pub proportion: Option<f64>,
    pub baseline: f64,
}

fn labels(table: &DatasetTable) -> Result<Vec<(&str, &[bool])>> {
    table
        .demographic_columns()
        .iter()
        .map(|c| {
            c.binary
                .as_deref()
                .map(|b| (c.name.as_str(), b))
                .ok_or_else(|| Error::Config("composition needs binarized demographic labels".into()))
        })
        .collect()
}

/// Share of each demographic group flagged in `space`, largest first.
/// Empty groups sort last.
pub fn outlier_proportion_per_group(
    table: &DatasetTable,
    assignment: &OutlierAssignment,
    space: Space,
) -> Result<Vec<CompositionRow>> {
    let result = assignment.result(space)?;
    let n = table.n_rows();
    if result.flags.len() != n {
        return Err(Error::Alignment {
            expected: n,
            found: result.flags.len(),
        });
    }
    let baseline = flagged_count(result.contamination, n) as f64 / n as f64;
    let mut rows: Vec<CompositionRow> = labels(table)?
        .into_iter()
        .map(|(name, member)| {
            let n_members = member.iter().filter(|&&m| m).count();
            let n_outliers = member.iter().zip(&result.flags).filter(|&(&m, &f)| m && f).count();
            CompositionRow {
                group: name.to_string(),
                n_members,
                n_outliers,
                proportion: (n_members > 0).then(|| n_outliers as f64 / n_members as f64),
                baseline,
            }
        })
        .collect();
    rows.sort_by(|a, b| match (a.proportion, b.proportion) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCountComparison {
    pub space: Space,
    pub mean_in: f64,
    pub mean_out: f64,
    pub z: f64,
    pub p_value: f64,
    pub test: String,
}

/// Mean number of positive demographic labels on flagged vs unflagged rows,
/// compared with a two-sided Welch test under a normal approximation.
/// `None` when either side is empty.
pub fn mean_identity_count(
    table: &DatasetTable,
    assignment: &OutlierAssignment,
    space: Space,
) -> Result<Option<IdentityCountComparison>> {
    labels(table)?;
    let flags = assignment.flags(space)?;
    let counts = table.identity_counts();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (&c, &f) in counts.iter().zip(flags) {
        if f {
            a.push(c as f64);
        } else {
            b.push(c as f64);
        }
    }
    Ok(welch_normal_test(&a, &b).map(
        |MeanComparison {
             mean_a,
             mean_b,
             z,
             p_value,
         }| IdentityCountComparison {
            space,
            mean_in: mean_a,
            mean_out: mean_b,
            z,
            p_value,
            test: "welch-normal".into(),
        },
    ))
}

/// `group,n_members,n_outliers,proportion,baseline`; empty proportions are
/// written as an empty cell.
pub fn write_composition_csv<W: Write>(rows: &[CompositionRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["group", "n_members", "n_outliers", "proportion", "baseline"])?;
    for r in rows {
        w.write_record([
            r.group.clone(),
            r.n_members.to_string(),
            r.n_outliers.to_string(),
            r.proportion.map(|p| p.to_string()).unwrap_or_default(),
            r.baseline.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<composition csv>", e))?;
    Ok(())
}

/// Bar-chart data: `group,proportion,baseline`.
pub fn write_plot_data<W: Write>(rows: &[CompositionRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["group", "proportion", "baseline"])?;
    for r in rows {
        w.write_record([
            r.group.clone(),
            r.proportion.map(|p| p.to_string()).unwrap_or_default(),
            r.baseline.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<composition csv>", e))?;
    Ok(())
}
