use serde::{Deserialize, Serialize};

use crate::audit::groups::{enumerate_groups, BreakdownOptions, GroupKind, GroupSpec, SchemaName};
use crate::audit::metrics::{percentile_rank, wmse, WmseResult};
use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::outlier::OutlierAssignment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedGroup {
    pub group: String,
    pub kind: GroupKind,
    pub wmse: WmseResult,
    pub percentile: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegenerateEntry {
    pub group: String,
    pub reason: String,
}

/// WMSE of every group in a breakdown plus the outlier groups, each ranked
/// against the whole pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownResult {
    pub schema: SchemaName,
    pub model: String,
    pub groups: Vec<RankedGroup>,
    pub degenerate: Vec<DegenerateEntry>,
}

impl BreakdownResult {
    pub fn get(&self, group: &str) -> Option<&RankedGroup> {
        self.groups.iter().find(|g| g.group == group)
    }

    pub fn pool(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.wmse.value).collect()
    }
}

/// Scores one breakdown for one model. Groups whose WMSE is undefined (an
/// empty side or every term skipped) are left out of the pool and listed in
/// `degenerate`.
pub fn breakdown_wmse(
    table: &DatasetTable,
    assignment: &OutlierAssignment,
    schema: SchemaName,
    options: &BreakdownOptions,
    model: &str,
    toxicity_types: &[&str],
) -> Result<BreakdownResult> {
    if schema == SchemaName::Outlier {
        return Err(Error::Config(
            "the outlier groups are already part of every pool".into(),
        ));
    }
    let mut specs = enumerate_groups(table, schema.as_str(), options)?.groups;
    specs.extend(assignment.spaces().into_iter().map(GroupSpec::outlier));

    let mut scored = Vec::new();
    let mut degenerate = Vec::new();
    for spec in &specs {
        let membership = spec.resolve(table, Some(assignment))?;
        match wmse(table, &membership, &[model], toxicity_types) {
            Ok(w) => scored.push((spec.kind, w)),
            Err(e @ (Error::DegenerateGroup { .. } | Error::EmptyResult(_))) => {
                log::warn!("skipping group `{}`: {e}", spec.name);
                degenerate.push(DegenerateEntry {
                    group: spec.name.clone(),
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    let pool: Vec<f64> = scored.iter().map(|(_, w)| w.value).collect();
    let groups = scored
        .into_iter()
        .map(|(kind, w)| RankedGroup {
            group: w.group.clone(),
            kind,
            percentile: percentile_rank(w.value, &pool),
            wmse: w,
        })
        .collect();
    Ok(BreakdownResult {
        schema,
        model: model.to_string(),
        groups,
        degenerate,
    })
}
