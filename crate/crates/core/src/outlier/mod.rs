//! Outlier detection over the text, demographic and disagreement spaces.
//!
//! Scores are negated LOF values, so thresholds come out negative and lower
//! is more anomalous. Flagging is exact-count: `floor(c * n)` records, ties
//! broken by ascending id.

mod lof;
mod points;
mod threshold;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::DatasetTable;
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};

pub use lof::{k_distances, knn, local_outlier_factors, lof_scores, Neighborhood, LOF_EPSILON};
pub use points::{euclidean, PointSet};
pub use threshold::{
    check_contamination, flag_lowest, flagged_count, outlier_order, threshold_by_contamination, Flagging,
};

pub const DEFAULT_CONTAMINATION: f64 = 0.05;
pub const MAX_DEFAULT_NEIGHBORS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Text,
    Demographic,
    Disagreement,
}

impl Space {
    pub const ALL: [Space; 3] = [Space::Demographic, Space::Text, Space::Disagreement];

    pub fn as_str(self) -> &'static str {
        match self {
            Space::Text => "text",
            Space::Demographic => "demographic",
            Space::Disagreement => "disagreement",
        }
    }

    /// Name of the outlier group for this space, e.g. `demographic_outliers`.
    pub fn group_name(self) -> String {
        format!("{}_outliers", self.as_str())
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Space {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Space::Text),
            "demographic" => Ok(Space::Demographic),
            "disagreement" => Ok(Space::Disagreement),
            other => Err(Error::Config(format!("unknown outlier space `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierConfig {
    pub space: Space,
    /// `None` selects [`default_neighbors`].
    #[serde(default)]
    pub n_neighbors: Option<usize>,
    #[serde(default = "default_contamination")]
    pub contamination: f64,
    #[serde(default)]
    pub metric: Metric,
}

fn default_contamination() -> f64 {
    DEFAULT_CONTAMINATION
}

impl OutlierConfig {
    pub fn new(space: Space) -> Self {
        OutlierConfig {
            space,
            n_neighbors: None,
            contamination: DEFAULT_CONTAMINATION,
            metric: Metric::Euclidean,
        }
    }

    pub fn with_neighbors(mut self, k: usize) -> Self {
        self.n_neighbors = Some(k);
        self
    }

    pub fn with_contamination(mut self, c: f64) -> Self {
        self.contamination = c;
        self
    }

    pub fn resolve_neighbors(&self, n: usize) -> usize {
        self.n_neighbors.unwrap_or_else(|| default_neighbors(n))
    }
}

/// `min(4000, max(10, ceil(0.2 n)))`, capped at `n - 1`.
pub fn default_neighbors(n: usize) -> usize {
    let k = MAX_DEFAULT_NEIGHBORS.min(10.max((n as f64 * 0.2).ceil() as usize));
    k.min(n.saturating_sub(1)).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LofResult {
    pub space: Space,
    pub n_neighbors: usize,
    pub contamination: f64,
    pub ids: Vec<u64>,
    pub scores: Vec<f64>,
    pub flags: Vec<bool>,
    pub threshold: f64,
}

impl LofResult {
    pub fn n_flagged(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// Re-thresholds the same scores at another contamination level.
    pub fn rethreshold(&self, contamination: f64) -> Result<LofResult> {
        let f = threshold_by_contamination(&self.ids, &self.scores, contamination)?;
        Ok(LofResult {
            contamination,
            flags: f.flags,
            threshold: f.threshold,
            ..self.clone()
        })
    }
}

/// Ids, scores and flags of one space, as read back from CSV.
type SpaceColumns = (Vec<u64>, Vec<f64>, Vec<bool>);

/// Per-space LOF results for one table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutlierAssignment {
    results: BTreeMap<Space, LofResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceSummary {
    pub threshold: f64,
    pub n_neighbors: usize,
    pub contamination: f64,
    pub metric: Metric,
    pub n_records: usize,
    pub n_flagged: usize,
}

impl OutlierAssignment {
    pub fn insert(&mut self, result: LofResult) {
        self.results.insert(result.space, result);
    }

    pub fn get(&self, space: Space) -> Option<&LofResult> {
        self.results.get(&space)
    }

    pub fn result(&self, space: Space) -> Result<&LofResult> {
        self.get(space)
            .ok_or_else(|| Error::Config(format!("no {space} outliers were detected")))
    }

    pub fn flags(&self, space: Space) -> Result<&[bool]> {
        Ok(&self.result(space)?.flags)
    }

    pub fn spaces(&self) -> Vec<Space> {
        self.results.keys().copied().collect()
    }

    pub fn summary(&self) -> BTreeMap<Space, SpaceSummary> {
        self.results
            .iter()
            .map(|(&s, r)| {
                (
                    s,
                    SpaceSummary {
                        threshold: r.threshold,
                        n_neighbors: r.n_neighbors,
                        contamination: r.contamination,
                        metric: Metric::Euclidean,
                        n_records: r.ids.len(),
                        n_flagged: r.n_flagged(),
                    },
                )
            })
            .collect()
    }

    /// `id,space,score,flag` with scores at 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["id", "space", "score", "flag"])?;
        for r in self.results.values() {
            for i in 0..r.ids.len() {
                w.write_record([
                    r.ids[i].to_string(),
                    r.space.to_string(),
                    format!("{:.16e}", r.scores[i]),
                    (r.flags[i] as u8).to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<outlier csv>", e))?;
        Ok(())
    }

    /// Reads back [`write_csv`](Self::write_csv) output together with the
    /// JSON summary sidecar.
    pub fn read_csv<R: Read>(reader: R, summary: &BTreeMap<Space, SpaceSummary>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut cols: BTreeMap<Space, SpaceColumns> = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse_err = |column: &str, message: String| Error::Parse {
                row: i + 1,
                column: column.to_string(),
                message,
            };
            let id: u64 = rec[0].parse().map_err(|e| parse_err("id", format!("{e}")))?;
            let space: Space = rec[1].parse()?;
            let score: f64 = rec[2].parse().map_err(|e| parse_err("score", format!("{e}")))?;
            let flag = match &rec[3] {
                "1" => true,
                "0" => false,
                other => return Err(parse_err("flag", format!("`{other}` is not 0/1"))),
            };
            let e = cols.entry(space).or_default();
            e.0.push(id);
            e.1.push(score);
            e.2.push(flag);
        }
        let mut out = OutlierAssignment::default();
        for (space, (ids, scores, flags)) in cols {
            let s = summary
                .get(&space)
                .ok_or_else(|| Error::Format(format!("no summary for space {space}")))?;
            out.insert(LofResult {
                space,
                n_neighbors: s.n_neighbors,
                contamination: s.contamination,
                ids,
                scores,
                flags,
                threshold: s.threshold,
            });
        }
        Ok(out)
    }
}

/// Feature vectors of one space, one row per table row.
pub fn feature_points(table: &DatasetTable, embeddings: Option<&EmbeddingMatrix>, space: Space) -> Result<PointSet> {
    let n = table.n_rows();
    match space {
        Space::Text => {
            let e = embeddings.ok_or_else(|| Error::Config("text outliers need an embedding matrix".into()))?;
            if e.n_rows() != n {
                return Err(Error::Alignment {
                    expected: n,
                    found: e.n_rows(),
                });
            }
            PointSet::new(e.dim(), e.data().iter().map(|&v| v as f64).collect())
        }
        Space::Demographic => {
            let rows: Vec<Vec<f64>> = (0..n).map(|r| table.demographic_vector(r)).collect();
            PointSet::from_rows(&rows)
        }
        Space::Disagreement => {
            let rows: Vec<Vec<f64>> = (0..n).map(|r| table.disagreement_vector(r)).collect::<Result<_>>()?;
            PointSet::from_rows(&rows)
        }
    }
}

/// LOF plus thresholding on one point set.
pub fn run_lof(ids: &[u64], points: &PointSet, config: &OutlierConfig) -> Result<LofResult> {
    if ids.len() != points.len() {
        return Err(Error::Alignment {
            expected: ids.len(),
            found: points.len(),
        });
    }
    check_contamination(config.contamination)?;
    let n = points.len();
    if flagged_count(config.contamination, n) == 0 {
        return Err(Error::Config(format!(
            "contamination {} flags no records out of {n}",
            config.contamination
        )));
    }
    let k = config.resolve_neighbors(n);
    let scores = lof_scores(points, k)?;
    let f = threshold_by_contamination(ids, &scores, config.contamination)?;
    Ok(LofResult {
        space: config.space,
        n_neighbors: k,
        contamination: config.contamination,
        ids: ids.to_vec(),
        scores,
        flags: f.flags,
        threshold: f.threshold,
    })
}

/// Runs LOF for each configured space.
pub fn detect_outliers(
    table: &DatasetTable,
    embeddings: Option<&EmbeddingMatrix>,
    configs: &[OutlierConfig],
) -> Result<OutlierAssignment> {
    if let Some(e) = embeddings {
        if e.n_rows() != table.n_rows() {
            return Err(Error::Alignment {
                expected: table.n_rows(),
                found: e.n_rows(),
            });
        }
    }
    let mut out = OutlierAssignment::default();
    for cfg in configs {
        let points = feature_points(table, embeddings, cfg.space)?;
        log::info!(
            "LOF over {} space: {} points x {} dims",
            cfg.space,
            points.len(),
            points.dim()
        );
        out.insert(run_lof(table.ids(), &points, cfg)?);
    }
    Ok(out)
}
