use std::collections::{BTreeMap, BTreeSet};

use crate::data::schema::{validate_channels, AttributeChannel, ChannelKind};
use crate::data::{binarize, disagreement};
use crate::error::{Error, Result};

/// A toxicity or demographic annotation column.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationColumn {
    pub name: String,
    pub kind: ChannelKind,
    pub values: Vec<f64>,
    /// Filled in by [`DatasetTable::binarize`].
    pub binary: Option<Vec<bool>>,
    /// Filled in by [`DatasetTable::compute_disagreement`].
    pub disagreement: Option<Vec<f64>>,
}

impl AnnotationColumn {
    pub fn new(name: impl Into<String>, kind: ChannelKind, values: Vec<f64>) -> Self {
        AnnotationColumn {
            name: name.into(),
            kind,
            values,
            binary: None,
            disagreement: None,
        }
    }

    /// Binary labels; panics if the table has not been binarized.
    pub fn labels(&self) -> &[bool] {
        self.binary
            .as_deref()
            .unwrap_or_else(|| panic!("column `{}` has not been binarized", self.name))
    }
}

/// Model scores for one (model, target attribute) pair. Rows the model did
/// not score are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreColumn {
    pub name: String,
    pub model: String,
    pub target: String,
    pub values: Vec<Option<f64>>,
}

/// A single comment, materialised from the columnar table.
#[derive(Debug, Clone, PartialEq)]
pub struct CommentRecord {
    pub id: u64,
    pub text: String,
    pub values: BTreeMap<String, f64>,
    pub binary: BTreeMap<String, bool>,
    pub disagreement: BTreeMap<String, f64>,
}

/// Validated columnar dataset. Immutable once built; every pipeline step
/// returns a new table.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetTable {
    ids: Vec<u64>,
    texts: Vec<String>,
    toxicity: Vec<AnnotationColumn>,
    demographics: Vec<AnnotationColumn>,
    scores: Vec<ScoreColumn>,
}

impl DatasetTable {
    pub fn new(
        ids: Vec<u64>,
        texts: Vec<String>,
        toxicity: Vec<AnnotationColumn>,
        demographics: Vec<AnnotationColumn>,
        scores: Vec<ScoreColumn>,
    ) -> Result<Self> {
        let table = DatasetTable {
            ids,
            texts,
            toxicity,
            demographics,
            scores,
        };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<()> {
        let n = self.ids.len();
        if self.texts.len() != n {
            return Err(Error::Alignment {
                expected: n,
                found: self.texts.len(),
            });
        }
        if let Some(w) = self.ids.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Schema(format!(
                "ids must be strictly increasing (found {} before {})",
                w[0], w[1]
            )));
        }
        for c in self.toxicity.iter().chain(&self.demographics) {
            if c.values.len() != n {
                return Err(Error::Alignment {
                    expected: n,
                    found: c.values.len(),
                });
            }
            for (row, &v) in c.values.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Domain {
                        row: row + 1,
                        column: c.name.clone(),
                        value: v,
                    });
                }
            }
        }
        for c in &self.toxicity {
            if c.kind != ChannelKind::ToxicityAnnotation {
                return Err(Error::Schema(format!("`{}` is not a toxicity column", c.name)));
            }
        }
        for c in &self.demographics {
            if c.kind != ChannelKind::DemographicAnnotation {
                return Err(Error::Schema(format!("`{}` is not a demographic column", c.name)));
            }
        }
        for s in &self.scores {
            if s.values.len() != n {
                return Err(Error::Alignment {
                    expected: n,
                    found: s.values.len(),
                });
            }
            for (row, v) in s.values.iter().enumerate() {
                if let Some(v) = *v {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::Domain {
                            row: row + 1,
                            column: s.name.clone(),
                            value: v,
                        });
                    }
                }
            }
        }
        validate_channels(&self.schema())
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn texts(&self) -> &[String] {
        &self.texts
    }

    pub fn toxicity_columns(&self) -> &[AnnotationColumn] {
        &self.toxicity
    }

    pub fn demographic_columns(&self) -> &[AnnotationColumn] {
        &self.demographics
    }

    pub fn score_columns(&self) -> &[ScoreColumn] {
        &self.scores
    }

    pub fn demographic_names(&self) -> Vec<&str> {
        self.demographics.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn toxicity_names(&self) -> Vec<&str> {
        self.toxicity.iter().map(|c| c.name.as_str()).collect()
    }

    /// Distinct model ids, in first-appearance order.
    pub fn model_ids(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for s in &self.scores {
            if !out.contains(&s.model.as_str()) {
                out.push(&s.model);
            }
        }
        out
    }

    pub fn schema(&self) -> Vec<AttributeChannel> {
        let mut out: Vec<AttributeChannel> = self
            .toxicity
            .iter()
            .chain(&self.demographics)
            .map(|c| AttributeChannel::annotation(&c.name, c.kind))
            .collect();
        out.extend(
            self.scores
                .iter()
                .map(|s| AttributeChannel::model_score(&s.name, &s.model, &s.target)),
        );
        out
    }

    pub fn toxicity(&self, name: &str) -> Option<&AnnotationColumn> {
        self.toxicity.iter().find(|c| c.name == name)
    }

    pub fn demographic(&self, name: &str) -> Option<&AnnotationColumn> {
        self.demographics.iter().find(|c| c.name == name)
    }

    pub fn annotation(&self, name: &str) -> Option<&AnnotationColumn> {
        self.toxicity(name).or_else(|| self.demographic(name))
    }

    pub fn score(&self, model: &str, target: &str) -> Option<&ScoreColumn> {
        self.scores.iter().find(|s| s.model == model && s.target == target)
    }

    pub fn is_binarized(&self) -> bool {
        self.toxicity
            .iter()
            .chain(&self.demographics)
            .all(|c| c.binary.is_some())
    }

    pub fn has_disagreement(&self) -> bool {
        self.toxicity
            .iter()
            .chain(&self.demographics)
            .all(|c| c.disagreement.is_some())
    }

    /// Adds binary labels to every annotation column. Idempotent.
    pub fn binarize(&self) -> DatasetTable {
        let mut out = self.clone();
        for c in out.toxicity.iter_mut().chain(out.demographics.iter_mut()) {
            c.binary = Some(c.values.iter().map(|&v| binarize(v)).collect());
        }
        out
    }

    /// Adds `p(1-p)` disagreement values to every annotation column.
    pub fn compute_disagreement(&self) -> DatasetTable {
        let mut out = self.clone();
        for c in out.toxicity.iter_mut().chain(out.demographics.iter_mut()) {
            c.disagreement = Some(c.values.iter().map(|&v| disagreement(v).0).collect());
        }
        out
    }

    /// Binarization followed by disagreement.
    pub fn preprocess(&self) -> DatasetTable {
        self.binarize().compute_disagreement()
    }

    pub fn record(&self, row: usize) -> CommentRecord {
        let mut rec = CommentRecord {
            id: self.ids[row],
            text: self.texts[row].clone(),
            values: BTreeMap::new(),
            binary: BTreeMap::new(),
            disagreement: BTreeMap::new(),
        };
        for c in self.toxicity.iter().chain(&self.demographics) {
            rec.values.insert(c.name.clone(), c.values[row]);
            if let Some(b) = &c.binary {
                rec.binary.insert(c.name.clone(), b[row]);
            }
            if let Some(d) = &c.disagreement {
                rec.disagreement.insert(c.name.clone(), d[row]);
            }
        }
        for s in &self.scores {
            if let Some(v) = s.values[row] {
                rec.values.insert(s.name.clone(), v);
                rec.binary.insert(s.name.clone(), binarize(v));
            }
        }
        rec
    }

    pub fn row_of_id(&self, id: u64) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    /// Decimal demographic values of one row, in `demographic_names` order.
    pub fn demographic_vector(&self, row: usize) -> Vec<f64> {
        self.demographics.iter().map(|c| c.values[row]).collect()
    }

    /// Disagreement values of one row: toxicity channels first, then
    /// demographics. Requires [`compute_disagreement`](Self::compute_disagreement).
    pub fn disagreement_vector(&self, row: usize) -> Result<Vec<f64>> {
        self.toxicity
            .iter()
            .chain(&self.demographics)
            .map(|c| {
                c.disagreement
                    .as_ref()
                    .map(|d| d[row])
                    .ok_or_else(|| Error::Config("disagreement has not been computed".to_string()))
            })
            .collect()
    }

    /// Number of positive binary demographic labels per row.
    pub fn identity_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_rows()];
        for c in &self.demographics {
            for (n, &b) in counts.iter_mut().zip(c.labels()) {
                *n += b as usize;
            }
        }
        counts
    }

    /// Restricts the table to the given rows (ascending row indices).
    pub fn select_rows(&self, rows: &[usize]) -> DatasetTable {
        fn pick<T: Clone>(v: &[T], rows: &[usize]) -> Vec<T> {
            rows.iter().map(|&r| v[r].clone()).collect()
        }
        let annot = |c: &AnnotationColumn| AnnotationColumn {
            name: c.name.clone(),
            kind: c.kind,
            values: pick(&c.values, rows),
            binary: c.binary.as_ref().map(|b| pick(b, rows)),
            disagreement: c.disagreement.as_ref().map(|d| pick(d, rows)),
        };
        DatasetTable {
            ids: pick(&self.ids, rows),
            texts: pick(&self.texts, rows),
            toxicity: self.toxicity.iter().map(annot).collect(),
            demographics: self.demographics.iter().map(annot).collect(),
            scores: self
                .scores
                .iter()
                .map(|s| ScoreColumn {
                    name: s.name.clone(),
                    model: s.model.clone(),
                    target: s.target.clone(),
                    values: pick(&s.values, rows),
                })
                .collect(),
        }
    }

    /// Adds score columns, replacing any existing column with the same name.
    pub fn with_scores(&self, columns: Vec<ScoreColumn>) -> Result<DatasetTable> {
        let mut out = self.clone();
        for col in columns {
            if let Some(existing) = out.scores.iter_mut().find(|s| s.name == col.name) {
                *existing = col;
            } else {
                out.scores.push(col);
            }
        }
        out.validate()?;
        Ok(out)
    }

    /// Drops rows whose text repeats an earlier (lower-id) row.
    pub fn dedup_text(&self) -> DatasetTable {
        let mut seen = BTreeSet::new();
        let keep: Vec<usize> = (0..self.n_rows())
            .filter(|&r| seen.insert(self.texts[r].as_str()))
            .collect();
        self.select_rows(&keep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DatasetTable {
        DatasetTable::new(
            vec![1, 2, 3],
            vec!["a".into(), "b".into(), "a".into()],
            vec![AnnotationColumn::new(
                "toxicity",
                ChannelKind::ToxicityAnnotation,
                vec![0.0, 0.5, 1.0],
            )],
            vec![
                AnnotationColumn::new("female", ChannelKind::DemographicAnnotation, vec![1.0, 0.0, 0.0]),
                AnnotationColumn::new("black", ChannelKind::DemographicAnnotation, vec![0.6, 0.0, 1.0]),
            ],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn ids_must_increase() {
        let err = DatasetTable::new(vec![2, 1], vec!["".into(), "".into()], vec![], vec![], vec![]);
        assert!(matches!(err, Err(Error::Schema(_))));
    }

    #[test]
    fn demographic_vector_projects_in_order() {
        let t = small();
        assert_eq!(t.demographic_vector(0), vec![1.0, 0.6]);
        assert_eq!(t.demographic_vector(1), vec![0.0, 0.0]);
    }

    #[test]
    fn disagreement_vector_needs_preprocessing() {
        let t = small();
        assert!(t.disagreement_vector(0).is_err());
        let t = t.preprocess();
        assert_eq!(t.disagreement_vector(1).unwrap(), vec![0.25, 0.0, 0.0]);
        assert_eq!(t.disagreement_vector(2).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn record_view_is_consistent() {
        let t = small().preprocess();
        let r = t.record(0);
        assert_eq!(r.id, 1);
        for (k, &v) in &r.values {
            assert_eq!(r.binary[k], v >= 0.5);
            assert!((r.disagreement[k] - v * (1.0 - v)).abs() <= 1e-12);
        }
    }

    #[test]
    fn binarize_is_idempotent() {
        let t = small().binarize();
        assert_eq!(t.binarize(), t);
    }

    #[test]
    fn dedup_text_keeps_first() {
        let t = small().dedup_text();
        assert_eq!(t.ids(), &[1, 2]);
    }

    #[test]
    fn identity_counts_sum_binary_labels() {
        let t = small().binarize();
        assert_eq!(t.identity_counts(), vec![2, 0, 1]);
    }
}
