use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::schema::{ChannelKind, SchemaConfig, ScoreColumnConfig};
use crate::data::table::{AnnotationColumn, DatasetTable, ScoreColumn};
use crate::error::{Error, Result};

/// Reads a CSV file whose headers are mapped by `config`.
///
/// Rows are returned sorted by id (file order when ids are already
/// increasing, or when no id column is configured and ids are `0..n`).
pub fn load_dataset(csv_path: &Path, config: &SchemaConfig) -> Result<DatasetTable> {
    let file = File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    load_dataset_from_reader(file, config)
}

pub fn load_dataset_from_reader<R: Read>(reader: R, config: &SchemaConfig) -> Result<DatasetTable> {
    config.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };

    let id_idx = config.id_column.as_deref().map(find).transpose()?;
    let text_idx = find(&config.text_column)?;
    let tox_idx: Vec<usize> = config
        .toxicity_annotations
        .iter()
        .map(|n| find(n))
        .collect::<Result<_>>()?;
    let dem_idx: Vec<usize> = config
        .demographic_annotations
        .iter()
        .map(|n| find(n))
        .collect::<Result<_>>()?;
    let score_idx: Vec<usize> = config
        .model_scores
        .iter()
        .map(|s| find(&s.column))
        .collect::<Result<_>>()?;

    let mut ids = Vec::new();
    let mut texts = Vec::new();
    let mut tox: Vec<Vec<f64>> = vec![Vec::new(); tox_idx.len()];
    let mut dem: Vec<Vec<f64>> = vec![Vec::new(); dem_idx.len()];
    let mut scores: Vec<Vec<Option<f64>>> = vec![Vec::new(); score_idx.len()];

    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let id = match id_idx {
            Some(c) => {
                let raw = rec.get(c).unwrap_or("").trim();
                raw.parse::<u64>().map_err(|e| Error::Parse {
                    row,
                    column: headers[c].to_string(),
                    message: format!("`{raw}` is not an unsigned integer id ({e})"),
                })?
            }
            None => i as u64,
        };
        ids.push(id);
        texts.push(rec.get(text_idx).unwrap_or("").to_string());
        for (col, &c) in tox.iter_mut().zip(&tox_idx) {
            col.push(parse_unit(rec.get(c), row, &headers[c], false)?.unwrap());
        }
        for (col, &c) in dem.iter_mut().zip(&dem_idx) {
            col.push(parse_unit(rec.get(c), row, &headers[c], false)?.unwrap());
        }
        for (col, &c) in scores.iter_mut().zip(&score_idx) {
            col.push(parse_unit(rec.get(c), row, &headers[c], true)?);
        }
    }

    // Put rows in id order.
    let mut order: Vec<usize> = (0..ids.len()).collect();
    if ids.windows(2).any(|w| w[0] >= w[1]) {
        order.sort_by_key(|&r| ids[r]);
        if let Some(w) = order.windows(2).find(|w| ids[w[0]] == ids[w[1]]) {
            return Err(Error::Schema(format!(
                "duplicate id {} (rows {} and {})",
                ids[w[0]],
                w[0] + 1,
                w[1] + 1
            )));
        }
    }
    let reorder = |v: &[f64]| order.iter().map(|&r| v[r]).collect::<Vec<_>>();

    let toxicity = config
        .toxicity_annotations
        .iter()
        .zip(&tox)
        .map(|(n, v)| AnnotationColumn::new(n, ChannelKind::ToxicityAnnotation, reorder(v)))
        .collect();
    let demographics = config
        .demographic_annotations
        .iter()
        .zip(&dem)
        .map(|(n, v)| AnnotationColumn::new(n, ChannelKind::DemographicAnnotation, reorder(v)))
        .collect();
    let score_cols = config
        .model_scores
        .iter()
        .zip(&scores)
        .map(|(s, v)| ScoreColumn {
            name: s.column.clone(),
            model: s.model.clone(),
            target: s.target.clone(),
            values: order.iter().map(|&r| v[r]).collect(),
        })
        .collect();

    DatasetTable::new(
        order.iter().map(|&r| ids[r]).collect(),
        order.iter().map(|&r| texts[r].clone()).collect(),
        toxicity,
        demographics,
        score_cols,
    )
}

fn parse_unit(cell: Option<&str>, row: usize, column: &str, optional: bool) -> Result<Option<f64>> {
    let raw = cell.unwrap_or("").trim();
    if raw.is_empty() {
        if optional {
            return Ok(None);
        }
        return Err(Error::Parse {
            row,
            column: column.to_string(),
            message: "empty cell".to_string(),
        });
    }
    let v: f64 = raw.parse().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("`{raw}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            column: column.to_string(),
            message: format!("`{raw}` is not finite"),
        });
    }
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain {
            row,
            column: column.to_string(),
            value: v,
        });
    }
    Ok(Some(v))
}

impl DatasetTable {
    /// Schema config that reads back a file written by [`write_canonical_csv`].
    pub fn canonical_schema(&self) -> SchemaConfig {
        SchemaConfig {
            id_column: Some("id".into()),
            text_column: "text".into(),
            toxicity_annotations: self.toxicity_names().iter().map(|s| s.to_string()).collect(),
            demographic_annotations: self.demographic_names().iter().map(|s| s.to_string()).collect(),
            model_scores: self
                .score_columns()
                .iter()
                .map(|s| ScoreColumnConfig {
                    column: s.name.clone(),
                    model: s.model.clone(),
                    target: s.target.clone(),
                })
                .collect(),
        }
    }
}

/// Writes `id,text,<channels...>`. With `derived`, each annotation channel is
/// followed by its `_bin` and `_dis` columns when they have been computed.
/// Decimals use the shortest representation that parses back to the same
/// `f64`.
pub fn write_csv<W: Write>(table: &DatasetTable, writer: W, derived: bool) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let annotations: Vec<_> = table
        .toxicity_columns()
        .iter()
        .chain(table.demographic_columns())
        .collect();

    let mut header = vec!["id".to_string(), "text".to_string()];
    for c in &annotations {
        header.push(c.name.clone());
        if derived && c.binary.is_some() {
            header.push(format!("{}_bin", c.name));
        }
        if derived && c.disagreement.is_some() {
            header.push(format!("{}_dis", c.name));
        }
    }
    header.extend(table.score_columns().iter().map(|s| s.name.clone()));
    wtr.write_record(&header)?;

    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for row in 0..table.n_rows() {
        rec.clear();
        rec.push(table.ids()[row].to_string());
        rec.push(table.texts()[row].clone());
        for c in &annotations {
            rec.push(c.values[row].to_string());
            if derived {
                if let Some(b) = &c.binary {
                    rec.push(if b[row] { "1" } else { "0" }.to_string());
                }
                if let Some(d) = &c.disagreement {
                    rec.push(d[row].to_string());
                }
            }
        }
        for s in table.score_columns() {
            rec.push(s.values[row].map(|v| v.to_string()).unwrap_or_default());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Canonical dump with derived columns.
pub fn write_canonical_csv(table: &DatasetTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(table, std::io::BufWriter::new(file), true)
}
