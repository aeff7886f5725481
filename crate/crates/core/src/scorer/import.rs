use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::{DatasetTable, ScoreColumn};
use crate::error::{Error, Result};

/// Name of the score column a model gets for an attribute.
pub fn score_column_name(model: &str, attribute: &str) -> String {
    format!("{model}_{attribute}")
}

/// Joins a CSV of `id` plus one column per attribute onto the table as
/// score channels of `model`. Rows missing from the file, and empty cells,
/// become absent scores.
pub fn import_scores(table: &DatasetTable, csv_path: &Path, model: &str) -> Result<DatasetTable> {
    let f = File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    import_scores_from_reader(table, f, model)
}

pub fn import_scores_from_reader<R: Read>(table: &DatasetTable, reader: R, model: &str) -> Result<DatasetTable> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_col = headers
        .iter()
        .position(|h| h == "id")
        .ok_or_else(|| Error::Schema("score file has no `id` column".into()))?;
    let attrs: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != id_col)
        .map(|(i, h)| (i, h.to_string()))
        .collect();
    if attrs.is_empty() {
        return Err(Error::Schema("score file has no attribute columns".into()));
    }
    let mut values: Vec<Vec<Option<f64>>> = vec![vec![None; table.n_rows()]; attrs.len()];
    let mut seen = HashMap::new();
    let mut unknown = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let raw_id = rec.get(id_col).unwrap_or("").trim();
        let id: u64 = raw_id.parse().map_err(|_| Error::Parse {
            row,
            column: "id".into(),
            message: format!("`{raw_id}` is not an unsigned integer"),
        })?;
        if let Some(first) = seen.insert(id, row) {
            return Err(Error::Format(format!(
                "duplicate id {id} in score file (rows {first} and {row})"
            )));
        }
        let Some(r) = table.row_of_id(id) else {
            unknown += 1;
            continue;
        };
        for (slot, (col, name)) in attrs.iter().enumerate() {
            let cell = rec.get(*col).unwrap_or("").trim();
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: name.clone(),
                message: format!("`{cell}` is not a number"),
            })?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain {
                    row,
                    column: name.clone(),
                    value: v,
                });
            }
            values[slot][r] = Some(v);
        }
    }
    if unknown > 0 {
        log::warn!("{unknown} score rows reference ids absent from the dataset");
    }
    let columns = attrs
        .into_iter()
        .zip(values)
        .map(|((_, attr), values)| ScoreColumn {
            name: score_column_name(model, &attr),
            model: model.to_string(),
            target: attr,
            values,
        })
        .collect();
    table.with_scores(columns)
}

/// Writes `id` plus one column per scored attribute of `model`, at full
/// precision. Absent scores are empty cells.
pub fn export_scores<W: Write>(table: &DatasetTable, model: &str, writer: W) -> Result<()> {
    let cols: Vec<&ScoreColumn> = table.score_columns().iter().filter(|s| s.model == model).collect();
    if cols.is_empty() {
        return Err(Error::Config(format!("model `{model}` has no score columns")));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend(cols.iter().map(|c| c.target.clone()));
    w.write_record(&header)?;
    for (r, id) in table.ids().iter().enumerate() {
        let mut rec = vec![id.to_string()];
        rec.extend(
            cols.iter()
                .map(|c| c.values[r].map(|v| v.to_string()).unwrap_or_default()),
        );
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<score csv>", e))?;
    Ok(())
}
