//! CSV ingestion of real-data samples.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Column names to read. `d` is only looked up when set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    pub y: String,
    pub x: String,
    pub d: Option<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            y: "y".into(),
            x: "x".into(),
            d: None,
        }
    }
}

/// One observation. `d` is already mapped from {0, 1} to {−1, +1}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub y: f64,
    pub x: f64,
    pub d: Option<f64>,
}

pub fn ingest_csv(path: &Path, schema: &Schema) -> Result<Vec<InputRecord>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    ingest_reader(file, schema)
}

pub fn ingest_reader<R: Read>(reader: R, schema: &Schema) -> Result<Vec<InputRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| CliError::Io(e.to_string()))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::MissingColumn(name.to_string()))
    };
    let iy = column(&schema.y)?;
    let ix = column(&schema.x)?;
    let id = schema.d.as_deref().map(column).transpose()?;

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| CliError::ParseError { row, message: e.to_string() })?;
        let value = |j: usize, name: &str| -> Result<f64> {
            let raw = rec.get(j).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| CliError::ParseError {
                row,
                message: format!("`{name}` is not a number: {raw:?}"),
            })?;
            if !v.is_finite() {
                return Err(CliError::ParseError {
                    row,
                    message: format!("`{name}` is not finite"),
                });
            }
            Ok(v)
        };
        let y = value(iy, &schema.y)?;
        let x = value(ix, &schema.x)?;
        let d = match (id, schema.d.as_deref()) {
            (Some(j), Some(name)) => Some(match value(j, name)? {
                0.0 => -1.0,
                1.0 => 1.0,
                v => {
                    return Err(CliError::ParseError {
                        row,
                        message: format!("`{name}` must be 0 or 1, got {v}"),
                    })
                }
            }),
            _ => None,
        };
        out.push(InputRecord { y, x, d });
    }
    if out.is_empty() {
        return Err(CliError::EmptyInput);
    }
    Ok(out)
}

/// Keeps records with `xmin < x < xmax`; missing bounds are open.
pub fn filter_range(records: Vec<InputRecord>, xmin: Option<f64>, xmax: Option<f64>) -> Vec<InputRecord> {
    records
        .into_iter()
        .filter(|r| xmin.is_none_or(|lo| r.x > lo) && xmax.is_none_or(|hi| r.x < hi))
        .collect()
}
