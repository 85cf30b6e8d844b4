use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Column, Dataset, PointSet};
use crate::error::{Error, Result};

/// Column names of a point table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    pub id: String,
    pub x: String,
    pub y: String,
    pub response: String,
    pub predictors: Vec<String>,
}

/// Empty cells and `NA` become NaN (dropped later by validation); anything
/// else must parse as a plain number.
fn parse_cell(raw: &str) -> std::result::Result<f64, String> {
    let s = raw.trim();
    if s.is_empty() || s == "NA" {
        return Ok(f64::NAN);
    }
    s.parse::<f64>().map_err(|_| format!("cannot parse `{raw}` as a number"))
}

/// Read a header-first CSV of points with a response and predictor columns.
pub fn load_points_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let id_col = find(&schema.id)?;
    let numeric: Vec<usize> = [&schema.x, &schema.y, &schema.response]
        .into_iter()
        .chain(&schema.predictors)
        .map(|n| find(n))
        .collect::<Result<_>>()?;
    let mut ids = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); numeric.len()];
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let cell = |c: usize| {
            rec.get(c).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("missing field {}", c + 1),
            })
        };
        ids.push(cell(id_col)?.trim().to_string());
        for (slot, &c) in values.iter_mut().zip(&numeric) {
            let v = parse_cell(cell(c)?).map_err(|message| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("column `{}`: {message}", &headers[c]),
            })?;
            slot.push(v);
        }
    }
    let mut values = values.into_iter();
    let xs = values.next().unwrap_or_default();
    let ys = values.next().unwrap_or_default();
    let coords = xs.into_iter().zip(ys).map(|(x, y)| [x, y]).collect();
    let points = PointSet::new(ids, coords)?;
    let response = Column::new(schema.response.clone(), values.next().unwrap_or_default());
    let predictors = schema
        .predictors
        .iter()
        .zip(values)
        .map(|(n, v)| Column::new(n.clone(), v))
        .collect();
    Dataset::new(points, response, predictors)
}
