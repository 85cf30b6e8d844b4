//! Three-column weights text: header `i_id,j_id,weight`, one link per line.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::weights::{SpatialWeights, Standardization};

const HEADER: [&str; 3] = ["i_id", "j_id", "weight"];

pub fn write_weights(w: &SpatialWeights, ids: &[String], path: &Path) -> Result<()> {
    if ids.len() != w.n() {
        return Err(Error::LengthMismatch {
            what: "ids".into(),
            got: ids.len(),
            expected: w.n(),
        });
    }
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(HEADER)?;
    for (i, row) in w.rows().enumerate() {
        for &(j, wij) in row {
            wtr.write_record([ids[i].as_str(), ids[j].as_str(), &wij.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Guess the standardization state from the stored values.
fn infer_standardization(rows: &[Vec<(usize, f64)>]) -> Standardization {
    if rows.iter().flatten().all(|&(_, w)| w == 1.0) {
        Standardization::Binary
    } else if rows
        .iter()
        .filter(|r| !r.is_empty())
        .all(|r| (r.iter().map(|&(_, w)| w).sum::<f64>() - 1.0).abs() <= 1e-12)
    {
        Standardization::RowStandardized
    } else {
        Standardization::RawKernel
    }
}

/// Read weights for observations `ids` (row order follows `ids`).
pub fn read_weights(path: &Path, ids: &[String]) -> Result<SpatialWeights> {
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header `{}`", HEADER.join(",")),
        });
    }
    let mut rows = vec![Vec::new(); ids.len()];
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let lookup = |s: &str| {
            index
                .get(s.trim())
                .copied()
                .ok_or_else(|| err(format!("unknown id `{s}`")))
        };
        let i = lookup(&rec[0])?;
        let j = lookup(&rec[1])?;
        let w: f64 = rec[2]
            .trim()
            .parse()
            .map_err(|_| err(format!("cannot parse weight `{}`", &rec[2])))?;
        rows[i].push((j, w));
    }
    let standardization = infer_standardization(&rows);
    SpatialWeights::from_neighbors(rows, standardization)
}
