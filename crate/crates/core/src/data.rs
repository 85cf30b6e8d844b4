//! Observation containers and the regression design matrix.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const INTERCEPT: &str = "(Intercept)";

/// Georeferenced observation locations in projected planar coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub ids: Vec<String>,
    pub coords: Vec<[f64; 2]>,
}

impl PointSet {
    pub fn new(ids: Vec<String>, coords: Vec<[f64; 2]>) -> Result<Self> {
        if ids.len() != coords.len() {
            return Err(Error::LengthMismatch {
                what: "coordinates".into(),
                got: coords.len(),
                expected: ids.len(),
            });
        }
        check_unique(&ids)?;
        Ok(Self { ids, coords })
    }

    /// Points with ids "0", "1", ...
    pub fn from_coords(coords: Vec<[f64; 2]>) -> Self {
        let ids = (0..coords.len()).map(|i| i.to_string()).collect();
        Self { ids, coords }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let [xi, yi] = self.coords[i];
        let [xj, yj] = self.coords[j];
        (xi - xj).hypot(yi - yj)
    }

    /// Diagonal of the bounding box.
    pub fn extent(&self) -> f64 {
        bbox_diagonal(self.coords.iter().copied())
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
            coords: rows.iter().map(|&r| self.coords[r]).collect(),
        }
    }
}

pub(crate) fn bbox_diagonal(pts: impl Iterator<Item = [f64; 2]>) -> f64 {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for [x, y] in pts {
        lo = [lo[0].min(x), lo[1].min(y)];
        hi = [hi[0].max(x), hi[1].max(y)];
    }
    if lo[0] > hi[0] {
        return 0.0;
    }
    (hi[0] - lo[0]).hypot(hi[1] - lo[1])
}

pub(crate) fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

/// A named numeric column.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }
}

/// Response and ordered predictors observed at each point.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: PointSet,
    pub response: Column,
    pub predictors: Vec<Column>,
}

/// Rows removed by [`validate_dataset`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub dropped_ids: Vec<String>,
}

impl Dataset {
    pub fn new(points: PointSet, response: Column, predictors: Vec<Column>) -> Result<Self> {
        let n = points.len();
        for col in std::iter::once(&response).chain(&predictors) {
            if col.values.len() != n {
                return Err(Error::LengthMismatch {
                    what: format!("column `{}`", col.name),
                    got: col.values.len(),
                    expected: n,
                });
            }
        }
        let mut names = HashSet::new();
        for p in &predictors {
            if !names.insert(p.name.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate predictor name `{}`",
                    p.name
                )));
            }
        }
        Ok(Self {
            points,
            response,
            predictors,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn predictor_names(&self) -> Vec<String> {
        self.predictors.iter().map(|c| c.name.clone()).collect()
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        let pick = |c: &Column| Column::new(c.name.clone(), rows.iter().map(|&r| c.values[r]).collect());
        Self {
            points: self.points.subset(rows),
            response: pick(&self.response),
            predictors: self.predictors.iter().map(pick).collect(),
        }
    }
}

/// Listwise deletion of rows with any non-finite value, then sanity checks.
pub fn validate_dataset(raw: &Dataset) -> Result<(Dataset, ValidationReport)> {
    check_unique(&raw.points.ids)?;
    let mut keep = Vec::with_capacity(raw.len());
    let mut report = ValidationReport::default();
    for i in 0..raw.len() {
        let [x, y] = raw.points.coords[i];
        let finite = x.is_finite()
            && y.is_finite()
            && raw.response.values[i].is_finite()
            && raw.predictors.iter().all(|c| c.values[i].is_finite());
        if finite {
            keep.push(i);
        } else {
            report.dropped_ids.push(raw.points.ids[i].clone());
        }
    }
    if keep.len() < 3 {
        return Err(Error::TooFewObservations {
            valid: keep.len(),
            required: 3,
        });
    }
    let ds = if report.dropped_ids.is_empty() {
        raw.clone()
    } else {
        raw.subset(&keep)
    };
    let (_, sd) = mean_sd(&ds.response.values);
    if sd == 0.0 {
        return Err(Error::ZeroVariance(ds.response.name.clone()));
    }
    Ok((ds, report))
}

/// Mean and population standard deviation (divisor n).
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Intercept plus predictor columns, with the response alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Term names, intercept first.
    pub names: Vec<String>,
    pub response_name: String,
    /// Per-term centring; 0 for the intercept and for unstandardized designs.
    pub means: Vec<f64>,
    /// Per-term scale; 1 for the intercept and for unstandardized designs.
    pub sds: Vec<f64>,
    pub standardized: bool,
}

impl DesignMatrix {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of columns including the intercept.
    pub fn n_terms(&self) -> usize {
        self.x.ncols()
    }

    /// Predictor count, excluding the intercept.
    pub fn n_predictors(&self) -> usize {
        self.x.ncols() - 1
    }

    /// Map coefficients estimated on standardized predictors back to raw units.
    ///
    /// `beta` is ordered like `names`. Works per location for local models too.
    pub fn destandardize(&self, beta: &[f64]) -> Vec<f64> {
        if !self.standardized {
            return beta.to_vec();
        }
        let mut out = beta.to_vec();
        let mut shift = 0.0;
        for k in 1..beta.len() {
            out[k] = beta[k] / self.sds[k];
            shift += out[k] * self.means[k];
        }
        out[0] = beta[0] - shift;
        out
    }
}

pub fn build_design(ds: &Dataset, standardize: bool) -> Result<DesignMatrix> {
    let n = ds.len();
    let p = ds.predictors.len();
    let mut x = DMatrix::from_element(n, p + 1, 1.0);
    let mut means = vec![0.0; p + 1];
    let mut sds = vec![1.0; p + 1];
    for (k, col) in ds.predictors.iter().enumerate() {
        let (mean, sd) = if standardize {
            let (m, s) = mean_sd(&col.values);
            if s == 0.0 {
                return Err(Error::ZeroVariance(col.name.clone()));
            }
            (m, s)
        } else {
            (0.0, 1.0)
        };
        means[k + 1] = mean;
        sds[k + 1] = sd;
        for (i, v) in col.values.iter().enumerate() {
            x[(i, k + 1)] = if standardize { (v - mean) / sd } else { *v };
        }
    }
    let mut names = Vec::with_capacity(p + 1);
    names.push(INTERCEPT.to_string());
    names.extend(ds.predictor_names());
    Ok(DesignMatrix {
        x,
        y: DVector::from_vec(ds.response.values.clone()),
        names,
        response_name: ds.response.name.clone(),
        means,
        sds,
        standardized: standardize,
    })
}
