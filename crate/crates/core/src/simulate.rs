//! Synthetic grids, known coefficient surfaces and spatial-lag samples.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autocorr::stream_rng;
use crate::data::{Column, Dataset, PointSet};
use crate::error::{Error, Result};
use crate::weights::{solve_sar, PolygonSet, SpatialWeights, Standardization};

/// `side x side` unit grid; id `r * side + c` sits at `(c, r)`.
pub fn generate_grid(side: usize) -> Result<PointSet> {
    if side < 2 {
        return Err(Error::InvalidArgument(format!("grid side {side} must be at least 2")));
    }
    let coords = (0..side * side)
        .map(|id| [(id % side) as f64, (id / side) as f64])
        .collect();
    Ok(PointSet::from_coords(coords))
}

/// Unit square cells centred on the points of [`generate_grid`].
pub fn grid_cells(side: usize) -> Result<PolygonSet> {
    let pts = generate_grid(side)?;
    let rings = pts
        .coords
        .iter()
        .map(|&[x, y]| {
            vec![vec![
                [x - 0.5, y - 0.5],
                [x + 0.5, y - 0.5],
                [x + 0.5, y + 0.5],
                [x - 0.5, y + 0.5],
            ]]
        })
        .collect();
    PolygonSet::new(pts.ids, rings)
}

/// A deterministic coefficient surface over planar coordinates `(u, v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SurfaceSpec {
    Constant {
        level: f64,
    },
    /// `level + slope_u u + slope_v v`
    LinearGradient {
        level: f64,
        slope_u: f64,
        slope_v: f64,
    },
    /// `base + amplitude exp(-|p - center|^2 / (2 width^2))`
    GaussianBump {
        center: [f64; 2],
        amplitude: f64,
        width: f64,
        #[serde(default)]
        base: f64,
    },
    /// `inside` for `u < cut`, `outside` otherwise.
    Step {
        cut: f64,
        inside: f64,
        outside: f64,
    },
}

impl SurfaceSpec {
    pub fn constant_fixture() -> Self {
        SurfaceSpec::Constant { level: 3.0 }
    }

    /// Rises from 1 at (0, 0) to 5 at (24, 24).
    pub fn gradient_fixture() -> Self {
        SurfaceSpec::LinearGradient {
            level: 1.0,
            slope_u: 1.0 / 12.0,
            slope_v: 1.0 / 12.0,
        }
    }

    /// Peak 5 at (12, 12) with width 4.
    pub fn bump_fixture() -> Self {
        SurfaceSpec::GaussianBump {
            center: [12.0, 12.0],
            amplitude: 5.0,
            width: 4.0,
            base: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SurfaceSpec::GaussianBump { width, .. } if !(*width > 0.0) => {
                Err(Error::InvalidArgument(format!("bump width {width} must be positive")))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, u: f64, v: f64) -> f64 {
        match *self {
            SurfaceSpec::Constant { level } => level,
            SurfaceSpec::LinearGradient {
                level,
                slope_u,
                slope_v,
            } => level + slope_u * u + slope_v * v,
            SurfaceSpec::GaussianBump {
                center,
                amplitude,
                width,
                base,
            } => {
                let d2 = (u - center[0]).powi(2) + (v - center[1]).powi(2);
                base + amplitude * (-d2 / (2.0 * width * width)).exp()
            }
            SurfaceSpec::Step {
                cut,
                inside,
                outside,
            } => {
                if u < cut {
                    inside
                } else {
                    outside
                }
            }
        }
    }
}

pub fn evaluate_surface(spec: &SurfaceSpec, points: &PointSet) -> Result<Vec<f64>> {
    spec.validate()?;
    Ok(points.coords.iter().map(|&[u, v]| spec.value(u, v)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub side: usize,
    /// Intercept surface first, then one per predictor.
    pub surfaces: Vec<SurfaceSpec>,
    pub noise_sd: f64,
    #[serde(default)]
    pub rho: f64,
    pub seed: u64,
}

impl SimConfig {
    /// The 25 x 25 constant / gradient / bump fixture with unit noise.
    pub fn fixture(seed: u64) -> Self {
        Self {
            side: 25,
            surfaces: vec![
                SurfaceSpec::constant_fixture(),
                SurfaceSpec::gradient_fixture(),
                SurfaceSpec::bump_fixture(),
            ],
            noise_sd: 1.0,
            rho: 0.0,
            seed,
        }
    }

    pub fn predictor_names(&self) -> Vec<String> {
        (1..self.surfaces.len()).map(|k| format!("x{k}")).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.surfaces.is_empty() {
            return Err(Error::InvalidArgument("at least an intercept surface is required".into()));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::InvalidArgument(format!("noise sd {}", self.noise_sd)));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::UnstableRho(self.rho));
        }
        self.surfaces.iter().try_for_each(SurfaceSpec::validate)
    }
}

/// True values behind a simulated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub config: SimConfig,
    /// Term names, intercept first.
    pub names: Vec<String>,
    /// Coefficient values per term at each location.
    pub surfaces: Vec<Vec<f64>>,
    pub rho: f64,
    /// `sum_k beta_k x_k` before noise and spatial feedback.
    pub additive: Vec<f64>,
    pub noise: Vec<f64>,
}

impl TruthRecord {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}

fn normals(seed: u64, stream: u64, n: usize, scale: f64) -> Vec<f64> {
    let mut rng = stream_rng(seed, stream);
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Draw predictors and a response `y = (I - rho W)^-1 (sum_k beta_k x_k + e)`.
///
/// Predictor `k` uses random stream `k` of the seed and the noise uses stream 0,
/// so adding a predictor leaves the others unchanged.
pub fn generate_sample(cfg: &SimConfig, w: &SpatialWeights) -> Result<(Dataset, TruthRecord)> {
    cfg.validate()?;
    let points = generate_grid(cfg.side)?;
    let n = points.len();
    if w.n() != n {
        return Err(Error::LengthMismatch {
            what: "weights".into(),
            got: w.n(),
            expected: n,
        });
    }
    if cfg.rho != 0.0 && w.standardization() != Standardization::RowStandardized {
        return Err(Error::NotRowStandardized);
    }
    let surfaces: Vec<Vec<f64>> = cfg
        .surfaces
        .iter()
        .map(|s| evaluate_surface(s, &points))
        .collect::<Result<_>>()?;
    let names = cfg.predictor_names();
    let predictors: Vec<Column> = names
        .iter()
        .enumerate()
        .map(|(k, name)| Column::new(name.clone(), normals(cfg.seed, k as u64 + 1, n, 1.0)))
        .collect();
    let additive: Vec<f64> = (0..n)
        .map(|i| {
            surfaces[0][i]
                + predictors
                    .iter()
                    .zip(&surfaces[1..])
                    .map(|(x, b)| x.values[i] * b[i])
                    .sum::<f64>()
        })
        .collect();
    let noise = normals(cfg.seed, 0, n, cfg.noise_sd);
    let rhs: Vec<f64> = additive.iter().zip(&noise).map(|(a, e)| a + e).collect();
    let y = solve_sar(w, cfg.rho, &rhs)?;
    let ds = Dataset::new(points, Column::new("y", y), predictors)?;
    let mut all_names = vec![crate::data::INTERCEPT.to_string()];
    all_names.extend(names);
    let truth = TruthRecord {
        config: cfg.clone(),
        names: all_names,
        surfaces,
        rho: cfg.rho,
        additive,
        noise,
    };
    Ok((ds, truth))
}

/// Write `id,x,y,<response>,<predictors...>` in the schema the CSV loader reads.
///
/// Coordinates are named `x` and `y` unless a column already uses those names,
/// in which case `coord_x` and `coord_y` are used.
pub fn write_dataset_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    let (cx, cy) = coordinate_names(ds);
    let mut header = vec!["id".to_string(), cx, cy, ds.response.name.clone()];
    header.extend(ds.predictor_names());
    wtr.write_record(&header)?;
    for i in 0..ds.len() {
        let mut rec = vec![
            ds.points.ids[i].clone(),
            ds.points.coords[i][0].to_string(),
            ds.points.coords[i][1].to_string(),
            ds.response.values[i].to_string(),
        ];
        rec.extend(ds.predictors.iter().map(|c| c.values[i].to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Coordinate column names used by [`write_dataset_csv`].
pub fn coordinate_names(ds: &Dataset) -> (String, String) {
    let taken = |s: &str| ds.response.name == s || ds.predictors.iter().any(|c| c.name == s);
    if taken("x") || taken("y") {
        ("coord_x".into(), "coord_y".into())
    } else {
        ("x".into(), "y".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{knn_weights, row_standardize};

    #[test]
    fn grid_layout() {
        let g = generate_grid(2).unwrap();
        assert_eq!(g.coords, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        assert_eq!(generate_grid(25).unwrap().len(), 625);
        assert!(generate_grid(1).is_err());
    }

    #[test]
    fn fixtures() {
        assert_eq!(SurfaceSpec::constant_fixture().value(7.0, 3.0), 3.0);
        let g = SurfaceSpec::gradient_fixture();
        assert!((g.value(0.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((g.value(24.0, 24.0) - 5.0).abs() < 1e-12);
        assert_eq!(SurfaceSpec::bump_fixture().value(12.0, 12.0), 5.0);
        let bad = SurfaceSpec::GaussianBump {
            center: [0.0, 0.0],
            amplitude: 1.0,
            width: 0.0,
            base: 0.0,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn noiseless_sample_is_additive() {
        let mut cfg = SimConfig::fixture(3);
        cfg.side = 6;
        cfg.noise_sd = 0.0;
        let w = row_standardize(&knn_weights(&generate_grid(6).unwrap(), 4).unwrap());
        let (ds, truth) = generate_sample(&cfg, &w).unwrap();
        for i in 0..ds.len() {
            assert!((ds.response.values[i] - truth.additive[i]).abs() < 1e-12);
        }
        let (again, _) = generate_sample(&cfg, &w).unwrap();
        assert_eq!(ds, again);
    }

    #[test]
    fn unstable_rho_rejected() {
        let mut cfg = SimConfig::fixture(1);
        cfg.side = 4;
        cfg.rho = 1.0;
        let w = row_standardize(&knn_weights(&generate_grid(4).unwrap(), 4).unwrap());
        assert!(matches!(generate_sample(&cfg, &w), Err(Error::UnstableRho(_))));
    }
}
