//! Pipeline configuration, read from TOML.
//!
//! ```toml
//! seed = 42
//! output_dir = "out"
//!
//! [input]
//! points = "county.csv"          # relative paths resolve against the config file
//! # polygons = "tracts.geojson"  # required for queen contiguity
//! # polygon_id = "id"
//! id = "id"
//! x = "x"
//! y = "y"
//! response = "wealth"
//! predictors = ["income", "residence_years"]
//!
//! [weights]
//! method = "knn"                 # knn | queen | hybrid
//! k = 6
//!
//! [kernel]
//! family = "bisquare"            # bisquare | gaussian
//! mode = "adaptive"              # adaptive | fixed
//!
//! [moran]
//! permutations = 999
//! alternative = "greater"        # greater | less | two-sided
//!
//! [mgwr]
//! standardize = true
//! lag = true
//! soc_tolerance = 1e-5
//! max_iterations = 200
//! exact_hat_max_n = 5000
//! alpha = 0.05
//! residual_permutations = 999
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autocorr::Alternative;
use crate::error::{Error, Result};
use crate::io::CsvSchema;
use crate::local::KernelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub points: PathBuf,
    #[serde(default)]
    pub polygons: Option<PathBuf>,
    #[serde(default = "default_id")]
    pub polygon_id: String,
    #[serde(default = "default_id")]
    pub id: String,
    #[serde(default = "default_x")]
    pub x: String,
    #[serde(default = "default_y")]
    pub y: String,
    pub response: String,
    pub predictors: Vec<String>,
}

fn default_id() -> String {
    "id".into()
}
fn default_x() -> String {
    "x".into()
}
fn default_y() -> String {
    "y".into()
}

impl InputConfig {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            id: self.id.clone(),
            x: self.x.clone(),
            y: self.y.clone(),
            response: self.response.clone(),
            predictors: self.predictors.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightsMethod {
    Knn,
    Queen,
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSpec {
    pub method: WeightsMethod,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_k() -> usize {
    6
}

impl Default for WeightsSpec {
    fn default() -> Self {
        Self {
            method: WeightsMethod::Knn,
            k: default_k(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoranOptions {
    pub permutations: usize,
    pub alternative: Alternative,
}

impl Default for MoranOptions {
    fn default() -> Self {
        Self {
            permutations: 999,
            alternative: Alternative::Greater,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MgwrOptions {
    pub standardize: bool,
    pub lag: bool,
    pub soc_tolerance: f64,
    pub max_iterations: usize,
    pub exact_hat_max_n: usize,
    pub alpha: f64,
    pub residual_permutations: usize,
    pub bandwidths: Option<Vec<f64>>,
}

impl Default for MgwrOptions {
    fn default() -> Self {
        Self {
            standardize: true,
            lag: true,
            soc_tolerance: 1e-5,
            max_iterations: 200,
            exact_hat_max_n: 5_000,
            alpha: 0.05,
            residual_permutations: 999,
            bandwidths: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub weights: WeightsSpec,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub moran: MoranOptions,
    #[serde(default)]
    pub mgwr: MgwrOptions,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parse a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.input.points);
        if let Some(p) = cfg.input.polygons.as_mut() {
            resolve(p);
        }
        resolve(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
