//! Load, weights, Moran's I, OLS, MGWR, diagnostics and exports in one run.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::autocorr::{global_morans_i, permutation_morans_i, VarianceAssumption};
use crate::data::{build_design, validate_dataset};
use crate::error::{Error, Result};
use crate::io::config::{PipelineConfig, WeightsMethod};
use crate::io::geojson::{export_surfaces_geojson, Geometry, SurfaceTable};
use crate::io::{load_points_csv, load_polygons_geojson, report};
use crate::local::Neighborhoods;
use crate::mgwr::{diagnostics_report, enp_and_inference, mgwr_fit, predict_surface, MgwrConfig};
use crate::ols::ols_fit;
use crate::weights::{
    hybrid_kernel_weights, knn_weights, queen_contiguity, row_standardize, weights_summary,
};

/// Files written by [`run_pipeline`], besides `manifest.json`.
pub const ARTIFACTS: [&str; 5] = [
    "moran_report.txt",
    "ols_report.txt",
    "mgwr_report.txt",
    "diagnostics_report.txt",
    "surfaces.geojson",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

/// Machine-readable record of a run. Everything except `timings` is
/// reproducible from the config and input files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: PipelineConfig,
    pub observations: usize,
    pub dropped_ids: Vec<String>,
    pub artifacts: Vec<ArtifactRecord>,
    pub timings: Vec<StageTiming>,
}

struct Run {
    dir: PathBuf,
    written: Vec<PathBuf>,
    created_dir: bool,
    timings: Vec<StageTiming>,
}

impl Run {
    fn stage<T>(&mut self, stage: &'static str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self).map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })?;
        self.timings.push(StageTiming {
            stage,
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(out)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        fs::write(path, contents)?;
        Ok(())
    }

    fn cleanup(&self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

fn digest(path: &Path) -> Result<ArtifactRecord> {
    let bytes = fs::read(path)?;
    Ok(ArtifactRecord {
        file: path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    })
}

/// Run every stage and write the report artifacts plus `manifest.json`.
///
/// On failure the error names the stage, and any files this run wrote are removed.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunManifest> {
    let created_dir = !cfg.output_dir.exists();
    let mut run = Run {
        dir: cfg.output_dir.clone(),
        written: Vec::new(),
        created_dir,
        timings: Vec::new(),
    };
    let result = execute(cfg, &mut run);
    if result.is_err() {
        run.cleanup();
    }
    result
}

fn execute(cfg: &PipelineConfig, run: &mut Run) -> Result<RunManifest> {
    let (ds, report_rows, polygons) = run.stage("load", |_| {
        let raw = load_points_csv(&cfg.input.points, &cfg.input.schema())?;
        let (ds, rep) = validate_dataset(&raw)?;
        let polygons = match &cfg.input.polygons {
            Some(p) => {
                let polys = load_polygons_geojson(p, &cfg.input.polygon_id)?;
                // align polygons with the validated rows by id
                let index: std::collections::HashMap<&str, usize> =
                    polys.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
                let rows = ds
                    .points
                    .ids
                    .iter()
                    .map(|id| {
                        index.get(id.as_str()).copied().ok_or_else(|| Error::Geometry {
                            path: p.clone(),
                            message: format!("no polygon for observation `{id}`"),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(crate::weights::PolygonSet::with_holes(
                    rows.iter().map(|&r| polys.ids[r].clone()).collect(),
                    rows.iter().map(|&r| polys.rings[r].clone()).collect(),
                    rows.iter().map(|&r| polys.outer[r].clone()).collect(),
                )?)
            }
            None => None,
        };
        Ok((ds, rep, polygons))
    })?;
    fs::create_dir_all(&run.dir)?;

    let (w_raw, w) = run.stage("weights", |_| {
        let raw = match cfg.weights.method {
            WeightsMethod::Knn => knn_weights(&ds.points, cfg.weights.k)?,
            WeightsMethod::Hybrid => hybrid_kernel_weights(&ds.points, cfg.weights.k)?,
            WeightsMethod::Queen => {
                let polys = polygons.as_ref().ok_or_else(|| {
                    Error::Config("queen contiguity needs `input.polygons`".into())
                })?;
                queen_contiguity(polys)?
            }
        };
        let std = row_standardize(&raw);
        Ok((raw, std))
    })?;

    let response = ds.response.name.clone();
    run.stage("moran", |run| {
        let links = weights_summary(&w_raw);
        let analytic = global_morans_i(
            &ds.response.values,
            &w,
            VarianceAssumption::Randomization,
            cfg.moran.alternative,
        )?;
        let mut text = report::moran_block(&response, &analytic, &links);
        if cfg.moran.permutations > 0 {
            let perm = permutation_morans_i(
                &ds.response.values,
                &w,
                cfg.moran.permutations,
                cfg.seed,
                cfg.moran.alternative,
            )?;
            text.push('\n');
            text.push_str(&report::moran_block(&response, &perm, &links));
        }
        run.write(ARTIFACTS[0], &text)
    })?;

    let ols = run.stage("ols", |run| {
        let fit = ols_fit(&build_design(&ds, false)?)?;
        run.write(ARTIFACTS[1], &report::ols_block(&response, &fit))?;
        Ok(fit)
    })?;

    let (fit, design) = run.stage("mgwr", |run| {
        let design = build_design(&ds, cfg.mgwr.standardize)?;
        let nb = Neighborhoods::new(&ds.points);
        let mc = MgwrConfig {
            kernel: cfg.kernel,
            lag: cfg.mgwr.lag,
            soc_tolerance: cfg.mgwr.soc_tolerance,
            max_iterations: cfg.mgwr.max_iterations,
            bandwidths: cfg.mgwr.bandwidths.clone(),
            exact_hat_max_n: cfg.mgwr.exact_hat_max_n,
            ..MgwrConfig::default()
        };
        let fit = mgwr_fit(&design, &nb, Some(&w), &mc)?;
        let inference = enp_and_inference(&fit, cfg.mgwr.alpha).ok();
        let mut text = report::mgwr_block(&response, Some(&ols), &fit, inference.as_ref());
        if design.standardized {
            text.push_str("Predictors standardized (mean 0, population SD 1) before calibration.\n");
        }
        run.write(ARTIFACTS[2], &text)?;
        Ok((fit, design))
    })?;

    let diagnostics = run.stage("diagnostics", |run| {
        let rep = diagnostics_report(
            &fit,
            &w,
            cfg.mgwr.alpha,
            cfg.mgwr.residual_permutations.max(99),
            cfg.seed.wrapping_add(1),
        )?;
        run.write(ARTIFACTS[3], &report::diagnostics_block(&design.names, &ds.points.ids, &rep))?;
        Ok(rep)
    })?;

    run.stage("export", |run| {
        let prediction = predict_surface(&fit, Some(&w))?;
        let table = SurfaceTable::from_fit(&ds.points.ids, &fit, &prediction, &diagnostics);
        let geometry = match &polygons {
            Some(p) => Geometry::Polygons(p),
            None => Geometry::Points(&ds.points),
        };
        let path = run.dir.join(ARTIFACTS[4]);
        run.written.push(path.clone());
        export_surfaces_geojson(&table, geometry, &path)
    })?;

    let manifest_path = run.dir.join("manifest.json");
    let manifest = run.stage("manifest", |run| {
        let artifacts = ARTIFACTS
            .iter()
            .map(|a| digest(&run.dir.join(a)))
            .collect::<Result<Vec<_>>>()?;
        Ok(RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            config: cfg.clone(),
            observations: ds.len(),
            dropped_ids: report_rows.dropped_ids.clone(),
            artifacts,
            timings: Vec::new(),
        })
    })?;
    let mut manifest = manifest;
    manifest.timings = std::mem::take(&mut run.timings);
    run.written.push(manifest_path.clone());
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}
