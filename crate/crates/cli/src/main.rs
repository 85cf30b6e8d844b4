//! `smgwr`: spatial weights, Moran's I, OLS, GWR and spatial-lag MGWR from the command line.
//!
//! Coordinates are taken as planar and are never reprojected. Project
//! longitude/latitude data before using it here.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use smgwr_core::autocorr::{
    global_morans_i, permutation_morans_i, Alternative, VarianceAssumption,
};
use smgwr_core::data::{build_design, validate_dataset, Dataset};
use smgwr_core::io::{
    self, export_surfaces_geojson, load_points_csv, load_polygons_geojson, read_weights,
    write_weights, CsvSchema, Geometry, InputConfig, PipelineConfig, SurfaceTable, WeightsMethod,
    WeightsSpec,
};
use smgwr_core::local::{
    gwr_fit, select_gwr_bandwidth, BandwidthMode, KernelFamily, KernelSpec, Neighborhoods,
};
use smgwr_core::mgwr::{diagnostics_report, enp_and_inference, mgwr_fit, predict_surface, MgwrConfig};
use smgwr_core::ols::ols_fit;
use smgwr_core::simulate::{
    coordinate_names, generate_grid, generate_sample, write_dataset_csv, SimConfig,
};
use smgwr_core::weights::{
    hybrid_kernel_weights, knn_weights, queen_contiguity, row_standardize, weights_summary,
    PolygonSet, SpatialWeights,
};

#[derive(Parser)]
#[command(name = "smgwr", version, about = "Spatial-lag multiscale geographically weighted regression")]
struct Cli {
    /// Worker threads for data-parallel stages; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build spatial weights and write them as `i_id,j_id,weight` rows.
    Weights(WeightsCmd),
    /// Global Moran's I for one column.
    Moran(MoranCmd),
    /// Global OLS with coefficient table and fit statistics.
    Ols(OlsCmd),
    /// Single-bandwidth GWR.
    Gwr(GwrCmd),
    /// Multiscale GWR, optionally with a spatial lag of the response.
    Mgwr(MgwrCmd),
    /// Generate a synthetic grid dataset with known coefficient surfaces.
    Simulate(SimulateCmd),
    /// Run the full pipeline from a TOML config.
    Run(RunCmd),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Point table (CSV with a header row).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "id")]
    id: String,
    #[arg(long, default_value = "x")]
    x: String,
    #[arg(long, default_value = "y")]
    y: String,
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long)]
    response: String,
    /// Comma-separated predictor columns.
    #[arg(long, value_delimiter = ',', required = true)]
    predictors: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Knn,
    Queen,
    Hybrid,
}

#[derive(Args, Clone)]
struct WeightsArgs {
    /// Read weights from a file written by `smgwr weights` instead of building them.
    #[arg(long, conflicts_with_all = ["method", "polygons"])]
    weights: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "knn")]
    method: MethodArg,
    #[arg(long, default_value_t = 6)]
    k: usize,
    /// Polygon GeoJSON for queen contiguity.
    #[arg(long)]
    polygons: Option<PathBuf>,
    #[arg(long, default_value = "id")]
    polygon_id: String,
}

#[derive(Args, Clone)]
struct KernelArgs {
    #[arg(long, value_enum, default_value = "bisquare")]
    kernel: FamilyArg,
    /// Interpret bandwidths as distances instead of neighbour counts.
    #[arg(long)]
    fixed: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Bisquare,
    Gaussian,
}

impl KernelArgs {
    fn spec(&self) -> KernelSpec {
        let family = match self.kernel {
            FamilyArg::Bisquare => KernelFamily::Bisquare,
            FamilyArg::Gaussian => KernelFamily::Gaussian,
        };
        let mode = if self.fixed {
            BandwidthMode::Fixed
        } else {
            BandwidthMode::Adaptive
        };
        KernelSpec::new(family, mode)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlternativeArg {
    Greater,
    Less,
    TwoSided,
}

impl From<AlternativeArg> for Alternative {
    fn from(a: AlternativeArg) -> Self {
        match a {
            AlternativeArg::Greater => Alternative::Greater,
            AlternativeArg::Less => Alternative::Less,
            AlternativeArg::TwoSided => Alternative::TwoSided,
        }
    }
}

#[derive(Args)]
struct WeightsCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    weights: WeightsArgs,
    /// Row-standardize before writing.
    #[arg(long)]
    row_standardize: bool,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct MoranCmd {
    #[command(flatten)]
    data: DataArgs,
    /// Column to test.
    #[arg(long)]
    variable: String,
    #[command(flatten)]
    weights: WeightsArgs,
    /// Permutations; 0 reports only the analytical test.
    #[arg(long, default_value_t = 999)]
    permutations: usize,
    #[arg(long, value_enum, default_value = "greater")]
    alternative: AlternativeArg,
    /// Use the normality variance instead of randomization.
    #[arg(long)]
    normality: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct OlsCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    standardize: bool,
}

#[derive(Args)]
struct GwrCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Fixed bandwidth; searched by AICc when omitted.
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    standardize: bool,
}

#[derive(Args)]
struct MgwrCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    weights: WeightsArgs,
    /// Fit without the spatial lag of the response.
    #[arg(long)]
    no_lag: bool,
    /// Keep predictors on their original scale.
    #[arg(long)]
    no_standardize: bool,
    /// One bandwidth per term (intercept first); searched when omitted.
    #[arg(long, value_delimiter = ',')]
    bandwidths: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Also write diagnostics and a surfaces GeoJSON here.
    #[arg(long)]
    surfaces: Option<PathBuf>,
    #[arg(long, default_value_t = 999)]
    residual_permutations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateCmd {
    /// Grid side length; the sample has side x side points.
    #[arg(long, default_value_t = 25)]
    side: usize,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Neighbours in the kNN weights used for the lag.
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// Full simulation config as JSON; overrides side, rho, noise and seed.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for data.csv, truth.json and pipeline.toml.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct RunCmd {
    config: PathBuf,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let workers = cli.workers;
    smgwr_core::par::with_workers(workers, move || match cli.command {
        Command::Weights(c) => weights_cmd(c),
        Command::Moran(c) => moran_cmd(c),
        Command::Ols(c) => ols_cmd(c),
        Command::Gwr(c) => gwr_cmd(c),
        Command::Mgwr(c) => mgwr_cmd(c),
        Command::Simulate(c) => simulate_cmd(c),
        Command::Run(c) => run_cmd(c),
    })
}

fn load(data: &DataArgs, response: &str, predictors: &[String]) -> Result<Dataset> {
    let schema = CsvSchema {
        id: data.id.clone(),
        x: data.x.clone(),
        y: data.y.clone(),
        response: response.to_string(),
        predictors: predictors.to_vec(),
    };
    let raw = load_points_csv(&data.data, &schema)
        .with_context(|| format!("reading {}", data.data.display()))?;
    let (ds, report) = validate_dataset(&raw)?;
    if !report.dropped_ids.is_empty() {
        eprintln!(
            "dropped {} rows with missing values: {}",
            report.dropped_ids.len(),
            report.dropped_ids.join(", ")
        );
    }
    Ok(ds)
}

/// Polygons reordered to match the dataset rows.
fn aligned_polygons(path: &Path, id_property: &str, ds: &Dataset) -> Result<PolygonSet> {
    let polys = load_polygons_geojson(path, id_property)?;
    let rows = ds
        .points
        .ids
        .iter()
        .map(|id| {
            polys
                .ids
                .iter()
                .position(|p| p == id)
                .with_context(|| format!("no polygon for observation `{id}`"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PolygonSet::with_holes(
        rows.iter().map(|&r| polys.ids[r].clone()).collect(),
        rows.iter().map(|&r| polys.rings[r].clone()).collect(),
        rows.iter().map(|&r| polys.outer[r].clone()).collect(),
    )?)
}

/// Raw weights, either read from disk or built from the dataset.
fn raw_weights(args: &WeightsArgs, ds: &Dataset) -> Result<SpatialWeights> {
    if let Some(path) = &args.weights {
        return read_weights(path, &ds.points.ids)
            .with_context(|| format!("reading {}", path.display()));
    }
    Ok(match args.method {
        MethodArg::Knn => knn_weights(&ds.points, args.k)?,
        MethodArg::Hybrid => hybrid_kernel_weights(&ds.points, args.k)?,
        MethodArg::Queen => {
            let Some(path) = &args.polygons else {
                bail!("--method queen needs --polygons");
            };
            queen_contiguity(&aligned_polygons(path, &args.polygon_id, ds)?)?
        }
    })
}

fn weights_cmd(c: WeightsCmd) -> Result<()> {
    // weights only need ids and coordinates; the x column stands in for a response
    let ds = load(&c.data, &c.data.x, &[])?;
    let mut w = raw_weights(&c.weights, &ds)?;
    let summary = weights_summary(&w);
    if c.row_standardize {
        w = row_standardize(&w);
    }
    write_weights(&w, &ds.points.ids, &c.out)?;
    println!("Number of regions: {}", summary.n_regions);
    println!("Number of nonzero links: {}", summary.nonzero_links);
    println!("Average number of links: {}", summary.average_links);
    println!("Islands: {}", summary.islands);
    Ok(())
}

fn moran_cmd(c: MoranCmd) -> Result<()> {
    let ds = load(&c.data, &c.variable, &[])?;
    let raw = raw_weights(&c.weights, &ds)?;
    let links = weights_summary(&raw);
    let w = row_standardize(&raw);
    let assumption = if c.normality {
        VarianceAssumption::Normality
    } else {
        VarianceAssumption::Randomization
    };
    let x = &ds.response.values;
    let analytic = global_morans_i(x, &w, assumption, c.alternative.into())?;
    print!("{}", io::moran_block(&c.variable, &analytic, &links));
    if c.permutations > 0 {
        let perm = permutation_morans_i(x, &w, c.permutations, c.seed, c.alternative.into())?;
        println!();
        print!("{}", io::moran_block(&c.variable, &perm, &links));
    }
    Ok(())
}

fn ols_cmd(c: OlsCmd) -> Result<()> {
    let ds = load(&c.data, &c.model.response, &c.model.predictors)?;
    let fit = ols_fit(&build_design(&ds, c.standardize)?)?;
    print!("{}", io::ols_block(&c.model.response, &fit));
    Ok(())
}

fn gwr_cmd(c: GwrCmd) -> Result<()> {
    let ds = load(&c.data, &c.model.response, &c.model.predictors)?;
    let design = build_design(&ds, c.standardize)?;
    let nb = Neighborhoods::new(&ds.points);
    let kernel = c.kernel.spec();
    let bw = match c.bandwidth {
        Some(bw) => bw,
        None => select_gwr_bandwidth(&design, &nb, kernel, None)?.argmin,
    };
    let fit = gwr_fit(&design, &nb, kernel, bw)?;
    print!("{}", io::gwr_block(&c.model.response, &fit));
    Ok(())
}

fn mgwr_cmd(c: MgwrCmd) -> Result<()> {
    let ds = load(&c.data, &c.model.response, &c.model.predictors)?;
    let design = build_design(&ds, !c.no_standardize)?;
    let nb = Neighborhoods::new(&ds.points);
    let lag = !c.no_lag;
    let w = if lag || c.surfaces.is_some() {
        Some(row_standardize(&raw_weights(&c.weights, &ds)?))
    } else {
        None
    };
    let config = MgwrConfig {
        kernel: c.kernel.spec(),
        lag,
        bandwidths: c.bandwidths.clone(),
        ..MgwrConfig::default()
    };
    let fit = mgwr_fit(&design, &nb, w.as_ref(), &config)?;
    let ols = ols_fit(&design)?;
    let inference = enp_and_inference(&fit, c.alpha).ok();
    print!("{}", io::mgwr_block(&c.model.response, Some(&ols), &fit, inference.as_ref()));

    if let (Some(dir), Some(w)) = (&c.surfaces, &w) {
        fs::create_dir_all(dir)?;
        let report = diagnostics_report(&fit, w, c.alpha, c.residual_permutations, c.seed)?;
        fs::write(
            dir.join("diagnostics_report.txt"),
            io::diagnostics_block(&design.names, &ds.points.ids, &report),
        )?;
        let prediction = predict_surface(&fit, Some(w))?;
        let table = SurfaceTable::from_fit(&ds.points.ids, &fit, &prediction, &report);
        export_surfaces_geojson(&table, Geometry::Points(&ds.points), &dir.join("surfaces.geojson"))?;
    }
    Ok(())
}

fn simulate_cmd(c: SimulateCmd) -> Result<()> {
    let cfg = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<SimConfig>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => SimConfig {
            side: c.side,
            rho: c.rho,
            noise_sd: c.noise_sd,
            seed: c.seed,
            ..SimConfig::fixture(c.seed)
        },
    };
    let w = row_standardize(&knn_weights(&generate_grid(cfg.side)?, c.k)?);
    let (ds, truth) = generate_sample(&cfg, &w)?;
    fs::create_dir_all(&c.out)?;
    let data = c.out.join("data.csv");
    write_dataset_csv(&ds, &data)?;
    truth.save(&c.out.join("truth.json"))?;

    let (x, y) = coordinate_names(&ds);
    let pipeline = PipelineConfig {
        input: InputConfig {
            points: PathBuf::from("data.csv"),
            polygons: None,
            polygon_id: "id".into(),
            id: "id".into(),
            x,
            y,
            response: ds.response.name.clone(),
            predictors: ds.predictor_names(),
        },
        output_dir: PathBuf::from("out"),
        seed: cfg.seed,
        weights: WeightsSpec {
            method: WeightsMethod::Knn,
            k: c.k,
        },
        kernel: KernelSpec::default(),
        moran: Default::default(),
        mgwr: Default::default(),
    };
    fs::write(c.out.join("pipeline.toml"), pipeline.to_toml()?)?;
    println!(
        "wrote {} observations ({} predictors, rho = {}) to {}",
        ds.len(),
        ds.predictors.len(),
        cfg.rho,
        c.out.display()
    );
    Ok(())
}

fn run_cmd(c: RunCmd) -> Result<()> {
    let cfg = PipelineConfig::load(&c.config)
        .with_context(|| format!("loading {}", c.config.display()))?;
    let manifest = io::run_pipeline(&cfg)?;
    for a in &manifest.artifacts {
        println!("{}  {}", a.sha256, a.file);
    }
    println!("manifest.json written to {}", cfg.output_dir.display());
    Ok(())
}
