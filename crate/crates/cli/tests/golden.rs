//! Golden-file tests for every subcommand.
//!
//! Each test simulates the same small grid, runs one subcommand and compares
//! its output with `tests/golden/<name>`. Numeric tokens match to a relative
//! 1e-6; everything else must match exactly. Set `SMGWR_UPDATE_GOLDEN=1` to
//! rewrite the golden files after an intended change.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_smgwr");
const REL_TOL: f64 = 1e-6;

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

fn smgwr(args: &[&str]) -> String {
    let out = Command::new(BIN)
        .args(["--workers", "1"])
        .args(args)
        .output()
        .expect("failed to launch smgwr");
    assert!(
        out.status.success(),
        "smgwr {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// 8 x 8 grid, seed 3, written to a fresh directory.
fn simulated() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    smgwr(&["simulate", "--side", "8", "--seed", "3", "--out", out.to_str().unwrap()]);
    dir
}

fn data_args(dir: &TempDir) -> Vec<String> {
    let data = dir.path().join("sim").join("data.csv");
    ["--data", data.to_str().unwrap(), "--x", "coord_x", "--y", "coord_y"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn tokens_match(a: &str, b: &str) -> bool {
    if a == b {
        return true;
    }
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => (x - y).abs() <= REL_TOL * x.abs().max(y.abs()).max(1e-12),
        _ => false,
    }
}

/// Compare line by line, splitting on whitespace and commas.
fn assert_golden(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("SMGWR_UPDATE_GOLDEN").is_some() {
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("missing golden file {}: {e}", path.display()));
    let exp_lines: Vec<&str> = expected.lines().collect();
    let act_lines: Vec<&str> = actual.lines().collect();
    assert_eq!(act_lines.len(), exp_lines.len(), "{name}: line count differs\n{actual}");
    let split = |l: &str| -> Vec<String> {
        l.split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect()
    };
    for (no, (a, e)) in act_lines.iter().zip(&exp_lines).enumerate() {
        let (ta, te) = (split(a), split(e));
        let ok = ta.len() == te.len() && ta.iter().zip(&te).all(|(x, y)| tokens_match(x, y));
        assert!(ok, "{name}:{}: expected\n  {e}\ngot\n  {a}", no + 1);
    }
}

fn run_with(dir: &TempDir, args: &[&str]) -> String {
    let mut all: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    all.extend(data_args(dir));
    let refs: Vec<&str> = all.iter().map(String::as_str).collect();
    smgwr(&refs)
}

#[test]
fn simulate_writes_dataset_and_truth() {
    let dir = simulated();
    let sim = dir.path().join("sim");
    assert_golden("simulate_data.csv", &fs::read_to_string(sim.join("data.csv")).unwrap());
    assert_golden("simulate_pipeline.toml", &fs::read_to_string(sim.join("pipeline.toml")).unwrap());
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(sim.join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth["rho"], 0.0);
    assert_eq!(truth["names"].as_array().unwrap().len(), 3);
}

#[test]
fn weights_knn() {
    let dir = simulated();
    let w = dir.path().join("w.csv");
    let stdout = run_with(&dir, &["weights", "--k", "4", "-o", w.to_str().unwrap()]);
    assert_golden("weights_stdout.txt", &stdout);
    assert_golden("weights_knn4.csv", &fs::read_to_string(&w).unwrap());
}

#[test]
fn moran_from_weights_file() {
    let dir = simulated();
    let w = dir.path().join("w.csv");
    run_with(&dir, &["weights", "--k", "4", "-o", w.to_str().unwrap()]);
    let stdout = run_with(
        &dir,
        &["moran", "--variable", "y", "--weights", w.to_str().unwrap(), "--permutations", "99", "--seed", "7"],
    );
    assert_golden("moran.txt", &stdout);
}

#[test]
fn ols_table() {
    let dir = simulated();
    assert_golden("ols.txt", &run_with(&dir, &["ols", "--response", "y", "--predictors", "x1,x2"]));
}

#[test]
fn gwr_searched_bandwidth() {
    let dir = simulated();
    assert_golden("gwr.txt", &run_with(&dir, &["gwr", "--response", "y", "--predictors", "x1,x2"]));
}

#[test]
fn mgwr_with_surfaces() {
    let dir = simulated();
    let out = dir.path().join("surf");
    let stdout = run_with(
        &dir,
        &[
            "mgwr",
            "--response",
            "y",
            "--predictors",
            "x1,x2",
            "--surfaces",
            out.to_str().unwrap(),
            "--residual-permutations",
            "99",
        ],
    );
    assert_golden("mgwr.txt", &stdout);
    assert_golden("mgwr_diagnostics.txt", &fs::read_to_string(out.join("diagnostics_report.txt")).unwrap());
    let surfaces: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("surfaces.geojson")).unwrap()).unwrap();
    assert_eq!(surfaces["features"].as_array().unwrap().len(), 64);
}

#[test]
fn run_pipeline_from_simulated_config() {
    let dir = simulated();
    let config = dir.path().join("sim").join("pipeline.toml");
    smgwr(&["run", config.to_str().unwrap()]);
    let out = dir.path().join("sim").join("out");
    for name in ["moran_report.txt", "ols_report.txt", "mgwr_report.txt", "diagnostics_report.txt"] {
        assert_golden(&format!("run_{name}"), &fs::read_to_string(out.join(name)).unwrap());
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 5);
    assert_eq!(manifest["observations"], 64);
}

#[test]
fn run_with_missing_input_fails_at_load() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(
        &config,
        "output_dir = \"out\"\n[input]\npoints = \"absent.csv\"\nresponse = \"y\"\npredictors = [\"x1\"]\n",
    )
    .unwrap();
    let out = Command::new(BIN).args(["run", config.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("load"), "{stderr}");
    assert!(!dir.path().join("out").exists());
}
