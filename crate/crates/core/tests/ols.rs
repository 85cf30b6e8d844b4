use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smgwr_core::data::{build_design, Column, Dataset, PointSet};
use smgwr_core::ols::ols_fit;

fn dataset(n: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = PointSet::from_coords((0..n).map(|i| [i as f64, 0.0]).collect());
    let xs: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect()).collect();
    let y = (0..n)
        .map(|i| 0.5 + xs.iter().enumerate().map(|(k, x)| (k as f64 - 1.0) * x[i]).sum::<f64>() + rng.random::<f64>())
        .collect();
    Dataset::new(
        pts,
        Column::new("y", y),
        xs.into_iter().enumerate().map(|(k, v)| Column::new(format!("x{k}"), v)).collect(),
    )
    .unwrap()
}

#[test]
fn twenty_by_three_matches_normal_equations() {
    let design = build_design(&dataset(20, 3, 7), false).unwrap();
    let fit = ols_fit(&design).unwrap();
    let xtx = design.x.transpose() * &design.x;
    let beta = xtx.clone().cholesky().unwrap().solve(&(design.x.transpose() * &design.y));
    for (a, b) in fit.coefficients.iter().zip(beta.iter()) {
        assert!((a - b).abs() < 1e-8);
    }
    let tss: f64 = {
        let m = design.y.mean();
        design.y.iter().map(|v| (v - m).powi(2)).sum()
    };
    assert!((fit.r_squared - (1.0 - fit.rss / tss)).abs() < 1e-12);
    assert_eq!(fit.df_residual, 16);
}

#[test]
fn standardizing_predictors_preserves_fit() {
    let ds = dataset(30, 2, 1);
    let raw = ols_fit(&build_design(&ds, false).unwrap()).unwrap();
    let std_design = build_design(&ds, true).unwrap();
    let std = ols_fit(&std_design).unwrap();
    assert!((raw.r_squared - std.r_squared).abs() < 1e-12);
    for (a, b) in std_design.destandardize(&std.coefficients).iter().zip(&raw.coefficients) {
        assert!((a - b).abs() < 1e-10);
    }
}

proptest! {
    #[test]
    fn residuals_are_orthogonal_to_design(seed in 0u64..500, p in 1usize..5) {
        let design = build_design(&dataset(25, p, seed), false).unwrap();
        let fit = ols_fit(&design).unwrap();
        let e = DVector::from_vec(fit.residuals.clone());
        let xte: DMatrix<f64> = design.x.transpose() * DMatrix::from_column_slice(25, 1, e.as_slice());
        prop_assert!(xte.amax() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&fit.r_squared));
        let trace: f64 = fit.hat_diagonal.iter().sum();
        prop_assert!((trace - (p + 1) as f64).abs() < 1e-9);
    }
}
