use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smgwr_core::data::{build_design, Column, Dataset, DesignMatrix, PointSet};
use smgwr_core::local::{gwr_fit, Neighborhoods, ADAPTIVE_PAD};
use smgwr_core::mgwr::{
    cooks_distance, enp_and_inference, mgwr_fit, predict_surface, residual_moran_check, HatPath,
    MgwrConfig,
};
use smgwr_core::ols::ols_fit;
use smgwr_core::simulate::{generate_grid, generate_sample, SimConfig, SurfaceSpec};
use smgwr_core::weights::{knn_weights, row_standardize, solve_sar};

fn random_dataset(n: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0]).collect();
    let xs: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let [u, v] = coords[i];
            1.0 + 0.2 * u + xs.iter().enumerate().map(|(k, x)| (k as f64 + 1.0 + 0.1 * v) * x[i]).sum::<f64>()
                + rng.random::<f64>() - 0.5
        })
        .collect();
    Dataset::new(
        PointSet::from_coords(coords),
        Column::new("y", y),
        xs.into_iter().enumerate().map(|(k, v)| Column::new(format!("x{}", k + 1), v)).collect(),
    )
    .unwrap()
}

/// Adaptive bisquare kernel matrix computed from scratch.
fn bisquare_matrix(points: &PointSet, k: usize) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, n, |i, j| {
        let mut d: Vec<f64> = (0..n).map(|m| points.distance(i, m)).collect();
        d.sort_by(f64::total_cmp);
        let r = d[k - 1] * ADAPTIVE_PAD;
        let dij = points.distance(i, j);
        if dij < r {
            (1.0 - (dij / r).powi(2)).powi(2)
        } else {
            0.0
        }
    })
}

/// `R_k = diag(x) Q` with `Q[i, j] = w_ij x_j / sum_m w_im x_m^2`.
fn univariate_hat(x: &[f64], w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| {
        let sxx: f64 = (0..n).map(|m| w[(i, m)] * x[m] * x[m]).sum();
        x[i] * w[(i, j)] * x[j] / sxx
    })
}

/// Backfitting fixed point solved as one block linear system:
/// `f_k + R_k sum_{m != k} f_m = R_k y`. Returns the term maps `f_k = T_k y`.
fn dense_backfit(design: &DesignMatrix, points: &PointSet, bws: &[usize]) -> Vec<DMatrix<f64>> {
    let n = design.n();
    let kt = design.n_terms();
    let hats: Vec<DMatrix<f64>> = (0..kt)
        .map(|k| {
            let x: Vec<f64> = design.x.column(k).iter().copied().collect();
            univariate_hat(&x, &bisquare_matrix(points, bws[k]))
        })
        .collect();
    let mut a = DMatrix::<f64>::identity(n * kt, n * kt);
    let mut b = DMatrix::<f64>::zeros(n * kt, n);
    for k in 0..kt {
        for m in 0..kt {
            if m != k {
                a.view_mut((k * n, m * n), (n, n)).copy_from(&hats[k]);
            }
        }
        b.view_mut((k * n, 0), (n, n)).copy_from(&hats[k]);
    }
    let sol = a.lu().solve(&b).unwrap();
    (0..kt).map(|k| sol.rows(k * n, n).into_owned()).collect()
}

fn fixed_config(bws: &[usize]) -> MgwrConfig {
    MgwrConfig {
        bandwidths: Some(bws.iter().map(|&b| b as f64).collect()),
        operator_tolerance: 1e-13,
        ..MgwrConfig::default()
    }
}

#[test]
fn frozen_bandwidths_match_dense_block_solution() {
    let ds = random_dataset(70, 2, 11);
    let design = build_design(&ds, false).unwrap();
    let nb = Neighborhoods::new(&ds.points);
    let bws = [40, 25, 60];
    let fit = mgwr_fit(&design, &nb, None, &fixed_config(&bws)).unwrap();
    assert_eq!(fit.hat_path, HatPath::Exact);
    let maps = dense_backfit(&design, &ds.points, &bws);
    let y = &design.y;
    let mut s_total = DMatrix::<f64>::zeros(70, 70);
    for (k, t) in maps.iter().enumerate() {
        let f = t * y;
        for i in 0..70 {
            assert!((fit.terms[(i, k)] - f[i]).abs() < 1e-6, "term {k} at {i}");
        }
        let enp_k = t.trace();
        assert!((fit.enp_per_covariate[k] - enp_k).abs() < 1e-6, "{} vs {enp_k}", fit.enp_per_covariate[k]);
        s_total += t;
    }
    assert!((fit.enp_total - s_total.trace()).abs() < 1e-6);
    for i in 0..70 {
        assert!((fit.hat_diagonal[i] - s_total[(i, i)]).abs() < 1e-6);
    }
}

#[test]
fn reconstruction_identity() {
    let side = 10;
    let pts = generate_grid(side).unwrap();
    let w = row_standardize(&knn_weights(&pts, 4).unwrap());
    let mut cfg = SimConfig::fixture(5);
    cfg.side = side;
    cfg.rho = 0.4;
    let (ds, _) = generate_sample(&cfg, &w).unwrap();
    let design = build_design(&ds, true).unwrap();
    let nb = Neighborhoods::new(&ds.points);
    let mc = MgwrConfig {
        lag: true,
        ..MgwrConfig::default()
    };
    let fit = mgwr_fit(&design, &nb, Some(&w), &mc).unwrap();
    for i in 0..ds.len() {
        let sum: f64 = fit.terms.row(i).sum() + fit.lag_term[i] + fit.residuals[i];
        assert!((sum - ds.response.values[i]).abs() < 1e-10);
        let surf: f64 = (0..3).map(|k| design.x[(i, k)] * fit.coefficient_surfaces[(i, k)]).sum();
        assert!((surf - fit.terms.row(i).sum()).abs() < 1e-10);
    }
    let sum_enp: f64 = fit.enp_per_covariate.iter().sum();
    assert!((sum_enp - fit.enp_total).abs() < 1e-12);
    assert!(fit.enp_per_covariate.iter().all(|&e| e > 0.0 && e <= ds.len() as f64));
}

#[test]
fn single_term_equals_gwr() {
    let ds = random_dataset(50, 0, 3);
    let design = build_design(&ds, false).unwrap();
    let nb = Neighborhoods::new(&ds.points);
    let gwr = gwr_fit(&design, &nb, Default::default(), 15.0).unwrap();
    let fit = mgwr_fit(&design, &nb, None, &fixed_config(&[15])).unwrap();
    for i in 0..50 {
        assert!((fit.coefficient_surfaces[(i, 0)] - gwr.local_coefficients[(i, 0)]).abs() < 1e-8);
        assert!((fit.hat_diagonal[i] - gwr.hat_diagonal[i]).abs() < 1e-8);
    }
    assert!((fit.enp_total - gwr.trace_s).abs() < 1e-8);
    assert!((fit.aicc - gwr.aicc).abs() < 1e-8);
}

#[test]
fn surfaces_invariant_to_observation_order() {
    let ds = random_dataset(60, 2, 21);
    let design = build_design(&ds, false).unwrap();
    let fit = mgwr_fit(&design, &Neighborhoods::new(&ds.points), None, &MgwrConfig::default()).unwrap();
    let order: Vec<usize> = (0..60).rev().map(|i| (i * 7) % 60).collect();
    let shuffled = ds.subset(&order);
    let d2 = build_design(&shuffled, false).unwrap();
    let fit2 = mgwr_fit(&d2, &Neighborhoods::new(&shuffled.points), None, &MgwrConfig::default()).unwrap();
    assert_eq!(fit.bandwidths, fit2.bandwidths);
    for (new_i, &old_i) in order.iter().enumerate() {
        for k in 0..3 {
            let a = fit.coefficient_surfaces[(old_i, k)];
            let b = fit2.coefficient_surfaces[(new_i, k)];
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}

#[test]
fn approximate_path_reports_itself() {
    let ds = random_dataset(60, 1, 8);
    let design = build_design(&ds, false).unwrap();
    let nb = Neighborhoods::new(&ds.points);
    let mut mc = fixed_config(&[30, 20]);
    let exact = mgwr_fit(&design, &nb, None, &mc).unwrap();
    mc.exact_hat_max_n = 10;
    let approx = mgwr_fit(&design, &nb, None, &mc).unwrap();
    assert_eq!(approx.hat_path, HatPath::Approximate);
    for i in 0..60 {
        for k in 0..2 {
            let d = exact.coefficient_surfaces[(i, k)] - approx.coefficient_surfaces[(i, k)];
            assert!(d.abs() < 1e-6);
        }
    }
    assert!(approx.enp_total > 0.0);
}

#[test]
fn constant_truth_selects_global_bandwidths() {
    let side = 12;
    let pts = generate_grid(side).unwrap();
    let w = row_standardize(&knn_weights(&pts, 4).unwrap());
    let cfg = SimConfig {
        side,
        surfaces: vec![
            SurfaceSpec::Constant { level: 3.0 },
            SurfaceSpec::Constant { level: 1.0 },
            SurfaceSpec::Constant { level: -2.0 },
        ],
        noise_sd: 1.0,
        rho: 0.0,
        seed: 17,
    };
    let (ds, _) = generate_sample(&cfg, &w).unwrap();
    let design = build_design(&ds, false).unwrap();
    let fit = mgwr_fit(&design, &Neighborhoods::new(&ds.points), None, &MgwrConfig::default()).unwrap();
    let ols = ols_fit(&design).unwrap();
    let n = ds.len();
    // the adaptive bisquare AICc profile is jagged near n on a regular grid
    // (distance ties), so the minimum lands close to, not always at, n
    assert!(fit.bandwidths.iter().all(|&b| b >= 0.9 * n as f64), "{:?}", fit.bandwidths);
    for k in 0..3 {
        for i in 0..n {
            let d = (fit.coefficient_surfaces[(i, k)] - ols.coefficients[k]).abs();
            assert!(d <= 2.0 * ols.standard_errors[k], "term {k}: {d}");
        }
    }
}

#[test]
fn inference_and_prediction_bookkeeping() {
    let side = 10;
    let pts = generate_grid(side).unwrap();
    let w = row_standardize(&knn_weights(&pts, 4).unwrap());
    let mut cfg = SimConfig::fixture(2);
    cfg.side = side;
    let (ds, _) = generate_sample(&cfg, &w).unwrap();
    let design = build_design(&ds, false).unwrap();
    let fit = mgwr_fit(&design, &Neighborhoods::new(&ds.points), None, &MgwrConfig::default()).unwrap();

    let inf = enp_and_inference(&fit, 0.05).unwrap();
    for k in 0..3 {
        assert!((inf.adjusted_alpha[k] - 0.05 / fit.enp_per_covariate[k]).abs() < 1e-15);
        assert!((0.0..=1.0).contains(&inf.share_significant[k]));
    }
    assert!(enp_and_inference(&fit, 0.0).is_err());

    let pred = predict_surface(&fit, None).unwrap();
    let y = &ds.response.values;
    for i in 0..ds.len() {
        assert_eq!(pred.predicted[i], pred.additive[i]);
        assert!((pred.fitted[i] - (y[i] - fit.residuals[i])).abs() < 1e-10);
    }
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let rss: f64 = y.iter().zip(&pred.predicted).map(|(a, b)| (a - b).powi(2)).sum();
    let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    assert!((1.0 - rss / tss - fit.r_squared).abs() < 1e-8);

    let cooks = cooks_distance(&fit);
    assert!(cooks.values.iter().all(|&d| d >= 0.0));
    let moran = residual_moran_check(&fit.residuals, &w, 199, 4).unwrap();
    assert!(moran.p_value > 0.0 && moran.p_value <= 1.0);
}

#[test]
fn lag_prediction_solves_reduced_form() {
    let side = 10;
    let pts = generate_grid(side).unwrap();
    let w = row_standardize(&knn_weights(&pts, 4).unwrap());
    let mut cfg = SimConfig::fixture(9);
    cfg.side = side;
    cfg.rho = 0.5;
    let (ds, _) = generate_sample(&cfg, &w).unwrap();
    let design = build_design(&ds, false).unwrap();
    let mc = MgwrConfig {
        lag: true,
        ..MgwrConfig::default()
    };
    let fit = mgwr_fit(&design, &Neighborhoods::new(&ds.points), Some(&w), &mc).unwrap();
    assert!(!fit.rho_unstable);
    let pred = predict_surface(&fit, Some(&w)).unwrap();
    let dense = DMatrix::<f64>::identity(100, 100) - w.to_dense() * fit.rho;
    let oracle = dense.lu().solve(&DVector::from_column_slice(&pred.additive)).unwrap();
    for i in 0..100 {
        assert!((pred.predicted[i] - oracle[i]).abs() < 1e-8);
    }
    let again = solve_sar(&w, fit.rho, &pred.additive).unwrap();
    assert_eq!(again, pred.predicted);
    assert!(mgwr_fit(&design, &Neighborhoods::new(&ds.points), None, &mc).is_err());
}


#[test]
fn planted_effect_share_is_recovered() {
    // beta_1 = 1 on the left 40% of a 20 x 20 grid and 0 elsewhere
    let side = 20;
    let mut shares = Vec::new();
    for seed in 1..=3 {
        let cfg = SimConfig {
            side,
            surfaces: vec![
                SurfaceSpec::Constant { level: 2.0 },
                SurfaceSpec::Step {
                    cut: 8.0,
                    inside: 1.0,
                    outside: 0.0,
                },
            ],
            noise_sd: 1.0,
            rho: 0.0,
            seed,
        };
        let pts = generate_grid(side).unwrap();
        let w = row_standardize(&knn_weights(&pts, 4).unwrap());
        let (ds, truth) = generate_sample(&cfg, &w).unwrap();
        let planted = truth.surfaces[1].iter().filter(|&&b| b > 0.0).count() as f64 / ds.len() as f64;
        assert!((planted - 0.4).abs() < 1e-12);
        let design = build_design(&ds, false).unwrap();
        let fit = mgwr_fit(&design, &Neighborhoods::new(&ds.points), None, &MgwrConfig::default()).unwrap();
        let inf = enp_and_inference(&fit, 0.05).unwrap();
        shares.push(inf.share_significant_positive[1]);
    }
    let mean = shares.iter().sum::<f64>() / shares.len() as f64;
    assert!((mean - 0.40).abs() <= 0.10, "shares {shares:?}");
}
