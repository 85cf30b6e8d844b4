//! Multiscale GWR with per-covariate bandwidths and an optional spatial lag.
//!
//! Calibration runs in two stages. Stage one backfits the additive terms
//! `f_k = x_k * beta_k(u, v)`, re-selecting each covariate's bandwidth by
//! golden-section AICc on its partial residual, until the relative change of
//! the additive predictor drops below the SOC tolerance. Stage two freezes the
//! bandwidths, treats the converged backfitting map as a linear smoother `S`,
//! and estimates the lag coefficient by two-stage least squares of `(I - S) y`
//! on `(I - S) W y` with instruments `[1, X, WX, W^2 X]`. The final surfaces
//! are the frozen smoother applied to `y - rho W y`.

mod backfit;
mod diagnostics;
mod predict;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::DesignMatrix;
use crate::error::{Error, Result};
use crate::local::{
    self, aicc, gwr_fit, select_gwr_bandwidth, BandwidthMode, KernelSpec, Neighborhoods,
};
use crate::ols::checked_qr;
use crate::par;
use crate::weights::{SpatialWeights, Standardization};

use backfit::{univariate_fit, univariate_hat, univariate_variance_factor, Operators};

pub use diagnostics::{
    cooks_distance, cooks_distance_ols, diagnostics_report, enp_and_inference,
    residual_moran_check, CooksDistance, DiagnosticsReport, LocalInference,
};
pub use predict::{format_bin_label, predict_surface, quantile_bins, Prediction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MgwrConfig {
    pub kernel: KernelSpec,
    /// Estimate `rho` for the `W y` term.
    pub lag: bool,
    pub soc_tolerance: f64,
    pub max_iterations: usize,
    /// Per-term bandwidths (intercept first); skips the search when set.
    pub bandwidths: Option<Vec<f64>>,
    /// Bandwidth search interval; defaults depend on the kernel mode.
    pub interval: Option<(f64, f64)>,
    /// Largest n for which per-covariate operators are held explicitly.
    pub exact_hat_max_n: usize,
    /// Convergence tolerance of the frozen-bandwidth smoother.
    pub operator_tolerance: f64,
}

impl Default for MgwrConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::default(),
            lag: false,
            soc_tolerance: 1e-5,
            max_iterations: 200,
            bandwidths: None,
            interval: None,
            exact_hat_max_n: 5_000,
            operator_tolerance: 1e-10,
        }
    }
}

/// How ENP and local standard errors were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HatPath {
    /// Traces of the explicitly accumulated per-covariate operators.
    Exact,
    /// Univariate smoother traces at the final bandwidths.
    Approximate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MgwrFit {
    pub names: Vec<String>,
    pub kernel: KernelSpec,
    pub bandwidths: Vec<f64>,
    /// n x K surfaces `beta_k(u_i, v_i)`, intercept first.
    pub coefficient_surfaces: DMatrix<f64>,
    /// n x K additive terms `x_ik beta_k(u_i, v_i)`.
    pub terms: DMatrix<f64>,
    pub lag: bool,
    /// Spatial autoregressive coefficient; 0 when the lag is disabled.
    pub rho: f64,
    /// `|rho| >= 1`: the reduced form is undefined.
    pub rho_unstable: bool,
    /// `rho * W y`.
    pub lag_term: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    /// RSS / n.
    pub sigma2_mle: f64,
    /// RSS / (n - enp_total).
    pub sigma2: f64,
    pub aicc: f64,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub enp_per_covariate: Vec<f64>,
    pub enp_total: f64,
    pub hat_diagonal: Vec<f64>,
    pub hat_path: HatPath,
    pub local_standard_errors: DMatrix<f64>,
    pub local_t_values: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub soc: f64,
    pub initial_bandwidth: f64,
    pub initial_rss: f64,
    /// RSS after each outer backfitting iteration of stage one.
    pub rss_history: Vec<f64>,
}

impl MgwrFit {
    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    /// Sum of the additive terms at each location.
    pub fn additive(&self) -> Vec<f64> {
        self.terms.row_iter().map(|r| r.sum()).collect()
    }

    /// Residual degrees of freedom `n - enp_total`.
    pub fn residual_df(&self) -> f64 {
        self.n() as f64 - self.enp_total
    }
}

fn column(x: &DMatrix<f64>, k: usize) -> Vec<f64> {
    x.column(k).iter().copied().collect()
}

fn soc_f(old: &[Vec<f64>], new: &[Vec<f64>]) -> f64 {
    let n = new[0].len();
    let mut num = 0.0;
    for (a, b) in old.iter().zip(new) {
        num += a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>();
    }
    let den: f64 = (0..n)
        .map(|i| new.iter().map(|t| t[i]).sum::<f64>().powi(2))
        .sum();
    (num / den).sqrt()
}

struct Stage1 {
    bandwidths: Vec<f64>,
    terms: Vec<Vec<f64>>,
    coefficients: Vec<Vec<f64>>,
    converged: bool,
    iterations: usize,
    soc: f64,
    rss_history: Vec<f64>,
}

/// Vector backfitting. With `frozen` bandwidths it is a linear map of `y`.
#[allow(clippy::too_many_arguments)]
fn backfit(
    columns: &[Vec<f64>],
    y: &[f64],
    init: Vec<Vec<f64>>,
    nb: &Neighborhoods,
    kernel: KernelSpec,
    frozen: Option<&[f64]>,
    interval: (f64, f64),
    tolerance: f64,
    max_iterations: usize,
) -> Result<Stage1> {
    let n = y.len();
    let k_terms = columns.len();
    let mut terms = init;
    let mut coefficients = vec![vec![0.0; n]; k_terms];
    let mut resid: Vec<f64> = (0..n)
        .map(|i| y[i] - terms.iter().map(|t| t[i]).sum::<f64>())
        .collect();
    let mut bandwidths = frozen.map_or_else(|| vec![f64::NAN; k_terms], <[f64]>::to_vec);
    let mut rss_history = Vec::new();
    let mut soc = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iterations {
        iterations += 1;
        let old = terms.clone();
        for k in 0..k_terms {
            let x = &columns[k];
            let partial: Vec<f64> = (0..n).map(|i| terms[k][i] + resid[i]).collect();
            if frozen.is_none() {
                let found = local::gwr::search_bandwidth(kernel.mode, interval, |bw| {
                    univariate_fit(x, &partial, nb, kernel, bw)
                        .and_then(|f| aicc(n, f.rss, f.trace).ok())
                        .unwrap_or(f64::INFINITY)
                })?;
                bandwidths[k] = found.argmin;
            }
            let fit = univariate_fit(x, &partial, nb, kernel, bandwidths[k])
                .ok_or_else(|| Error::InsufficientNeighbors(vec![format!("term {k}")]))?;
            for i in 0..n {
                terms[k][i] = x[i] * fit.beta[i];
                resid[i] = partial[i] - terms[k][i];
            }
            coefficients[k] = fit.beta;
        }
        rss_history.push(resid.iter().map(|e| e * e).sum());
        soc = soc_f(&old, &terms);
        // NaN only when every term is identically zero, which is a fixed point
        if !(soc >= tolerance) {
            converged = true;
            break;
        }
    }
    Ok(Stage1 {
        bandwidths,
        terms,
        coefficients,
        converged,
        iterations,
        soc,
        rss_history,
    })
}

/// Two-stage least squares of `e` on `d` with instrument matrix `z`.
fn two_stage_rho(e: &[f64], d: &[f64], z: &DMatrix<f64>) -> Result<f64> {
    let names: Vec<String> = (0..z.ncols()).map(|j| format!("instrument {j}")).collect();
    // drop instruments that duplicate earlier ones (e.g. W 1 = 1)
    let mut keep: Vec<usize> = Vec::new();
    for j in 0..z.ncols() {
        let mut cols = keep.clone();
        cols.push(j);
        let sub = z.select_columns(&cols);
        if checked_qr(&sub, &names).is_ok() {
            keep.push(j);
        }
    }
    let sub = z.select_columns(&keep);
    let (q, _) = checked_qr(&sub, &names).map_err(|_| Error::SingularInstruments)?;
    let d = DVector::from_column_slice(d);
    let e = DVector::from_column_slice(e);
    let d_hat = &q * (q.transpose() * &d);
    let den = d_hat.dot(&d);
    if !(den.abs() > 1e-12 * d.norm_squared().max(f64::MIN_POSITIVE)) {
        return Err(Error::SingularInstruments);
    }
    Ok(d_hat.dot(&e) / den)
}

fn instruments(design: &DesignMatrix, w: &SpatialWeights) -> DMatrix<f64> {
    let n = design.n();
    let p = design.n_predictors();
    let mut z = DMatrix::zeros(n, 1 + 3 * p);
    z.column_mut(0).fill(1.0);
    for k in 0..p {
        let x = column(&design.x, k + 1);
        let wx = w.lag(&x);
        let wwx = w.lag(&wx);
        for i in 0..n {
            z[(i, 1 + k)] = x[i];
            z[(i, 1 + p + k)] = wx[i];
            z[(i, 1 + 2 * p + k)] = wwx[i];
        }
    }
    z
}

/// Apply the frozen smoother to `v`, returning per-term contributions.
enum Smoother {
    Exact(Operators),
    Iterative {
        bandwidths: Vec<f64>,
        init: Vec<Vec<f64>>,
    },
}

impl Smoother {
    fn coefficients(
        &self,
        columns: &[Vec<f64>],
        v: &[f64],
        nb: &Neighborhoods,
        config: &MgwrConfig,
        interval: (f64, f64),
    ) -> Result<Vec<Vec<f64>>> {
        match self {
            Smoother::Exact(ops) => Ok(ops.coef.iter().map(|c| c.matvec(v)).collect()),
            Smoother::Iterative { bandwidths, init } => {
                let run = backfit(
                    columns,
                    v,
                    init.clone(),
                    nb,
                    config.kernel,
                    Some(bandwidths),
                    interval,
                    config.operator_tolerance,
                    config.max_iterations.max(1000),
                )?;
                Ok(run.coefficients)
            }
        }
    }
}

fn terms_from_coefficients(columns: &[Vec<f64>], coef: &[Vec<f64>]) -> Vec<Vec<f64>> {
    coef.iter()
        .zip(columns)
        .map(|(b, x)| b.iter().zip(x).map(|(u, v)| u * v).collect())
        .collect()
}

/// Calibrate a (spatial-lag) multiscale GWR.
///
/// `w` is required when `config.lag` is set and must be row-standardized.
pub fn mgwr_fit(
    design: &DesignMatrix,
    nb: &Neighborhoods,
    w: Option<&SpatialWeights>,
    config: &MgwrConfig,
) -> Result<MgwrFit> {
    let n = design.n();
    let k_terms = design.n_terms();
    if nb.len() != n {
        return Err(Error::LengthMismatch {
            what: "locations".into(),
            got: nb.len(),
            expected: n,
        });
    }
    if config.lag {
        let w = w.ok_or_else(|| Error::InvalidArgument("spatial lag requires weights".into()))?;
        if w.n() != n {
            return Err(Error::LengthMismatch {
                what: "weights".into(),
                got: w.n(),
                expected: n,
            });
        }
        if w.standardization() != Standardization::RowStandardized {
            return Err(Error::NotRowStandardized);
        }
    }
    if let Some(bws) = &config.bandwidths {
        if bws.len() != k_terms {
            return Err(Error::LengthMismatch {
                what: "bandwidths".into(),
                got: bws.len(),
                expected: k_terms,
            });
        }
        for &bw in bws {
            if config.kernel.mode == BandwidthMode::Fixed && !(bw > 0.0) {
                return Err(Error::InvalidArgument(format!("bandwidth {bw}")));
            }
        }
    }
    let columns: Vec<Vec<f64>> = (0..k_terms).map(|k| column(&design.x, k)).collect();
    let y: Vec<f64> = design.y.iter().copied().collect();
    let interval = config
        .interval
        .unwrap_or_else(|| local::gwr::default_interval(nb, config.kernel, k_terms));

    // initial single-bandwidth GWR
    let init_bw = match &config.bandwidths {
        Some(bws) if config.kernel.mode == BandwidthMode::Adaptive => {
            bws.iter().fold(0.0f64, |a, &b| a.max(b)).max((k_terms + 1) as f64)
        }
        Some(bws) => bws.iter().fold(0.0f64, |a, &b| a.max(b)),
        None => select_gwr_bandwidth(design, nb, config.kernel, Some(interval))?.argmin,
    };
    let init_bw = match gwr_fit(design, nb, config.kernel, init_bw) {
        Ok(_) => init_bw,
        Err(_) => select_gwr_bandwidth(design, nb, config.kernel, Some(interval))?.argmin,
    };
    let gwr = gwr_fit(design, nb, config.kernel, init_bw)?;
    let init_terms: Vec<Vec<f64>> = (0..k_terms)
        .map(|k| (0..n).map(|i| columns[k][i] * gwr.local_coefficients[(i, k)]).collect())
        .collect();

    let stage1 = backfit(
        &columns,
        &y,
        init_terms.clone(),
        nb,
        config.kernel,
        config.bandwidths.as_deref(),
        interval,
        config.soc_tolerance,
        config.max_iterations,
    )?;
    let bandwidths = stage1.bandwidths.clone();

    // frozen-bandwidth smoother
    let exact = n <= config.exact_hat_max_n;
    let smoother = if exact {
        let rows = par::map_range(n, |i| {
            local::gwr::solve_location(&design.x, &design.y, nb, config.kernel, init_bw, i, true)
                .and_then(|s| s.operator)
                .unwrap_or_default()
        });
        let mut ops = Operators::from_gwr(&columns, &rows);
        let budget = config.max_iterations.max(1000);
        for _ in 0..budget {
            let mut delta = 0.0f64;
            for k in 0..k_terms {
                delta = delta.max(ops.update(k, &columns[k], nb, config.kernel, bandwidths[k]));
            }
            let scale = ops.total.data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            if delta <= config.operator_tolerance * scale {
                break;
            }
        }
        Smoother::Exact(ops)
    } else {
        Smoother::Iterative {
            bandwidths: bandwidths.clone(),
            init: stage1.terms.clone(),
        }
    };

    // stage two: lag coefficient
    let (rho, lag_term, response) = match (config.lag, w) {
        (true, Some(w)) => {
            let wy = w.lag(&y);
            let coef_y = smoother.coefficients(&columns, &y, nb, config, interval)?;
            let coef_wy = match &smoother {
                Smoother::Iterative { bandwidths, .. } => Smoother::Iterative {
                    bandwidths: bandwidths.clone(),
                    init: vec![vec![0.0; n]; k_terms],
                }
                .coefficients(&columns, &wy, nb, config, interval)?,
                exact => exact.coefficients(&columns, &wy, nb, config, interval)?,
            };
            let sy = terms_from_coefficients(&columns, &coef_y);
            let swy = terms_from_coefficients(&columns, &coef_wy);
            let e: Vec<f64> = (0..n).map(|i| y[i] - sy.iter().map(|t| t[i]).sum::<f64>()).collect();
            let d: Vec<f64> = (0..n).map(|i| wy[i] - swy.iter().map(|t| t[i]).sum::<f64>()).collect();
            let rho = two_stage_rho(&e, &d, &instruments(design, w))?;
            let lag_term: Vec<f64> = wy.iter().map(|v| rho * v).collect();
            let response: Vec<f64> = y.iter().zip(&lag_term).map(|(a, b)| a - b).collect();
            (rho, lag_term, response)
        }
        _ => (0.0, vec![0.0; n], y.clone()),
    };

    let coef = smoother.coefficients(&columns, &response, nb, config, interval)?;
    let terms = terms_from_coefficients(&columns, &coef);
    let residuals: Vec<f64> = (0..n)
        .map(|i| response[i] - terms.iter().map(|t| t[i]).sum::<f64>())
        .collect();
    let fitted: Vec<f64> = y.iter().zip(&residuals).map(|(a, b)| a - b).collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();

    let (enp, hat_diagonal, var_factor, hat_path) = match &smoother {
        Smoother::Exact(ops) => (
            (0..k_terms).map(|k| ops.enp(k, &columns[k])).collect::<Vec<_>>(),
            ops.hat_diagonal(),
            (0..k_terms).map(|k| ops.coef_variance_factor(k)).collect::<Vec<_>>(),
            HatPath::Exact,
        ),
        Smoother::Iterative { bandwidths, .. } => {
            let hats: Vec<Vec<f64>> = (0..k_terms)
                .map(|k| univariate_hat(&columns[k], nb, config.kernel, bandwidths[k]))
                .collect();
            let enp = hats.iter().map(|h| h.iter().sum()).collect();
            let diag = (0..n).map(|i| hats.iter().map(|h| h[i]).sum()).collect();
            let vf = (0..k_terms)
                .map(|k| univariate_variance_factor(&columns[k], nb, config.kernel, bandwidths[k]))
                .collect();
            (enp, diag, vf, HatPath::Approximate)
        }
    };
    let enp_total: f64 = enp.iter().sum();
    let nf = n as f64;
    let sigma2 = rss / (nf - enp_total);
    let aicc_trace = enp_total + if config.lag { 1.0 } else { 0.0 };
    let aicc_value = aicc(n, rss, aicc_trace).unwrap_or(f64::NAN);
    let ybar = y.iter().sum::<f64>() / nf;
    let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let r2 = 1.0 - rss / tss;

    let mut surfaces = DMatrix::zeros(n, k_terms);
    let mut term_mat = DMatrix::zeros(n, k_terms);
    let mut se = DMatrix::zeros(n, k_terms);
    for k in 0..k_terms {
        for i in 0..n {
            surfaces[(i, k)] = coef[k][i];
            term_mat[(i, k)] = terms[k][i];
            se[(i, k)] = (sigma2 * var_factor[k][i]).sqrt();
        }
    }
    let tvals = surfaces.component_div(&se);

    Ok(MgwrFit {
        names: design.names.clone(),
        kernel: config.kernel,
        bandwidths,
        coefficient_surfaces: surfaces,
        terms: term_mat,
        lag: config.lag,
        rho,
        rho_unstable: rho.abs() >= 1.0,
        lag_term,
        fitted,
        residuals,
        rss,
        sigma2_mle: rss / nf,
        sigma2,
        aicc: aicc_value,
        r_squared: r2,
        adj_r_squared: 1.0 - (1.0 - r2) * (nf - 1.0) / (nf - enp_total - 1.0),
        enp_per_covariate: enp,
        enp_total,
        hat_diagonal,
        hat_path,
        local_standard_errors: se,
        local_t_values: tvals,
        converged: stage1.converged,
        iterations: stage1.iterations,
        soc: stage1.soc,
        initial_bandwidth: init_bw,
        initial_rss: gwr.rss,
        rss_history: stage1.rss_history,
    })
}
