//! Local significance, influence and residual autocorrelation checks.

use serde::Serialize;

use crate::autocorr::{permutation_morans_i, Alternative, MoranResult};
use crate::dist::student_t_upper_quantile;
use crate::error::{Error, Result};
use crate::ols::OlsFit;
use crate::weights::SpatialWeights;

use super::MgwrFit;

/// Per-covariate multiple-testing adjusted significance of the local t-values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalInference {
    pub alpha: f64,
    /// Residual degrees of freedom used for the critical values.
    pub df: f64,
    /// `alpha / ENP_k`.
    pub adjusted_alpha: Vec<f64>,
    /// Two-sided critical |t| at the adjusted level.
    pub t_critical: Vec<f64>,
    /// `significant[k][i]`: location `i` is significant for covariate `k`.
    pub significant: Vec<Vec<bool>>,
    pub share_significant: Vec<f64>,
    /// Share of locations significant with a positive coefficient.
    pub share_significant_positive: Vec<f64>,
}

pub fn enp_and_inference(fit: &MgwrFit, alpha: f64) -> Result<LocalInference> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    let df = fit.residual_df();
    if !(df > 0.0) {
        return Err(Error::NonPositiveDf(df));
    }
    let n = fit.n();
    let k_terms = fit.enp_per_covariate.len();
    let mut adjusted = Vec::with_capacity(k_terms);
    let mut crit = Vec::with_capacity(k_terms);
    let mut significant = Vec::with_capacity(k_terms);
    let mut share = Vec::with_capacity(k_terms);
    let mut share_pos = Vec::with_capacity(k_terms);
    for k in 0..k_terms {
        let a = alpha / fit.enp_per_covariate[k];
        let t = student_t_upper_quantile(a / 2.0, df);
        let mask: Vec<bool> = (0..n).map(|i| fit.local_t_values[(i, k)].abs() > t).collect();
        let hits = mask.iter().filter(|&&m| m).count();
        let pos = (0..n)
            .filter(|&i| mask[i] && fit.coefficient_surfaces[(i, k)] > 0.0)
            .count();
        adjusted.push(a);
        crit.push(t);
        share.push(hits as f64 / n as f64);
        share_pos.push(pos as f64 / n as f64);
        significant.push(mask);
    }
    Ok(LocalInference {
        alpha,
        df,
        adjusted_alpha: adjusted,
        t_critical: crit,
        significant,
        share_significant: share,
        share_significant_positive: share_pos,
    })
}

/// Cook's distance per observation; `infinite` lists observations with `h_ii = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CooksDistance {
    pub values: Vec<f64>,
    pub infinite: Vec<usize>,
}

/// `D_i = e_i^2 h_ii / (p sigma^2 (1 - h_ii)^2)`.
pub(crate) fn cooks_from_parts(residuals: &[f64], hat: &[f64], params: f64, sigma2: f64) -> CooksDistance {
    let mut infinite = Vec::new();
    let values = residuals
        .iter()
        .zip(hat)
        .enumerate()
        .map(|(i, (&e, &h))| {
            if h >= 1.0 - 1e-12 {
                infinite.push(i);
                f64::INFINITY
            } else if e == 0.0 {
                0.0
            } else {
                e * e * h / (params * sigma2 * (1.0 - h).powi(2))
            }
        })
        .collect();
    CooksDistance { values, infinite }
}

pub fn cooks_distance(fit: &MgwrFit) -> CooksDistance {
    cooks_from_parts(&fit.residuals, &fit.hat_diagonal, fit.enp_total, fit.sigma2)
}

/// Textbook Cook's distance of a global OLS fit.
pub fn cooks_distance_ols(fit: &OlsFit) -> CooksDistance {
    let sigma2 = fit.residual_std_error.powi(2);
    cooks_from_parts(&fit.residuals, &fit.hat_diagonal, fit.n_params() as f64, sigma2)
}

/// Permutation Moran's I of model residuals (positive-tail test).
pub fn residual_moran_check(
    residuals: &[f64],
    w: &SpatialWeights,
    n_perm: usize,
    seed: u64,
) -> Result<MoranResult> {
    permutation_morans_i(residuals, w, n_perm, seed, Alternative::Greater)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub residual_moran: MoranResult,
    pub cooks_distance: CooksDistance,
    pub inference: LocalInference,
}

pub fn diagnostics_report(
    fit: &MgwrFit,
    w: &SpatialWeights,
    alpha: f64,
    n_perm: usize,
    seed: u64,
) -> Result<DiagnosticsReport> {
    Ok(DiagnosticsReport {
        residual_moran: residual_moran_check(&fit.residuals, w, n_perm, seed)?,
        cooks_distance: cooks_distance(fit),
        inference: enp_and_inference(fit, alpha)?,
    })
}
