use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::data::DesignMatrix;
use crate::error::{Error, Result};
use crate::par;

use super::kernel::{BandwidthMode, KernelSpec};
use super::neighbors::Neighborhoods;
use super::search::{golden_section, golden_section_integer, SearchResult, CONTINUOUS_REL_TOL};

/// Corrected AIC of a linear smoother with `trace` effective parameters.
///
/// `2n ln(sigma) + n ln(2 pi) + n (n + tr) / (n - 2 - tr)` with `sigma^2 = rss / n`.
pub fn aicc(n: usize, rss: f64, trace: f64) -> Result<f64> {
    let nf = n as f64;
    if trace >= nf - 2.0 {
        return Err(Error::AiccUndefined { trace, n });
    }
    let sigma2 = rss / nf;
    Ok(nf * sigma2.ln() + nf * (2.0 * PI).ln() + nf * (nf + trace) / (nf - 2.0 - trace))
}

/// Result of the kernel-weighted least-squares problem at one location.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolve {
    pub coefficients: Vec<f64>,
    /// i-th diagonal of the smoother, `x_i' (X'WX)^-1 x_i w_ii`.
    pub hat: f64,
    /// Diagonal of `C C'` where `C = (X'WX)^-1 X'W`; scale by sigma^2 for variances.
    pub cct_diag: Vec<f64>,
    /// Rows of `C` restricted to the kernel support: `(j, C[., j])`.
    pub operator: Option<Vec<(usize, Vec<f64>)>>,
}

/// Solve the weighted problem centred on observation `i`.
pub(crate) fn solve_location(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    nb: &Neighborhoods,
    kernel: KernelSpec,
    bw: f64,
    i: usize,
    keep_operator: bool,
) -> Option<LocalSolve> {
    let k = x.ncols();
    let w = nb.weights(i, bw, kernel);
    if w.len() < k + 1 {
        return None;
    }
    let mut xtwx = DMatrix::<f64>::zeros(k, k);
    let mut xtw2x = DMatrix::<f64>::zeros(k, k);
    let mut xtwy = DVector::<f64>::zeros(k);
    let mut w_ii = 0.0;
    for &(j, wij) in &w {
        if j == i {
            w_ii = wij;
        }
        for a in 0..k {
            let xa = x[(j, a)];
            xtwy[a] += wij * xa * y[j];
            for b in 0..=a {
                let v = xa * x[(j, b)];
                xtwx[(a, b)] += wij * v;
                xtw2x[(a, b)] += wij * wij * v;
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            xtwx[(b, a)] = xtwx[(a, b)];
            xtw2x[(b, a)] = xtw2x[(a, b)];
        }
    }
    let chol = xtwx.cholesky()?;
    let inv = chol.inverse();
    let beta = &inv * xtwy;
    let xi = x.row(i).transpose();
    let hat = (xi.transpose() * &inv * &xi)[(0, 0)] * w_ii;
    let cct = &inv * xtw2x * &inv;
    let operator = keep_operator.then(|| {
        w.iter()
            .map(|&(j, wij)| {
                let col = &inv * x.row(j).transpose() * wij;
                (j, col.iter().copied().collect())
            })
            .collect()
    });
    if !beta.iter().all(|v| v.is_finite()) || !hat.is_finite() {
        return None;
    }
    Some(LocalSolve {
        coefficients: beta.iter().copied().collect(),
        hat,
        cct_diag: (0..k).map(|a| cct[(a, a)]).collect(),
        operator,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GwrFit {
    pub names: Vec<String>,
    pub kernel: KernelSpec,
    pub bandwidth: f64,
    /// n x (p+1) local coefficient surface.
    pub local_coefficients: DMatrix<f64>,
    pub local_standard_errors: DMatrix<f64>,
    pub local_t_values: DMatrix<f64>,
    pub hat_diagonal: Vec<f64>,
    pub trace_s: f64,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub sigma2_mle: f64,
    pub aicc: f64,
    pub r_squared: f64,
    pub adj_r_squared: f64,
}

impl GwrFit {
    pub fn n(&self) -> usize {
        self.fitted.len()
    }
}

fn collect_solves(
    design: &DesignMatrix,
    nb: &Neighborhoods,
    kernel: KernelSpec,
    bw: f64,
    keep_operator: bool,
) -> Result<Vec<LocalSolve>> {
    let n = design.n();
    if nb.len() != n {
        return Err(Error::LengthMismatch {
            what: "locations".into(),
            got: nb.len(),
            expected: n,
        });
    }
    let solves = par::map_range(n, |i| {
        solve_location(&design.x, &design.y, nb, kernel, bw, i, keep_operator)
    });
    let bad: Vec<String> = solves
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_none())
        .map(|(i, _)| nb.points().ids[i].clone())
        .collect();
    if !bad.is_empty() {
        return Err(Error::InsufficientNeighbors(bad));
    }
    Ok(solves.into_iter().map(Option::unwrap).collect())
}

/// Residual sum of squares and smoother trace at a bandwidth.
fn rss_and_trace(design: &DesignMatrix, solves: &[LocalSolve]) -> (f64, f64) {
    let mut rss = 0.0;
    let mut tr = 0.0;
    for (i, s) in solves.iter().enumerate() {
        let fit: f64 = design.x.row(i).iter().zip(&s.coefficients).map(|(a, b)| a * b).sum();
        rss += (design.y[i] - fit).powi(2);
        tr += s.hat;
    }
    (rss, tr)
}

/// AICc of the GWR fit at `bw`, or +inf where the fit is undefined.
pub fn gwr_score(design: &DesignMatrix, nb: &Neighborhoods, kernel: KernelSpec, bw: f64) -> f64 {
    match collect_solves(design, nb, kernel, bw, false) {
        Ok(solves) => {
            let (rss, tr) = rss_and_trace(design, &solves);
            aicc(design.n(), rss, tr).unwrap_or(f64::INFINITY)
        }
        Err(_) => f64::INFINITY,
    }
}

/// Default bandwidth search interval for a design with `n_terms` columns.
pub(crate) fn default_interval(nb: &Neighborhoods, kernel: KernelSpec, n_terms: usize) -> (f64, f64) {
    match kernel.mode {
        BandwidthMode::Adaptive => ((n_terms + 1) as f64, nb.len() as f64),
        BandwidthMode::Fixed => nb.distance_range(),
    }
}

/// Minimise an objective over bandwidths of the given mode.
pub(crate) fn search_bandwidth(
    mode: BandwidthMode,
    interval: (f64, f64),
    mut objective: impl FnMut(f64) -> f64,
) -> Result<SearchResult> {
    match mode {
        BandwidthMode::Adaptive => golden_section_integer(
            |k| objective(k as f64),
            interval.0.ceil() as usize,
            interval.1.floor() as usize,
        ),
        BandwidthMode::Fixed => golden_section(objective, interval.0, interval.1, CONTINUOUS_REL_TOL),
    }
}

/// Golden-section AICc bandwidth for single-bandwidth GWR.
pub fn select_gwr_bandwidth(
    design: &DesignMatrix,
    nb: &Neighborhoods,
    kernel: KernelSpec,
    interval: Option<(f64, f64)>,
) -> Result<SearchResult> {
    let interval = interval.unwrap_or_else(|| default_interval(nb, kernel, design.n_terms()));
    search_bandwidth(kernel.mode, interval, |bw| gwr_score(design, nb, kernel, bw))
}

pub fn gwr_fit(
    design: &DesignMatrix,
    nb: &Neighborhoods,
    kernel: KernelSpec,
    bw: f64,
) -> Result<GwrFit> {
    let n = design.n();
    let k = design.n_terms();
    kernel.validate_bandwidth(bw, k, n)?;
    let solves = collect_solves(design, nb, kernel, bw, false)?;
    let (rss, tr) = rss_and_trace(design, &solves);
    let aicc = aicc(n, rss, tr)?;
    let sigma2 = rss / (n as f64 - tr);
    let mut coef = DMatrix::zeros(n, k);
    let mut se = DMatrix::zeros(n, k);
    for (i, s) in solves.iter().enumerate() {
        for a in 0..k {
            coef[(i, a)] = s.coefficients[a];
            se[(i, a)] = (sigma2 * s.cct_diag[a]).sqrt();
        }
    }
    let tvals = coef.component_div(&se);
    let fitted: Vec<f64> = (0..n)
        .map(|i| design.x.row(i).iter().zip(coef.row(i).iter()).map(|(a, b)| a * b).sum())
        .collect();
    let residuals: Vec<f64> = design.y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let ybar = design.y.mean();
    let tss: f64 = design.y.iter().map(|v| (v - ybar).powi(2)).sum();
    let r2 = 1.0 - rss / tss;
    Ok(GwrFit {
        names: design.names.clone(),
        kernel,
        bandwidth: bw,
        local_coefficients: coef,
        local_standard_errors: se,
        local_t_values: tvals,
        hat_diagonal: solves.iter().map(|s| s.hat).collect(),
        trace_s: tr,
        fitted,
        residuals,
        rss,
        sigma2_mle: rss / n as f64,
        aicc,
        r_squared: r2,
        adj_r_squared: 1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - tr - 1.0),
    })
}
