//! Univariate kernel smoothers and the per-covariate operator recursion used
//! by backfitting.

use crate::local::{KernelSpec, Neighborhoods};
use crate::par;

/// One univariate local regression (no intercept) at location `i`.
struct UnivariateRow {
    beta: f64,
    hat: f64,
}

fn univariate_row(
    x: &[f64],
    r: &[f64],
    nb: &Neighborhoods,
    kernel: KernelSpec,
    bw: f64,
    i: usize,
) -> Option<UnivariateRow> {
    let w = nb.weights(i, bw, kernel);
    if w.len() < 2 {
        return None;
    }
    let mut sxx = 0.0;
    let mut sxr = 0.0;
    let mut w_ii = 0.0;
    for &(j, wij) in &w {
        if j == i {
            w_ii = wij;
        }
        sxx += wij * x[j] * x[j];
        sxr += wij * x[j] * r[j];
    }
    if !(sxx > 0.0) {
        return None;
    }
    Some(UnivariateRow {
        beta: sxr / sxx,
        hat: x[i] * x[i] * w_ii / sxx,
    })
}

/// Coefficients and smoother trace of `r` regressed locally on `x`.
pub(crate) struct UnivariateFit {
    pub beta: Vec<f64>,
    pub trace: f64,
    pub rss: f64,
}

pub(crate) fn univariate_fit(
    x: &[f64],
    r: &[f64],
    nb: &Neighborhoods,
    kernel: KernelSpec,
    bw: f64,
) -> Option<UnivariateFit> {
    let rows = par::map_range(x.len(), |i| univariate_row(x, r, nb, kernel, bw, i));
    let mut beta = Vec::with_capacity(x.len());
    let mut trace = 0.0;
    let mut rss = 0.0;
    for (i, row) in rows.into_iter().enumerate() {
        let row = row?;
        rss += (r[i] - x[i] * row.beta).powi(2);
        trace += row.hat;
        beta.push(row.beta);
    }
    Some(UnivariateFit { beta, trace, rss })
}

/// Row `i` of the univariate coefficient operator: `beta_i = sum_j q_ij r_j`.
fn operator_row(x: &[f64], nb: &Neighborhoods, kernel: KernelSpec, bw: f64, i: usize) -> Vec<(usize, f64)> {
    let w = nb.weights(i, bw, kernel);
    let sxx: f64 = w.iter().map(|&(j, wij)| wij * x[j] * x[j]).sum();
    w.into_iter().map(|(j, wij)| (j, wij * x[j] / sxx)).collect()
}

/// Dense row-major n x n matrix.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Square {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Square {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        par::map_range(self.n, |i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
    }
}

/// Per-covariate coefficient operators `C_k` (coefficients = `C_k y`) and the
/// overall smoother `S = sum_k diag(x_k) C_k`.
pub(crate) struct Operators {
    pub coef: Vec<Square>,
    pub total: Square,
}

impl Operators {
    /// Build from the rows of a single-bandwidth GWR operator `(j, C[., j])`.
    pub fn from_gwr(columns: &[Vec<f64>], rows: &[Vec<(usize, Vec<f64>)>]) -> Self {
        let n = rows.len();
        let k = columns.len();
        let mut coef = vec![Square::zeros(n); k];
        let mut total = Square::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            for (j, c) in row {
                for m in 0..k {
                    coef[m].data[i * n + j] = c[m];
                    total.data[i * n + j] += columns[m][i] * c[m];
                }
            }
        }
        Self { coef, total }
    }

    /// One backfitting update of covariate `k` at a frozen bandwidth:
    /// `C_k <- Q_k (I - S + diag(x_k) C_k)`. Returns the largest change in `S`.
    pub fn update(
        &mut self,
        k: usize,
        x: &[f64],
        nb: &Neighborhoods,
        kernel: KernelSpec,
        bw: f64,
    ) -> f64 {
        let n = self.total.n;
        let old = &self.coef[k];
        let total = &self.total;
        let mut new = Square::zeros(n);
        par::for_each_chunk(&mut new.data, n, |i, out| {
            for (j, q) in operator_row(x, nb, kernel, bw, i) {
                let s_row = total.row(j);
                let c_row = old.row(j);
                let xj = x[j];
                for (t, o) in out.iter_mut().enumerate() {
                    *o += q * (xj * c_row[t] - s_row[t]);
                }
                out[j] += q;
            }
        });
        let mut delta = 0.0f64;
        for i in 0..n {
            let xi = x[i];
            let base = i * n;
            for t in 0..n {
                let d = xi * (new.data[base + t] - old.data[base + t]);
                self.total.data[base + t] += d;
                delta = delta.max(d.abs());
            }
        }
        self.coef[k] = new;
        delta
    }

    /// Trace of `diag(x_k) C_k`.
    pub fn enp(&self, k: usize, x: &[f64]) -> f64 {
        let n = self.total.n;
        (0..n).map(|i| x[i] * self.coef[k].data[i * n + i]).sum()
    }

    pub fn hat_diagonal(&self) -> Vec<f64> {
        let n = self.total.n;
        (0..n).map(|i| self.total.data[i * n + i]).collect()
    }

    /// Row sums of squares of `C_k`: coefficient variance per unit error variance.
    pub fn coef_variance_factor(&self, k: usize) -> Vec<f64> {
        let c = &self.coef[k];
        (0..c.n).map(|i| c.row(i).iter().map(|v| v * v).sum()).collect()
    }
}

/// Approximate per-location variance factors for the vector-only path.
pub(crate) fn univariate_variance_factor(
    x: &[f64],
    nb: &Neighborhoods,
    kernel: KernelSpec,
    bw: f64,
) -> Vec<f64> {
    par::map_range(x.len(), |i| {
        operator_row(x, nb, kernel, bw, i).iter().map(|(_, q)| q * q).sum()
    })
}

/// Univariate hat diagonal at a frozen bandwidth.
pub(crate) fn univariate_hat(
    x: &[f64],
    nb: &Neighborhoods,
    kernel: KernelSpec,
    bw: f64,
) -> Vec<f64> {
    par::map_range(x.len(), |i| {
        operator_row(x, nb, kernel, bw, i)
            .iter()
            .find(|(j, _)| *j == i)
            .map_or(0.0, |(_, q)| q * x[i])
    })
}
