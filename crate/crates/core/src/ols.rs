//! Global ordinary least squares with the usual diagnostic table.

use nalgebra::{DMatrix, DVector};

use crate::data::DesignMatrix;
use crate::dist;
use crate::error::{Error, Result};

/// Relative size of an R diagonal below which a column counts as dependent.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    /// min, Q1, median, Q3, max (type-7 interpolation).
    pub residual_quantiles: [f64; 5],
    pub residual_std_error: f64,
    pub df_residual: usize,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_statistic: f64,
    pub f_p_value: f64,
    /// RSS / n.
    pub sigma2_mle: f64,
    pub rss: f64,
    pub hat_diagonal: Vec<f64>,
    pub n: usize,
    /// Predictor count, excluding the intercept.
    pub p: usize,
}

impl OlsFit {
    /// Number of estimated coefficients including the intercept.
    pub fn n_params(&self) -> usize {
        self.coefficients.len()
    }
}

/// F statistic and adjusted R² implied by R², predictor count and residual df.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitStats {
    pub f_statistic: f64,
    pub adj_r_squared: f64,
    pub n: usize,
}

pub fn derive_fit_stats(r_squared: f64, p: usize, df_residual: usize) -> Result<FitStats> {
    if p == 0 || df_residual == 0 {
        return Err(Error::InvalidArgument(
            "need at least one predictor and one residual degree of freedom".into(),
        ));
    }
    if r_squared >= 1.0 {
        return Err(Error::InfiniteF);
    }
    if !(0.0..1.0).contains(&r_squared) {
        return Err(Error::InvalidArgument(format!("R-squared {r_squared} outside [0, 1)")));
    }
    let n = p + df_residual + 1;
    let (pf, df) = (p as f64, df_residual as f64);
    Ok(FitStats {
        f_statistic: (r_squared / pf) / ((1.0 - r_squared) / df),
        adj_r_squared: 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / df,
        n,
    })
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn five_number_summary(values: &[f64]) -> [f64; 5] {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| quantile_sorted(&s, q))
}

/// Significance stars for a p-value: `***` < 0.001, `**` < 0.01, `*` < 0.05, `.` < 0.1.
pub fn significance_code(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else if p < 0.1 {
        "."
    } else {
        ""
    }
}

/// Thin QR of `x`, rejecting columns that are (numerically) linear combinations of earlier ones.
pub(crate) fn checked_qr(
    x: &DMatrix<f64>,
    names: &[String],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let qr = x.clone().qr();
    let r = qr.r();
    let mut bad = Vec::new();
    for j in 0..x.ncols() {
        let scale = x.column(j).norm();
        if r[(j, j)].abs() <= RANK_TOL * scale.max(f64::MIN_POSITIVE) {
            bad.push(names.get(j).cloned().unwrap_or_else(|| format!("column {j}")));
        }
    }
    if !bad.is_empty() {
        return Err(Error::RankDeficient(bad));
    }
    Ok((qr.q(), r))
}

pub fn ols_fit(design: &DesignMatrix) -> Result<OlsFit> {
    let n = design.n();
    let k = design.n_terms();
    let p = k - 1;
    if n <= k {
        return Err(Error::TooFewObservations {
            valid: n,
            required: k + 1,
        });
    }
    let (q, r) = checked_qr(&design.x, &design.names)?;
    let qty = q.transpose() * &design.y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient(design.names.clone()))?;
    let fitted: DVector<f64> = &design.x * &beta;
    let resid: DVector<f64> = &design.y - &fitted;
    let rss = resid.norm_squared();
    let df = n - k;
    let s2 = rss / df as f64;

    // (X'X)^{-1} = R^{-1} R^{-T}
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::RankDeficient(design.names.clone()))?;
    let xtx_inv = &rinv * rinv.transpose();
    let se: Vec<f64> = (0..k).map(|j| (s2 * xtx_inv[(j, j)]).sqrt()).collect();
    let t: Vec<f64> = beta.iter().zip(&se).map(|(b, s)| b / s).collect();
    let pv: Vec<f64> = t.iter().map(|&tv| dist::student_t_two_sided(tv, df as f64)).collect();

    let ybar = design.y.mean();
    let tss: f64 = design.y.iter().map(|v| (v - ybar).powi(2)).sum();
    let r2 = 1.0 - rss / tss;
    let adj = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / df as f64;
    let (f, fp) = if p == 0 {
        (f64::NAN, f64::NAN)
    } else if r2 >= 1.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = (r2 / p as f64) / ((1.0 - r2) / df as f64);
        (f, dist::f_sf(f, p as f64, df as f64))
    };
    let hat = (0..n).map(|i| q.row(i).norm_squared()).collect();
    let residuals: Vec<f64> = resid.iter().copied().collect();
    Ok(OlsFit {
        names: design.names.clone(),
        coefficients: beta.iter().copied().collect(),
        standard_errors: se,
        t_values: t,
        p_values: pv,
        fitted: fitted.iter().copied().collect(),
        residual_quantiles: five_number_summary(&residuals),
        residuals,
        residual_std_error: s2.sqrt(),
        df_residual: df,
        r_squared: r2,
        adj_r_squared: adj,
        f_statistic: f,
        f_p_value: fp,
        sigma2_mle: rss / n as f64,
        rss,
        hat_diagonal: hat,
        n,
        p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_design, Column, Dataset, PointSet};

    fn design(y: Vec<f64>, cols: Vec<Vec<f64>>) -> DesignMatrix {
        let n = y.len();
        let pts = PointSet::from_coords((0..n).map(|i| [i as f64, 0.0]).collect());
        let preds = cols
            .into_iter()
            .enumerate()
            .map(|(k, c)| Column::new(format!("x{}", k + 1), c))
            .collect();
        build_design(&Dataset::new(pts, Column::new("y", y), preds).unwrap(), false).unwrap()
    }

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y = x.iter().map(|v| 1.0 + 2.0 * v).collect();
        let fit = ols_fit(&design(y, vec![x])).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit.residual_std_error < 1e-12);
    }

    #[test]
    fn duplicate_column_is_rank_deficient() {
        let x: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        let y = (0..10).map(|i| (i % 3) as f64).collect();
        match ols_fit(&design(y, vec![x.clone(), x])) {
            Err(Error::RankDeficient(cols)) => assert_eq!(cols, vec!["x2".to_string()]),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let d = design(vec![1.0, 2.0], vec![vec![0.0, 1.0]]);
        assert!(matches!(ols_fit(&d), Err(Error::TooFewObservations { .. })));
    }

    #[test]
    fn published_fit_stats() {
        let s = derive_fit_stats(0.6308, 13, 1631).unwrap();
        assert!((s.f_statistic - 214.4).abs() < 0.1, "{}", s.f_statistic);
        assert!((s.adj_r_squared - 0.6279).abs() < 1e-4, "{}", s.adj_r_squared);
        assert_eq!(s.n, 1645);
    }

    #[test]
    fn null_fit_stats() {
        let s = derive_fit_stats(0.0, 13, 1631).unwrap();
        assert_eq!(s.f_statistic, 0.0);
        assert!(s.adj_r_squared < 0.0);
        assert!(matches!(derive_fit_stats(1.0, 13, 1631), Err(Error::InfiniteF)));
    }

    #[test]
    fn quantiles_type7() {
        assert_eq!(five_number_summary(&[4.0, 1.0, 3.0, 2.0]), [1.0, 1.75, 2.5, 3.25, 4.0]);
    }

    #[test]
    fn codes() {
        assert_eq!(significance_code(0.0005), "***");
        assert_eq!(significance_code(0.0399), "*");
        assert_eq!(significance_code(0.0615), ".");
        assert_eq!(significance_code(0.0013), "**");
        assert_eq!(significance_code(0.5), "");
    }
}
