//! In-sample predicted response surfaces and their map legend bins.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ols::quantile_sorted;
use crate::weights::{solve_sar, SpatialWeights};

use super::MgwrFit;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    /// `sum_k x_ik beta_k(u_i, v_i)`.
    pub additive: Vec<f64>,
    /// `(I - rho W)^-1` applied to the additive part.
    pub predicted: Vec<f64>,
    /// `y - residual`, i.e. `rho (W y)_i + additive_i`.
    pub fitted: Vec<f64>,
    /// Interior quintile edges of `predicted`.
    pub bin_edges: Vec<f64>,
    /// Bin index in `0..5` per location.
    pub bins: Vec<usize>,
    pub bin_labels: Vec<String>,
}

/// Predicted response at the calibration locations.
///
/// `w` is needed only when the fit carries a lag term.
pub fn predict_surface(fit: &MgwrFit, w: Option<&SpatialWeights>) -> Result<Prediction> {
    let additive = fit.additive();
    let predicted = if fit.lag && fit.rho != 0.0 {
        if fit.rho.abs() >= 1.0 {
            return Err(Error::UnstableRho(fit.rho));
        }
        let w = w.ok_or_else(|| Error::InvalidArgument("lag prediction requires weights".into()))?;
        solve_sar(w, fit.rho, &additive)?
    } else {
        additive.clone()
    };
    let (bin_edges, bins) = quantile_bins(&predicted, 5);
    let bin_labels = bin_labels(&bin_edges);
    Ok(Prediction {
        additive,
        predicted,
        fitted: fit.fitted.clone(),
        bin_edges,
        bins,
        bin_labels,
    })
}

/// Interior type-7 quantile edges splitting `values` into `count` bins, and
/// the bin of each value (upper edges are inclusive).
pub fn quantile_bins(values: &[f64], count: usize) -> (Vec<f64>, Vec<usize>) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let edges: Vec<f64> = (1..count)
        .map(|q| quantile_sorted(&sorted, q as f64 / count as f64))
        .collect();
    let bins = values
        .iter()
        .map(|v| edges.iter().take_while(|&&e| *v > e).count())
        .collect();
    (edges, bins)
}

fn currency(v: f64) -> String {
    let rounded = v.abs().round() as u64;
    let digits = rounded.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    if v < 0.0 && rounded > 0 {
        format!("-${out}")
    } else {
        format!("${out}")
    }
}

/// Legend label of a bin bounded by optional lower and upper edges.
pub fn format_bin_label(lower: Option<f64>, upper: Option<f64>) -> String {
    match (lower, upper) {
        (None, Some(u)) => format!("<{}", currency(u)),
        (Some(l), None) => format!(">{}", currency(l)),
        (Some(l), Some(u)) => format!("{} - {}", currency(l), currency(u)),
        (None, None) => "all".to_string(),
    }
}

fn bin_labels(edges: &[f64]) -> Vec<String> {
    (0..=edges.len())
        .map(|b| {
            let lower = b.checked_sub(1).map(|j| edges[j]);
            format_bin_label(lower, edges.get(b).copied())
        })
        .collect()
}
