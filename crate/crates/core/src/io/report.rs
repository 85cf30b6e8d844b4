//! Plain-text report blocks.

use std::fmt::Write;

use crate::autocorr::{InferenceMode, MoranResult};
use crate::local::{aicc, GwrFit};
use crate::mgwr::{DiagnosticsReport, HatPath, LocalInference, MgwrFit};
use crate::ols::{five_number_summary, significance_code, OlsFit};
use crate::weights::WeightsSummary;

pub const SIGNIF_CODES: &str = "Signif. codes: *** 0.001, ** 0.01, * 0.05, . 0.1";

/// `< 2.2e-16`, `< 0.001`, or four decimals.
pub fn format_p_value(p: f64) -> String {
    if p < 2.2e-16 {
        "< 2.2e-16".into()
    } else if p < 0.001 {
        "< 0.001".into()
    } else {
        format!("{p:.4}")
    }
}

fn row(out: &mut String, label: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{label:<34}{value}");
}

fn inference_label(mode: InferenceMode, permutations: usize) -> String {
    match mode {
        InferenceMode::AnalyticalRandomization => "analytical (randomization)".into(),
        InferenceMode::AnalyticalNormality => "analytical (normality)".into(),
        InferenceMode::Permutation => format!("permutation ({permutations} draws)"),
        InferenceMode::ExhaustivePermutation => format!("exact enumeration ({permutations})"),
    }
}

/// Global Moran's I test with the link summary of the weights used.
pub fn moran_block(variable: &str, result: &MoranResult, links: &WeightsSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Global Moran's I: {variable}");
    row(&mut out, "Statistic", "Value");
    row(&mut out, "Moran's I", format!("{:.6}", result.i));
    row(&mut out, "Expected I", format!("{:.6}", result.expected_i));
    row(&mut out, "Variance", format!("{:.7}", result.variance_i));
    row(&mut out, "Standard Deviate (z-score)", format!("{:.2}", result.z_score));
    row(&mut out, "p-value", format_p_value(result.p_value));
    row(&mut out, "Alternative", format!("{:?}", result.alternative).to_lowercase());
    row(&mut out, "Inference", inference_label(result.inference_mode, result.permutations));
    row(&mut out, "Number of Regions (n)", links.n_regions);
    row(&mut out, "Non-zero Links", links.nonzero_links);
    row(&mut out, "Average Links per Region", format!("{:.2}", links.average_links));
    row(&mut out, "Regions with No Links", links.islands);
    out
}

/// Coefficient table, residual quantiles and model fit lines.
pub fn ols_block(response: &str, fit: &OlsFit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Global OLS regression: {response}");
    let _ = writeln!(
        out,
        "{:<28}{:>16}{:>16}{:>10}{:>12}",
        "Coefficient", "Estimate", "Std. Error", "t value", "Pr(>|t|)"
    );
    for k in 0..fit.n_params() {
        let _ = writeln!(
            out,
            "{:<28}{:>16.4}{:>16.4}{:>10.3}{:>12} {}",
            fit.names[k],
            fit.coefficients[k],
            fit.standard_errors[k],
            fit.t_values[k],
            format_p_value(fit.p_values[k]),
            significance_code(fit.p_values[k])
        );
    }
    let q = fit.residual_quantiles;
    let _ = writeln!(
        out,
        "Residuals: Min = {:.4}; 1Q = {:.4}; Median = {:.4}; 3Q = {:.4}; Max = {:.4}",
        q[0], q[1], q[2], q[3], q[4]
    );
    let _ = writeln!(
        out,
        "Residual standard error: {:.4} on {} DF",
        fit.residual_std_error, fit.df_residual
    );
    let _ = writeln!(
        out,
        "Multiple R-squared: {:.4}, Adjusted R-squared: {:.4}",
        fit.r_squared, fit.adj_r_squared
    );
    let _ = writeln!(
        out,
        "F-statistic: {:.4} on {} and {} DF, p-value: {}",
        fit.f_statistic,
        fit.p,
        fit.df_residual,
        format_p_value(fit.f_p_value)
    );
    let _ = writeln!(out, "{SIGNIF_CODES}");
    out
}

/// Single-bandwidth GWR summary.
pub fn gwr_block(response: &str, fit: &GwrFit) -> String {
    let mut out = String::new();
    let n = fit.n();
    let _ = writeln!(out, "GWR: {response}");
    row(&mut out, "Kernel", format!("{:?} {:?}", fit.kernel.mode, fit.kernel.family).to_lowercase());
    row(&mut out, "Bandwidth", format!("{}", fit.bandwidth));
    row(&mut out, "R-Squared", format!("{:.4}", fit.r_squared));
    row(&mut out, "Adjusted R-Squared", format!("{:.4}", fit.adj_r_squared));
    row(&mut out, "AICc", format!("{:.4}", fit.aicc));
    row(&mut out, "Sigma-Squared MLE", format!("{:.6}", fit.sigma2_mle));
    row(&mut out, "Trace of S (ENP)", format!("{:.4}", fit.trace_s));
    row(&mut out, "Residual DoF (n - ENP)", format!("{:.4}", n as f64 - fit.trace_s));
    surface_table(&mut out, &fit.names, |k| (0..n).map(|i| fit.local_coefficients[(i, k)]).collect());
    out
}

fn surface_table(out: &mut String, names: &[String], column: impl Fn(usize) -> Vec<f64>) {
    let _ = writeln!(
        out,
        "{:<28}{:>14}{:>14}{:>14}{:>14}{:>14}",
        "Surface", "Mean", "Min", "Median", "Max", "SD"
    );
    for (k, name) in names.iter().enumerate() {
        let v = column(k);
        let s = five_number_summary(&v);
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
        let _ = writeln!(
            out,
            "{name:<28}{m:>14.4}{:>14.4}{:>14.4}{:>14.4}{sd:>14.4}",
            s[0], s[2], s[4]
        );
    }
}

/// Side-by-side OLS / MGWR diagnostics followed by per-covariate detail.
pub fn mgwr_block(
    response: &str,
    ols: Option<&OlsFit>,
    fit: &MgwrFit,
    inference: Option<&LocalInference>,
) -> String {
    let mut out = String::new();
    let n = fit.n();
    let _ = writeln!(out, "Diagnostics for global OLS and MGWR: {response}");
    let _ = writeln!(out, "{:<30}{:>22}{:>22}", "Diagnostic", "Global OLS", "MGWR");
    let dash = "---".to_string();
    let o = |f: &dyn Fn(&OlsFit) -> String| ols.map_or(dash.clone(), f);
    let mut line = |label: &str, a: String, b: String| {
        let _ = writeln!(out, "{label:<30}{a:>22}{b:>22}");
    };
    line("R-Squared", o(&|f| format!("{:.4}", f.r_squared)), format!("{:.4}", fit.r_squared));
    line(
        "Adjusted R-Squared",
        o(&|f| format!("{:.4}", f.adj_r_squared)),
        format!("{:.4}", fit.adj_r_squared),
    );
    line(
        "AICc",
        o(&|f| {
            aicc(f.n, f.rss, f.n_params() as f64).map_or(dash.clone(), |a| format!("{a:.2}"))
        }),
        format!("{:.2}", fit.aicc),
    );
    line(
        "Residual Std. Error",
        o(&|f| format!("{:.4}", f.residual_std_error)),
        format!("{:.4}", fit.sigma2.sqrt()),
    );
    line(
        "Sigma-Squared MLE",
        o(&|f| format!("{:.6}", f.sigma2_mle)),
        format!("{:.6}", fit.sigma2_mle),
    );
    line("F-Statistic", o(&|f| format!("{:.4}", f.f_statistic)), dash.clone());
    line("p-value (F)", o(&|f| format_p_value(f.f_p_value)), dash.clone());
    line(
        "Effective No. of Parameters",
        o(&|f| f.n_params().to_string()),
        format!("{:.2}", fit.enp_total),
    );
    line(
        "Residual DoF (n - ENP)",
        o(&|f| f.df_residual.to_string()),
        format!("{:.2}", n as f64 - fit.enp_total),
    );
    let _ = writeln!(out);
    row(&mut out, "Kernel", format!("{:?} {:?}", fit.kernel.mode, fit.kernel.family).to_lowercase());
    if fit.lag {
        row(&mut out, "Spatial lag rho", format!("{:.6}", fit.rho));
        if fit.rho_unstable {
            row(&mut out, "Warning", "|rho| >= 1, reduced form undefined");
        }
    } else {
        row(&mut out, "Spatial lag rho", "not estimated");
    }
    row(&mut out, "Backfitting converged", fit.converged);
    row(&mut out, "Backfitting iterations", fit.iterations);
    row(&mut out, "Final SOC-f", format!("{:.3e}", fit.soc));
    row(
        &mut out,
        "ENP computation",
        match fit.hat_path {
            HatPath::Exact => "exact per-covariate operators",
            HatPath::Approximate => "approximate (univariate hat traces)",
        },
    );
    let _ = writeln!(
        out,
        "{:<28}{:>12}{:>10}{:>12}{:>10}{:>14}",
        "Covariate", "Bandwidth", "ENP", "adj. alpha", "t crit", "% signif."
    );
    for (k, name) in fit.names.iter().enumerate() {
        let (a, t, s) = inference.map_or((dash.clone(), dash.clone(), dash.clone()), |inf| {
            (
                format!("{:.5}", inf.adjusted_alpha[k]),
                format!("{:.3}", inf.t_critical[k]),
                format!("{:.1}", 100.0 * inf.share_significant[k]),
            )
        });
        let _ = writeln!(
            out,
            "{name:<28}{:>12}{:>10.3}{a:>12}{t:>10}{s:>14}",
            fit.bandwidths[k], fit.enp_per_covariate[k]
        );
    }
    surface_table(&mut out, &fit.names, |k| {
        (0..n).map(|i| fit.coefficient_surfaces[(i, k)]).collect()
    });
    out
}

/// Residual autocorrelation, influence and local significance summary.
pub fn diagnostics_block(names: &[String], ids: &[String], report: &DiagnosticsReport) -> String {
    let mut out = String::new();
    let m = &report.residual_moran;
    let _ = writeln!(out, "MGWR residual diagnostics");
    row(&mut out, "Residual Moran's I", format!("{:.6}", m.i));
    row(&mut out, "Residual Moran p-value", format!("{:.4}", m.p_value));
    row(&mut out, "Inference", inference_label(m.inference_mode, m.permutations));
    row(
        &mut out,
        "Spatial dependence in residuals",
        if m.p_value < 0.05 { "significant at 0.05" } else { "not significant at 0.05" },
    );
    let cooks = &report.cooks_distance.values;
    let n = cooks.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cooks[b].total_cmp(&cooks[a]).then(a.cmp(&b)));
    let cutoff = 4.0 / n as f64;
    row(&mut out, "Cook's D > 4/n", cooks.iter().filter(|&&d| d > cutoff).count());
    row(&mut out, "Cook's D infinite (h = 1)", report.cooks_distance.infinite.len());
    let top: Vec<String> = order
        .iter()
        .take(5)
        .map(|&i| format!("{}={:.4}", ids[i], cooks[i]))
        .collect();
    row(&mut out, "Largest Cook's D", top.join(", "));
    let inf = &report.inference;
    let _ = writeln!(out, "Local significance (alpha = {}, df = {:.2})", inf.alpha, inf.df);
    let _ = writeln!(
        out,
        "{:<28}{:>12}{:>10}{:>12}{:>14}",
        "Covariate", "adj. alpha", "t crit", "% signif.", "% signif. > 0"
    );
    for (k, name) in names.iter().enumerate() {
        let _ = writeln!(
            out,
            "{name:<28}{:>12.5}{:>10.3}{:>12.1}{:>14.1}",
            inf.adjusted_alpha[k],
            inf.t_critical[k],
            100.0 * inf.share_significant[k],
            100.0 * inf.share_significant_positive[k]
        );
    }
    out
}
