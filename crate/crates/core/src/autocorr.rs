//! Global Moran's I with analytical and permutation inference.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dist;
use crate::error::{Error, Result};
use crate::par;
use crate::weights::{SpatialWeights, Standardization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    /// Positive autocorrelation (clustering).
    #[default]
    Greater,
    Less,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceAssumption {
    #[default]
    Randomization,
    Normality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InferenceMode {
    AnalyticalRandomization,
    AnalyticalNormality,
    Permutation,
    ExhaustivePermutation,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MoranResult {
    pub i: f64,
    pub expected_i: f64,
    pub variance_i: f64,
    pub z_score: f64,
    pub p_value: f64,
    pub n: usize,
    pub alternative: Alternative,
    pub inference_mode: InferenceMode,
    /// Number of permutations drawn; 0 for analytical inference.
    pub permutations: usize,
}

/// Centered values and their sum of squares.
fn centered(x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let z: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let m2: f64 = z.iter().map(|v| v * v).sum();
    if m2 == 0.0 || !m2.is_finite() {
        return Err(Error::ZeroVariance("moran input".into()));
    }
    Ok((z, m2))
}

fn check_inputs(x: &[f64], w: &SpatialWeights) -> Result<f64> {
    if x.len() != w.n() {
        return Err(Error::LengthMismatch {
            what: "values".into(),
            got: x.len(),
            expected: w.n(),
        });
    }
    let s0 = w.total_weight();
    if s0 <= 0.0 {
        return Err(Error::NoLinks);
    }
    Ok(s0)
}

/// `sum_ij w_ij z_i z_j`
fn cross_product(z: &[f64], w: &SpatialWeights) -> f64 {
    w.rows()
        .zip(z)
        .map(|(row, zi)| zi * row.iter().map(|&(j, wij)| wij * z[j]).sum::<f64>())
        .sum()
}

fn statistic(z: &[f64], m2: f64, s0: f64, w: &SpatialWeights) -> f64 {
    (z.len() as f64 / s0) * cross_product(z, w) / m2
}

/// Moran's I of `x` under weights `w`, without inference.
pub fn morans_i(x: &[f64], w: &SpatialWeights) -> Result<f64> {
    let s0 = check_inputs(x, w)?;
    let (z, m2) = centered(x)?;
    Ok(statistic(&z, m2, s0, w))
}

pub fn expected_i(n: usize) -> f64 {
    -1.0 / (n as f64 - 1.0)
}

/// Tail probability for a standard normal deviate.
pub fn normal_p(z: f64, alt: Alternative) -> f64 {
    match alt {
        Alternative::Greater => dist::normal_sf(z),
        Alternative::Less => dist::normal_cdf(z),
        Alternative::TwoSided => (2.0 * dist::normal_sf(z.abs())).min(1.0),
    }
}

pub fn z_score(i: f64, expected: f64, variance: f64) -> f64 {
    (i - expected) / variance.sqrt()
}

/// `S1` and `S2` moment sums of the weights.
fn weight_moments(w: &SpatialWeights) -> (f64, f64) {
    let n = w.n();
    let mut s1 = 0.0;
    let mut col_sums = vec![0.0; n];
    for (i, row) in w.rows().enumerate() {
        for &(j, wij) in row {
            let wji = w.weight(j, i);
            s1 += (wij + wji).powi(2);
            col_sums[j] += wij;
        }
    }
    // one-directional links were visited once but appear twice in the ordered-pair sum
    let mut one_way = 0.0;
    for (i, row) in w.rows().enumerate() {
        for &(j, wij) in row {
            if w.weight(j, i) == 0.0 {
                one_way += wij * wij;
            }
        }
    }
    let s1 = 0.5 * (s1 + one_way);
    let s2 = w
        .rows()
        .enumerate()
        .map(|(i, row)| (row.iter().map(|&(_, v)| v).sum::<f64>() + col_sums[i]).powi(2))
        .sum();
    (s1, s2)
}

/// Global Moran's I with analytical inference.
pub fn global_morans_i(
    x: &[f64],
    w: &SpatialWeights,
    assumption: VarianceAssumption,
    alternative: Alternative,
) -> Result<MoranResult> {
    let s0 = check_inputs(x, w)?;
    let (z, m2) = centered(x)?;
    let n = x.len();
    if n < 4 {
        return Err(Error::TooFewObservations {
            valid: n,
            required: 4,
        });
    }
    let i = statistic(&z, m2, s0, w);
    let e = expected_i(n);
    let (s1, s2) = weight_moments(w);
    let nf = n as f64;
    let s0sq = s0 * s0;
    let variance = match assumption {
        VarianceAssumption::Normality => {
            (nf * nf * s1 - nf * s2 + 3.0 * s0sq) / ((nf * nf - 1.0) * s0sq) - e * e
        }
        VarianceAssumption::Randomization => {
            let m4: f64 = z.iter().map(|v| v.powi(4)).sum();
            let b2 = nf * m4 / (m2 * m2);
            let num = nf * ((nf * nf - 3.0 * nf + 3.0) * s1 - nf * s2 + 3.0 * s0sq)
                - b2 * ((nf * nf - nf) * s1 - 2.0 * nf * s2 + 6.0 * s0sq);
            num / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0) * s0sq) - e * e
        }
    };
    let z_score = z_score(i, e, variance);
    Ok(MoranResult {
        i,
        expected_i: e,
        variance_i: variance,
        z_score,
        p_value: normal_p(z_score, alternative),
        n,
        alternative,
        inference_mode: match assumption {
            VarianceAssumption::Randomization => InferenceMode::AnalyticalRandomization,
            VarianceAssumption::Normality => InferenceMode::AnalyticalNormality,
        },
        permutations: 0,
    })
}

fn permutation_result(
    observed: f64,
    draws: &[f64],
    n: usize,
    alternative: Alternative,
    mode: InferenceMode,
    include_observed: bool,
) -> MoranResult {
    let m = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / m;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let ge = draws.iter().filter(|&&d| d >= observed).count() as f64;
    let le = draws.iter().filter(|&&d| d <= observed).count() as f64;
    let (extra, denom) = if include_observed { (1.0, m + 1.0) } else { (0.0, m) };
    let upper = (ge + extra) / denom;
    let lower = (le + extra) / denom;
    let p_value = match alternative {
        Alternative::Greater => upper,
        Alternative::Less => lower,
        Alternative::TwoSided => (2.0 * upper.min(lower)).min(1.0),
    };
    MoranResult {
        i: observed,
        expected_i: mean,
        variance_i: var,
        z_score: (observed - mean) / var.sqrt(),
        p_value,
        n,
        alternative,
        inference_mode: mode,
        permutations: draws.len(),
    }
}

/// Random generator for permutation `index` of a run seeded with `seed`.
pub(crate) fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Moran's I with a Monte-Carlo permutation test.
///
/// Each permutation draws from its own ChaCha stream keyed by `(seed, index)`,
/// so the p-value is identical for any number of worker threads.
pub fn permutation_morans_i(
    x: &[f64],
    w: &SpatialWeights,
    n_perm: usize,
    seed: u64,
    alternative: Alternative,
) -> Result<MoranResult> {
    let s0 = check_inputs(x, w)?;
    let (z, m2) = centered(x)?;
    if n_perm < 99 {
        return Err(Error::InvalidArgument(format!(
            "at least 99 permutations required, got {n_perm}"
        )));
    }
    let observed = statistic(&z, m2, s0, w);
    let draws = par::map_range(n_perm, |p| {
        let mut rng = stream_rng(seed, p as u64);
        let mut zp = z.clone();
        zp.shuffle(&mut rng);
        statistic(&zp, m2, s0, w)
    });
    Ok(permutation_result(
        observed,
        &draws,
        x.len(),
        alternative,
        InferenceMode::Permutation,
        true,
    ))
}

/// Largest n accepted by [`exhaustive_morans_i`].
pub const EXHAUSTIVE_MAX_N: usize = 9;

/// Exact permutation distribution of Moran's I over all `n!` orderings.
///
/// The p-value counts the identity ordering among the draws.
pub fn exhaustive_morans_i(
    x: &[f64],
    w: &SpatialWeights,
    alternative: Alternative,
) -> Result<MoranResult> {
    let s0 = check_inputs(x, w)?;
    let (z, m2) = centered(x)?;
    let n = x.len();
    if n > EXHAUSTIVE_MAX_N {
        return Err(Error::InvalidArgument(format!(
            "exhaustive enumeration limited to n <= {EXHAUSTIVE_MAX_N}"
        )));
    }
    let observed = statistic(&z, m2, s0, w);
    // Heap's algorithm, iterative
    let mut perm = z.clone();
    let mut c = vec![0usize; n];
    let mut draws = vec![statistic(&perm, m2, s0, w)];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            draws.push(statistic(&perm, m2, s0, w));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(permutation_result(
        observed,
        &draws,
        n,
        alternative,
        InferenceMode::ExhaustivePermutation,
        false,
    ))
}

/// Moran scatter: centred values, their spatial lag and the fitted slope.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MoranScatter {
    pub centered: Vec<f64>,
    pub lag: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares regression of the spatial lag on the centred values.
///
/// For row-standardized weights without islands the slope equals Moran's I.
pub fn moran_scatter(x: &[f64], w: &SpatialWeights) -> Result<MoranScatter> {
    if w.standardization() != Standardization::RowStandardized {
        return Err(Error::NotRowStandardized);
    }
    check_inputs(x, w)?;
    let (z, _) = centered(x)?;
    let lag = w.lag(&z);
    let n = z.len() as f64;
    let zbar = z.iter().sum::<f64>() / n;
    let lbar = lag.iter().sum::<f64>() / n;
    let sxy: f64 = z.iter().zip(&lag).map(|(a, b)| (a - zbar) * (b - lbar)).sum();
    let sxx: f64 = z.iter().map(|a| (a - zbar).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(MoranScatter {
        intercept: lbar - slope * zbar,
        centered: z,
        lag,
        slope,
    })
}
