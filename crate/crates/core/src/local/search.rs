//! Golden-section minimisation over continuous and integer intervals.
//!
//! Both searches assume a unimodal objective; otherwise they return a local
//! minimum. Non-finite objective values are treated as +inf, and when both
//! interior probes are non-finite the search moves toward larger arguments,
//! since undefined scores come from kernels too narrow to fit.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Continuous search stops once the bracket is this fraction of its initial width.
pub const CONTINUOUS_REL_TOL: f64 = 1e-5;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchResult {
    pub argmin: f64,
    pub value: f64,
    pub evaluations: usize,
}

fn clean(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Keep the left probe when it is no worse; move right when neither is finite.
fn go_left(fc: f64, fd: f64) -> bool {
    if !fc.is_finite() && !fd.is_finite() {
        false
    } else {
        fc <= fd
    }
}

pub fn golden_section(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> Result<SearchResult> {
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!("empty search interval [{lo}, {hi}]")));
    }
    let width0 = hi - lo;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = clean(f(c));
    let mut fd = clean(f(d));
    let mut evals = 2;
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    while b - a > rel_tol * width0 {
        if go_left(fc, fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = clean(f(c));
            if fc < best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = clean(f(d));
            if fd < best.1 {
                best = (d, fd);
            }
        }
        evals += 1;
    }
    if !best.1.is_finite() {
        return Err(Error::ObjectiveNotFinite);
    }
    Ok(SearchResult {
        argmin: best.0,
        value: best.1,
        evaluations: evals,
    })
}

/// Golden-section search over the integers in `[lo, hi]`.
///
/// Probes are rounded to integers and memoised; once the bracket holds at
/// most four integers they are enumerated. Ties go to the smaller argument.
pub fn golden_section_integer(
    mut f: impl FnMut(usize) -> f64,
    lo: usize,
    hi: usize,
) -> Result<SearchResult> {
    if lo > hi {
        return Err(Error::InvalidArgument(format!("empty search interval [{lo}, {hi}]")));
    }
    let mut memo: BTreeMap<usize, f64> = BTreeMap::new();
    let mut eval = |k: usize, memo: &mut BTreeMap<usize, f64>| -> f64 {
        *memo.entry(k).or_insert_with(|| clean(f(k)))
    };
    let (mut a, mut b) = (lo, hi);
    while b - a > 3 {
        let span = (b - a) as f64;
        let mut c = b - (INV_PHI * span).round() as usize;
        let mut d = a + (INV_PHI * span).round() as usize;
        if c >= d {
            c = a + (b - a) / 3;
            d = b - (b - a) / 3;
        }
        c = c.max(a + 1);
        d = d.min(b - 1);
        let fc = eval(c, &mut memo);
        let fd = eval(d, &mut memo);
        if go_left(fc, fd) {
            b = d;
        } else {
            a = c;
        }
    }
    for k in a..=b {
        eval(k, &mut memo);
    }
    let (k, v) = memo
        .range(a..=b)
        .fold((a, f64::INFINITY), |best, (&k, &v)| if v < best.1 { (k, v) } else { best });
    if !v.is_finite() {
        return Err(Error::ObjectiveNotFinite);
    }
    Ok(SearchResult {
        argmin: k as f64,
        value: v,
        evaluations: memo.len(),
    })
}
