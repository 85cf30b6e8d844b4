use std::borrow::Cow;

use crate::data::PointSet;
use crate::par;

use super::kernel::{kernel_weight, BandwidthMode, KernelSpec, ADAPTIVE_PAD};

/// Above this many observations the sorted distance table is not cached.
pub const DISTANCE_CACHE_MAX_N: usize = 5_000;

/// Per-location neighbour lists sorted by `(distance, index)`, self included.
#[derive(Debug, Clone)]
pub struct Neighborhoods {
    points: PointSet,
    cache: Option<(Vec<u32>, Vec<f64>)>,
}

impl Neighborhoods {
    pub fn new(points: &PointSet) -> Self {
        let n = points.len();
        let cache = (n <= DISTANCE_CACHE_MAX_N).then(|| {
            let rows = par::map_range(n, |i| sorted_row(points, i));
            let mut idx = Vec::with_capacity(n * n);
            let mut dist = Vec::with_capacity(n * n);
            for row in rows {
                for (j, d) in row {
                    idx.push(j);
                    dist.push(d);
                }
            }
            (idx, dist)
        });
        Self {
            points: points.clone(),
            cache,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn is_cached(&self) -> bool {
        self.cache.is_some()
    }

    fn row(&self, i: usize) -> Cow<'_, [(u32, f64)]> {
        match &self.cache {
            Some((idx, dist)) => {
                let n = self.len();
                let r = i * n..(i + 1) * n;
                Cow::Owned(idx[r.clone()].iter().copied().zip(dist[r].iter().copied()).collect())
            }
            None => Cow::Owned(sorted_row(&self.points, i)),
        }
    }

    /// Distance to the k-th nearest observation of `i`, counting `i` itself.
    pub fn kth_distance(&self, i: usize, k: usize) -> f64 {
        match &self.cache {
            Some((_, dist)) => dist[i * self.len() + k - 1],
            None => self.row(i)[k - 1].1,
        }
    }

    /// Kernel radius at location `i` for a bandwidth value.
    pub fn radius(&self, i: usize, bw: f64, kernel: KernelSpec) -> f64 {
        match kernel.mode {
            BandwidthMode::Fixed => bw,
            BandwidthMode::Adaptive => {
                let k = (bw as usize).clamp(1, self.len());
                (self.kth_distance(i, k) * ADAPTIVE_PAD).max(f64::MIN_POSITIVE)
            }
        }
    }

    /// Positive kernel weights `(j, w_ij)` around location `i`, nearest first.
    pub fn weights(&self, i: usize, bw: f64, kernel: KernelSpec) -> Vec<(usize, f64)> {
        let radius = self.radius(i, bw, kernel);
        let mut out = Vec::new();
        match &self.cache {
            Some((idx, dist)) => {
                let n = self.len();
                for t in i * n..(i + 1) * n {
                    let w = kernel_weight(dist[t], radius, kernel.family);
                    if w > 0.0 {
                        out.push((idx[t] as usize, w));
                    } else if kernel.family == super::KernelFamily::Bisquare {
                        break;
                    }
                }
            }
            None => {
                for (j, d) in self.row(i).iter() {
                    let w = kernel_weight(*d, radius, kernel.family);
                    if w > 0.0 {
                        out.push((*j as usize, w));
                    } else if kernel.family == super::KernelFamily::Bisquare {
                        break;
                    }
                }
            }
        }
        out
    }

    /// Smallest positive pairwise distance and the bounding-box diagonal.
    pub fn distance_range(&self) -> (f64, f64) {
        let n = self.len();
        let min_pos = par::map_range(n, |i| {
            let row = self.row(i);
            row.iter().map(|&(_, d)| d).find(|&d| d > 0.0).unwrap_or(f64::INFINITY)
        })
        .into_iter()
        .fold(f64::INFINITY, f64::min);
        (min_pos, self.points.extent())
    }
}

fn sorted_row(points: &PointSet, i: usize) -> Vec<(u32, f64)> {
    let mut row: Vec<(u32, f64)> = (0..points.len())
        .map(|j| (j as u32, points.distance(i, j)))
        .collect();
    row.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    row
}
