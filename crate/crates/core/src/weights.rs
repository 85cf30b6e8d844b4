//! Spatial weights: k-nearest-neighbour, queen contiguity and inverse-distance
//! kernels, plus row standardization and link summaries.

use std::collections::HashMap;

use crate::data::{bbox_diagonal, check_unique, PointSet};
use crate::error::{Error, Result};
use crate::par;

/// Relative snapping tolerance for shared polygon vertices.
pub const SNAP_RELATIVE: f64 = 1e-9;
/// Coincident points get `1 / (COINCIDENT_RELATIVE * mean nearest-neighbour distance)`.
pub const COINCIDENT_RELATIVE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Standardization {
    Binary,
    RowStandardized,
    RawKernel,
}

/// Sparse weights. Row `i` lists `(j, w_ij)` sorted by `j`, without self-links.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialWeights {
    neighbors: Vec<Vec<(usize, f64)>>,
    standardization: Standardization,
    symmetric: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightsSummary {
    pub n_regions: usize,
    pub nonzero_links: usize,
    pub average_links: f64,
    pub islands: usize,
}

impl SpatialWeights {
    /// Build from per-row neighbour lists. Rows are sorted, checked and stored.
    pub fn from_neighbors(
        mut neighbors: Vec<Vec<(usize, f64)>>,
        standardization: Standardization,
    ) -> Result<Self> {
        let n = neighbors.len();
        for (i, row) in neighbors.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            for win in row.windows(2) {
                if win[0].0 == win[1].0 {
                    return Err(Error::InvalidArgument(format!(
                        "duplicate link {i} -> {}",
                        win[0].0
                    )));
                }
            }
            for &(j, w) in row.iter() {
                if j >= n {
                    return Err(Error::InvalidArgument(format!("neighbour index {j} >= n = {n}")));
                }
                if j == i {
                    return Err(Error::InvalidArgument(format!("self-link at {i}")));
                }
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidArgument(format!("weight {w} on link {i} -> {j}")));
                }
            }
        }
        let mut w = Self {
            neighbors,
            standardization,
            symmetric: false,
        };
        w.symmetric = w.is_symmetric();
        Ok(w)
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[(usize, f64)]> {
        self.neighbors.iter().map(|r| r.as_slice())
    }

    pub fn standardization(&self) -> Standardization {
        self.standardization
    }

    /// Whether the link pattern and values were symmetric when built.
    pub fn symmetric_before_standardization(&self) -> bool {
        self.symmetric
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let row = &self.neighbors[i];
        match row.binary_search_by_key(&j, |&(k, _)| k) {
            Ok(pos) => row[pos].1,
            Err(_) => 0.0,
        }
    }

    /// Sum of all weights, `S0`.
    pub fn total_weight(&self) -> f64 {
        self.neighbors
            .iter()
            .map(|r| r.iter().map(|&(_, w)| w).sum::<f64>())
            .sum()
    }

    fn is_symmetric(&self) -> bool {
        self.neighbors.iter().enumerate().all(|(i, row)| {
            row.iter().all(|&(j, w)| {
                let back = self.neighbors[j].binary_search_by_key(&i, |&(k, _)| k);
                matches!(back, Ok(pos) if self.neighbors[j][pos].1 == w)
            })
        })
    }

    /// `W v`.
    pub fn lag(&self, v: &[f64]) -> Vec<f64> {
        self.neighbors
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * v[j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for (i, row) in self.neighbors.iter().enumerate() {
            for &(j, w) in row {
                m[(i, j)] = w;
            }
        }
        m
    }
}

/// Solve `(I - rho W) x = b` by fixed-point iteration `x <- b + rho W x`.
///
/// Converges for `|rho| < 1` when every row sum of `|W|` is at most 1
/// (row-standardized weights).
pub fn solve_sar(w: &SpatialWeights, rho: f64, b: &[f64]) -> Result<Vec<f64>> {
    if !(rho.abs() < 1.0) {
        return Err(Error::UnstableRho(rho));
    }
    if b.len() != w.n() {
        return Err(Error::LengthMismatch {
            what: "right-hand side".into(),
            got: b.len(),
            expected: w.n(),
        });
    }
    let mut x = b.to_vec();
    if rho == 0.0 {
        return Ok(x);
    }
    for _ in 0..100_000 {
        let lag = w.lag(&x);
        let next: Vec<f64> = b.iter().zip(&lag).map(|(bi, li)| bi + rho * li).collect();
        let scale = next.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let delta = next.iter().zip(&x).fold(0.0f64, |m, (a, c)| m.max((a - c).abs()));
        x = next;
        if !delta.is_finite() {
            break;
        }
        if delta <= 1e-15 * scale {
            return Ok(x);
        }
    }
    Err(Error::UnstableRho(rho))
}

/// Rows sorted by (distance, index): the `k` nearest other observations of each point.
fn nearest_neighbors(points: &PointSet, k: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    let n = points.len();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if k >= n {
        return Err(Error::InvalidArgument(format!("k = {k} must be below n = {n}")));
    }
    if points.coords.iter().any(|c| !c[0].is_finite() || !c[1].is_finite()) {
        return Err(Error::InvalidArgument("non-finite coordinates".into()));
    }
    Ok(par::map_range(n, |i| {
        let mut cand: Vec<(usize, f64)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (j, points.distance(i, j)))
            .collect();
        let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, cmp);
            cand.truncate(k);
        }
        cand.sort_by(cmp);
        cand
    }))
}

/// Binary weights linking each point to its `k` nearest neighbours.
pub fn knn_weights(points: &PointSet, k: usize) -> Result<SpatialWeights> {
    let rows = nearest_neighbors(points, k)?
        .into_iter()
        .map(|row| row.into_iter().map(|(j, _)| (j, 1.0)).collect())
        .collect();
    SpatialWeights::from_neighbors(rows, Standardization::Binary)
}

/// Inverse-distance weights restricted to the `k` nearest neighbours.
pub fn hybrid_kernel_weights(points: &PointSet, k: usize) -> Result<SpatialWeights> {
    let knn = nearest_neighbors(points, k)?;
    let (sum, count) = knn
        .iter()
        .map(|row| row[0].1)
        .filter(|&d| d > 0.0)
        .fold((0.0, 0usize), |(s, c), d| (s + d, c + 1));
    let eps = if count > 0 {
        COINCIDENT_RELATIVE * sum / count as f64
    } else {
        COINCIDENT_RELATIVE
    };
    let rows = knn
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|(j, d)| (j, 1.0 / if d > 0.0 { d } else { eps }))
                .collect()
        })
        .collect();
    SpatialWeights::from_neighbors(rows, Standardization::RawKernel)
}

/// Divide each row by its sum. Islands stay empty; already standardized input is returned as is.
pub fn row_standardize(w: &SpatialWeights) -> SpatialWeights {
    if w.standardization == Standardization::RowStandardized {
        return w.clone();
    }
    let neighbors = w
        .neighbors
        .iter()
        .map(|row| {
            let s: f64 = row.iter().map(|&(_, v)| v).sum();
            if s > 0.0 {
                row.iter().map(|&(j, v)| (j, v / s)).collect()
            } else {
                row.clone()
            }
        })
        .collect();
    SpatialWeights {
        neighbors,
        standardization: Standardization::RowStandardized,
        symmetric: w.symmetric,
    }
}

pub fn weights_summary(w: &SpatialWeights) -> WeightsSummary {
    let n_regions = w.n();
    let nonzero_links = w
        .neighbors
        .iter()
        .map(|r| r.iter().filter(|&&(_, v)| v != 0.0).count())
        .sum();
    let islands = w
        .neighbors
        .iter()
        .filter(|r| r.iter().all(|&(_, v)| v == 0.0))
        .count();
    summary_from_counts(n_regions, nonzero_links, islands)
}

/// Summary from raw counts, for reporting published link tallies.
pub fn summary_from_counts(n_regions: usize, nonzero_links: usize, islands: usize) -> WeightsSummary {
    let average_links = if n_regions == 0 {
        0.0
    } else {
        nonzero_links as f64 / n_regions as f64
    };
    WeightsSummary {
        n_regions,
        nonzero_links,
        average_links,
        islands,
    }
}

/// Polygonal observation units; each unit may have several rings or parts.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonSet {
    pub ids: Vec<String>,
    /// Rings per unit. Multi-part units list every ring of every part.
    pub rings: Vec<Vec<Vec<[f64; 2]>>>,
    /// Outer ring count per unit, for centroid weighting; holes follow.
    pub outer: Vec<Vec<bool>>,
}

impl PolygonSet {
    pub fn new(ids: Vec<String>, rings: Vec<Vec<Vec<[f64; 2]>>>) -> Result<Self> {
        let outer = rings.iter().map(|r| vec![true; r.len()]).collect();
        Self::with_holes(ids, rings, outer)
    }

    pub fn with_holes(
        ids: Vec<String>,
        rings: Vec<Vec<Vec<[f64; 2]>>>,
        outer: Vec<Vec<bool>>,
    ) -> Result<Self> {
        if ids.len() != rings.len() || outer.len() != rings.len() {
            return Err(Error::LengthMismatch {
                what: "polygon rings".into(),
                got: rings.len(),
                expected: ids.len(),
            });
        }
        check_unique(&ids)?;
        Ok(Self { ids, rings, outer })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Area-weighted centroid of the outer rings minus holes; vertex mean for degenerate units.
    pub fn centroids(&self) -> PointSet {
        let coords = self
            .rings
            .iter()
            .zip(&self.outer)
            .map(|(rings, outer)| {
                let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
                for (ring, &is_outer) in rings.iter().zip(outer) {
                    let (ra, rx, ry) = ring_moments(ring);
                    let sign = if is_outer { 1.0 } else { -1.0 };
                    // orientation-agnostic: use |area| with the ring's own sign folded in
                    let s = sign * ra.signum();
                    a += s * ra;
                    cx += s * rx;
                    cy += s * ry;
                }
                if a.abs() > 0.0 {
                    [cx / a, cy / a]
                } else {
                    let pts: Vec<_> = rings.iter().flatten().collect();
                    let m = pts.len().max(1) as f64;
                    [
                        pts.iter().map(|p| p[0]).sum::<f64>() / m,
                        pts.iter().map(|p| p[1]).sum::<f64>() / m,
                    ]
                }
            })
            .collect();
        PointSet {
            ids: self.ids.clone(),
            coords,
        }
    }
}

/// Signed area and first moments (area * centroid) of a ring.
fn ring_moments(ring: &[[f64; 2]]) -> (f64, f64, f64) {
    let m = ring.len();
    if m < 3 {
        return (0.0, 0.0, 0.0);
    }
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..m {
        let [x0, y0] = ring[i];
        let [x1, y1] = ring[(i + 1) % m];
        let cross = x0 * y1 - x1 * y0;
        a += cross;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }
    (a / 2.0, cx / 6.0, cy / 6.0)
}

/// Binary queen contiguity: units are neighbours when they share a vertex
/// (within `SNAP_RELATIVE` times the bounding-box diagonal).
pub fn queen_contiguity(polys: &PolygonSet) -> Result<SpatialWeights> {
    if polys.is_empty() {
        return Err(Error::InvalidArgument("empty polygon set".into()));
    }
    let diag = bbox_diagonal(polys.rings.iter().flatten().flatten().copied());
    let tol = if diag > 0.0 { SNAP_RELATIVE * diag } else { SNAP_RELATIVE };
    let cell = |v: f64| (v / tol).floor() as i64;

    let mut grid: HashMap<(i64, i64), Vec<(usize, [f64; 2])>> = HashMap::new();
    for (unit, rings) in polys.rings.iter().enumerate() {
        for &p in rings.iter().flatten() {
            grid.entry((cell(p[0]), cell(p[1]))).or_default().push((unit, p));
        }
    }
    let n = polys.len();
    let mut links: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (&(cx, cy), members) in &grid {
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(other) = grid.get(&(cx + dx, cy + dy)) else {
                    continue;
                };
                for &(a, pa) in members {
                    for &(b, pb) in other {
                        if a != b && (pa[0] - pb[0]).hypot(pa[1] - pb[1]) <= tol {
                            links[a].push(b);
                        }
                    }
                }
            }
        }
    }
    let rows = links
        .into_iter()
        .map(|mut r| {
            r.sort_unstable();
            r.dedup();
            r.into_iter().map(|j| (j, 1.0)).collect()
        })
        .collect();
    SpatialWeights::from_neighbors(rows, Standardization::Binary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square(x: f64, y: f64) -> Vec<Vec<[f64; 2]>> {
        vec![vec![[x, y], [x + 1.0, y], [x + 1.0, y + 1.0], [x, y + 1.0]]]
    }

    fn grid(side: usize) -> PolygonSet {
        let mut ids = Vec::new();
        let mut rings = Vec::new();
        for r in 0..side {
            for c in 0..side {
                ids.push(format!("{}", r * side + c));
                rings.push(square(c as f64, r as f64));
            }
        }
        PolygonSet::new(ids, rings).unwrap()
    }

    #[test]
    fn knn_collinear_tie_breaks_low_index() {
        let pts = PointSet::from_coords(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        let w = knn_weights(&pts, 1).unwrap();
        assert_eq!(w.row(0), &[(1, 1.0)]);
        assert_eq!(w.row(1), &[(0, 1.0)]);
        assert_eq!(w.row(2), &[(1, 1.0)]);
    }

    #[test]
    fn knn_rejects_k_at_least_n() {
        let pts = PointSet::from_coords(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        assert!(knn_weights(&pts, 3).is_err());
        assert!(knn_weights(&pts, 0).is_err());
    }

    #[test]
    fn queen_2x2_grid() {
        let w = queen_contiguity(&grid(2)).unwrap();
        assert!(w.rows().all(|r| r.len() == 3));
        assert_eq!(weights_summary(&w).nonzero_links, 12);
        assert!(w.symmetric_before_standardization());
    }

    #[test]
    fn queen_3x3_grid() {
        let w = queen_contiguity(&grid(3)).unwrap();
        let counts: Vec<usize> = w.rows().map(|r| r.len()).collect();
        assert_eq!(counts, vec![3, 5, 3, 5, 8, 5, 3, 5, 3]);
        let s = weights_summary(&w);
        assert_eq!(s.nonzero_links, 40);
        assert!((s.average_links - 4.44).abs() < 0.005);
        assert_eq!(s.islands, 0);
    }

    #[test]
    fn queen_disjoint_squares_are_islands() {
        let polys =
            PolygonSet::new(vec!["a".into(), "b".into()], vec![square(0.0, 0.0), square(5.0, 5.0)])
                .unwrap();
        let s = weights_summary(&queen_contiguity(&polys).unwrap());
        assert_eq!(s.islands, 2);
        assert_eq!(s.nonzero_links, 0);
        assert_eq!(s.average_links, 0.0);
    }

    #[test]
    fn queen_snaps_nearly_shared_vertices() {
        let mut b = square(1.0, 0.0);
        b[0][0][0] += 1e-12;
        let polys = PolygonSet::new(vec!["a".into(), "b".into()], vec![square(0.0, 0.0), b]).unwrap();
        let w = queen_contiguity(&polys).unwrap();
        assert_eq!(w.row(0), &[(1, 1.0)]);
    }

    #[test]
    fn queen_rejects_empty() {
        let polys = PolygonSet::new(vec![], vec![]).unwrap();
        assert!(queen_contiguity(&polys).is_err());
    }

    #[test]
    fn hybrid_two_points() {
        let pts = PointSet::from_coords(vec![[0.0, 0.0], [2.0, 0.0]]);
        let w = hybrid_kernel_weights(&pts, 1).unwrap();
        assert_eq!(w.row(0), &[(1, 0.5)]);
        assert_eq!(w.row(1), &[(0, 0.5)]);
        assert_eq!(w.standardization(), Standardization::RawKernel);
    }

    #[test]
    fn hybrid_coincident_points_stay_finite() {
        let pts = PointSet::from_coords(vec![[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]);
        let w = hybrid_kernel_weights(&pts, 1).unwrap();
        // mean positive NN distance = (1 + 2) / 2 over rows 2 and 3
        let eps = COINCIDENT_RELATIVE * 1.5;
        assert_eq!(w.row(0), &[(1, 1.0 / eps)]);
        assert!(w.rows().flatten().all(|&(_, v)| v.is_finite()));
    }

    #[test]
    fn row_standardize_basics() {
        let w = SpatialWeights::from_neighbors(
            vec![vec![(1, 2.0), (2, 2.0)], vec![], vec![(0, 1.0)]],
            Standardization::RawKernel,
        )
        .unwrap();
        let r = row_standardize(&w);
        assert_eq!(r.row(0), &[(1, 0.5), (2, 0.5)]);
        assert!(r.row(1).is_empty());
        assert_eq!(r.row(2), &[(0, 1.0)]);
        assert_eq!(row_standardize(&r), r);
    }

    #[test]
    fn sar_solve_matches_dense_inverse() {
        let pts = PointSet::from_coords((0..12).map(|i| [(i % 4) as f64, (i / 4) as f64 * 1.3]).collect());
        let w = row_standardize(&knn_weights(&pts, 3).unwrap());
        let b: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
        let x = solve_sar(&w, 0.6, &b).unwrap();
        let a = nalgebra::DMatrix::<f64>::identity(12, 12) - w.to_dense() * 0.6;
        let dense = a.lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        for i in 0..12 {
            assert!((x[i] - dense[i]).abs() < 1e-12);
        }
        assert!(matches!(solve_sar(&w, 1.0, &[0.0; 12]), Err(Error::UnstableRho(_))));
    }

    #[test]
    fn summary_of_empty_weights() {
        let w = SpatialWeights::from_neighbors(vec![vec![]; 4], Standardization::Binary).unwrap();
        let s = weights_summary(&w);
        assert_eq!((s.islands, s.nonzero_links, s.average_links), (4, 0, 0.0));
    }

    #[test]
    fn from_neighbors_rejects_bad_rows() {
        assert!(SpatialWeights::from_neighbors(vec![vec![(0, 1.0)]], Standardization::Binary).is_err());
        assert!(SpatialWeights::from_neighbors(vec![vec![(5, 1.0)], vec![]], Standardization::Binary).is_err());
        assert!(SpatialWeights::from_neighbors(vec![vec![(1, -1.0)], vec![]], Standardization::Binary).is_err());
    }

    fn coords_strategy() -> impl Strategy<Value = Vec<[f64; 2]>> {
        prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64).prop_map(|(a, b)| [a, b]), 5..40)
    }

    proptest! {
        #[test]
        fn knn_rows_have_exactly_k_links(coords in coords_strategy(), k in 1usize..4) {
            let pts = PointSet::from_coords(coords);
            let w = knn_weights(&pts, k).unwrap();
            prop_assert!(w.rows().all(|r| r.len() == k));
        }

        #[test]
        fn row_standardize_preserves_pattern_and_sums(coords in coords_strategy(), k in 1usize..4) {
            let pts = PointSet::from_coords(coords);
            let w = hybrid_kernel_weights(&pts, k).unwrap();
            let r = row_standardize(&w);
            for (a, b) in w.rows().zip(r.rows()) {
                let ja: Vec<_> = a.iter().map(|x| x.0).collect();
                let jb: Vec<_> = b.iter().map(|x| x.0).collect();
                prop_assert_eq!(ja, jb);
                let s: f64 = b.iter().map(|x| x.1).sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn average_links_times_n_recovers_links(n in 1usize..10_000, links in 0usize..100_000) {
            let s = summary_from_counts(n, links, 0);
            prop_assert_eq!((s.average_links * n as f64).round() as usize, links);
        }
    }
}
