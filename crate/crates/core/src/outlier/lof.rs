//! Exact k-nearest-neighbour search and Local Outlier Factor.
//!
//! Neighbourhoods follow Breunig et al.: `N(p)` holds every other point within
//! the k-distance of `p`, so it can be larger than `k` when distances tie.
//! Nothing of size `n x k` is materialised. Scoring makes three brute-force
//! passes over the point set (k-distance, local reachability density, LOF),
//! each parallel over query points with a fixed per-point summation order,
//! so results do not depend on the thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::outlier::points::PointSet;

/// Guards `lrd` and `LOF` against division by zero on duplicate points.
pub const LOF_EPSILON: f64 = 1e-10;

/// Query points are processed in blocks of this many, against tiles of
/// `TILE` candidate points, to keep the candidate coordinates hot in cache.
const BLOCK: usize = 32;
const TILE: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub k_distance: f64,
    /// Sorted ascending by point index.
    pub neighbors: Vec<usize>,
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("n_neighbors must be at least 1".into()));
    }
    if k >= n {
        return Err(Error::Config(format!(
            "n_neighbors ({k}) must be smaller than the number of points ({n})"
        )));
    }
    Ok(())
}

/// Distance from each point to its k-th nearest other point.
pub fn k_distances(points: &PointSet, k: usize) -> Result<Vec<f64>> {
    let n = points.len();
    check_k(n, k)?;
    Ok((0..n)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |buf, p| {
                buf.clear();
                let row = points.row(p);
                for o in 0..n {
                    if o != p {
                        buf.push(super::points::euclidean(row, points.row(o)));
                    }
                }
                let (_, kth, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
                *kth
            },
        )
        .collect())
}

/// k-distance and full neighbourhood of every point.
pub fn knn(points: &PointSet, k: usize) -> Result<Vec<Neighborhood>> {
    let kd = k_distances(points, k)?;
    let n = points.len();
    Ok((0..n)
        .into_par_iter()
        .map(|p| Neighborhood {
            k_distance: kd[p],
            neighbors: (0..n).filter(|&o| o != p && points.distance(p, o) <= kd[p]).collect(),
        })
        .collect())
}

/// Visits every `(p, o)` pair with `o` in `N(p)` for query points in
/// `block`, calling `visit(p - block.start, o, d(p, o))`.
fn for_each_neighbor(
    points: &PointSet,
    kd: &[f64],
    block: std::ops::Range<usize>,
    mut visit: impl FnMut(usize, usize, f64),
) {
    let n = points.len();
    let mut tile_start = 0;
    while tile_start < n {
        let tile_end = (tile_start + TILE).min(n);
        for p in block.clone() {
            let row = points.row(p);
            let radius = kd[p];
            for o in tile_start..tile_end {
                if o == p {
                    continue;
                }
                let d = super::points::euclidean(row, points.row(o));
                if d <= radius {
                    visit(p - block.start, o, d);
                }
            }
        }
        tile_start = tile_end;
    }
}

fn block_ranges(n: usize) -> Vec<std::ops::Range<usize>> {
    (0..n.div_ceil(BLOCK))
        .map(|b| b * BLOCK..((b + 1) * BLOCK).min(n))
        .collect()
}

/// Local reachability density of every point, given k-distances.
fn local_reachability(points: &PointSet, kd: &[f64]) -> Vec<f64> {
    block_ranges(points.len())
        .into_par_iter()
        .flat_map_iter(|block| {
            let len = block.len();
            let mut count = vec![0usize; len];
            let mut sum = vec![0.0f64; len];
            for_each_neighbor(points, kd, block, |i, o, d| {
                count[i] += 1;
                sum[i] += kd[o].max(d);
            });
            count.into_iter().zip(sum).map(|(c, s)| c as f64 / (s + LOF_EPSILON))
        })
        .collect()
}

/// Raw LOF values (about 1 inside uniform regions, larger for outliers).
pub fn local_outlier_factors(points: &PointSet, k: usize) -> Result<Vec<f64>> {
    let kd = k_distances(points, k)?;
    let lrd = local_reachability(points, &kd);
    Ok(block_ranges(points.len())
        .into_par_iter()
        .flat_map_iter(|block| {
            let len = block.len();
            let start = block.start;
            let mut count = vec![0usize; len];
            let mut sum = vec![0.0f64; len];
            for_each_neighbor(points, &kd, block, |i, o, _| {
                count[i] += 1;
                sum[i] += lrd[o];
            });
            let lrd = &lrd;
            (0..len).map(move |i| sum[i] / (count[i] as f64 * lrd[start + i] + LOF_EPSILON))
        })
        .collect())
}

/// Negated LOF, so that more negative means more outlying.
pub fn lof_scores(points: &PointSet, k: usize) -> Result<Vec<f64>> {
    Ok(local_outlier_factors(points, k)?.into_iter().map(|v| -v).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> PointSet {
        PointSet::new(1, xs.to_vec()).unwrap()
    }

    #[test]
    fn k_distance_collinear() {
        let p = line(&[0.0, 1.0, 3.0]);
        assert_eq!(k_distances(&p, 1).unwrap(), vec![1.0, 1.0, 2.0]);
    }

    #[test]
    fn k_equal_n_minus_one_takes_everyone() {
        let p = line(&[0.0, 1.0, 3.0, 7.0]);
        for nb in knn(&p, 3).unwrap().iter() {
            assert_eq!(nb.neighbors.len(), 3);
        }
    }

    #[test]
    fn square_corners() {
        let p = PointSet::from_rows(&[[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]).unwrap();
        let nb = knn(&p, 2).unwrap();
        assert_eq!(nb[0].neighbors, vec![1, 3]);
        assert_eq!(nb[1].neighbors, vec![0, 2]);
        assert_eq!(nb[2].neighbors, vec![1, 3]);
        assert!(nb.iter().all(|n| n.k_distance == 2.0));
    }

    #[test]
    fn ties_enlarge_neighborhood() {
        // Point 0 has three points at distance 1; k = 1 still includes all of them.
        let p = PointSet::from_rows(&[[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]]).unwrap();
        let nb = knn(&p, 1).unwrap();
        assert_eq!(nb[0].neighbors, vec![1, 2, 3]);
    }

    #[test]
    fn k_out_of_range() {
        let p = line(&[0.0, 1.0, 3.0]);
        assert!(matches!(knn(&p, 3), Err(Error::Config(_))));
        assert!(matches!(lof_scores(&p, 0), Err(Error::Config(_))));
    }

    #[test]
    fn identical_points_are_finite_and_equal() {
        let p = PointSet::new(3, vec![0.25; 30]).unwrap();
        let s = lof_scores(&p, 3).unwrap();
        assert!(s.iter().all(|v| v.is_finite()));
        assert!(s.iter().all(|&v| v == s[0]));
    }

    #[test]
    fn far_point_is_most_negative() {
        let mut rows: Vec<[f64; 2]> = (0..20)
            .map(|i| {
                let a = i as f64 * 0.314;
                [a.cos(), a.sin() * 0.5]
            })
            .collect();
        rows.push([100.0, 0.0]);
        let s = lof_scores(&PointSet::from_rows(&rows).unwrap(), 3).unwrap();
        let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(s[20], min);
    }
}
