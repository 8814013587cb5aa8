//! Local outlier factor over stored training points.
//!
//! Degenerate-data conventions: a zero k-distance (duplicates) makes the
//! local reachability density +∞; a point with infinite lrd gets LOF 1
//! (it sits in a zero-radius cluster); a finite-lrd point whose neighbor
//! sum overflows to +∞ is capped at 1e12 so scores stay finite.

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Cap for LOF ratios that would otherwise be infinite.
pub const LOF_CAP: f64 = 1e12;

/// Fitted LOF state: training points with per-point k-distance and lrd.
///
/// lrd values can be +∞, which JSON cannot hold, so they are stored as raw
/// f64 bit patterns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LofState {
    pub k: usize,
    dim: usize,
    n_train: usize,
    /// Column-major training points: point i occupies [i·d, (i+1)·d).
    points: Vec<f64>,
    kdist: Vec<f64>,
    lrd_bits: Vec<u64>,
    pub train_lof: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// k-distance and the tie-inclusive neighbor set (indices ascending)
/// from a list of (distance, index) pairs.
fn knn(mut dists: Vec<(f64, usize)>, k: usize) -> (f64, Vec<(usize, f64)>) {
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let kdist = dists[k - 1].0;
    let mut neighbors: Vec<(usize, f64)> = dists
        .into_iter()
        .take_while(|&(d, _)| d <= kdist)
        .map(|(d, i)| (i, d))
        .collect();
    neighbors.sort_by_key(|&(i, _)| i);
    (kdist, neighbors)
}

/// lrd from reachability distances; 0 sum (all duplicates) gives +∞.
fn lrd_from(neighbors: &[(usize, f64)], kdist: &[f64]) -> f64 {
    let reach_sum: f64 = neighbors
        .iter()
        .map(|&(o, d)| kdist[o].max(d))
        .sum();
    if reach_sum == 0.0 {
        f64::INFINITY
    } else {
        neighbors.len() as f64 / reach_sum
    }
}

/// LOF value under the stated conventions.
fn lof_from(own_lrd: f64, neighbors: &[(usize, f64)], lrd: &[f64]) -> f64 {
    if own_lrd.is_infinite() {
        return 1.0;
    }
    let neighbor_sum: f64 = neighbors.iter().map(|&(o, _)| lrd[o]).sum();
    let ratio = neighbor_sum / (neighbors.len() as f64 * own_lrd);
    if ratio.is_finite() {
        ratio
    } else {
        LOF_CAP
    }
}

impl LofState {
    pub fn fit(x: ArrayView2<'_, f64>, k: usize) -> LofState {
        let d = x.nrows();
        let t = x.ncols();
        let mut points = vec![0.0; d * t];
        for i in 0..t {
            points[i * d..(i + 1) * d].copy_from_slice(&x.column(i).to_vec());
        }
        let point = |i: usize| &points[i * d..(i + 1) * d];

        let per_point: Vec<(f64, Vec<(usize, f64)>)> = (0..t)
            .into_par_iter()
            .map(|i| {
                let dists: Vec<(f64, usize)> = (0..t)
                    .filter(|&j| j != i)
                    .map(|j| (dist(point(i), point(j)), j))
                    .collect();
                knn(dists, k)
            })
            .collect();

        let kdist: Vec<f64> = per_point.iter().map(|&(kd, _)| kd).collect();
        let lrd: Vec<f64> = per_point
            .iter()
            .map(|(_, neighbors)| lrd_from(neighbors, &kdist))
            .collect();
        let train_lof: Vec<f64> = per_point
            .iter()
            .enumerate()
            .map(|(i, (_, neighbors))| lof_from(lrd[i], neighbors, &lrd))
            .collect();

        LofState {
            k,
            dim: d,
            n_train: t,
            points,
            kdist,
            lrd_bits: lrd.iter().map(|v| v.to_bits()).collect(),
            train_lof,
        }
    }

    fn lrd(&self) -> Vec<f64> {
        self.lrd_bits.iter().map(|&b| f64::from_bits(b)).collect()
    }

    /// LOF of arbitrary queries against the training set.
    ///
    /// A query at distance exactly 0 from some training point drops ONE
    /// such match from its candidate pool, so an exact duplicate of a
    /// training point scores identically to that point.
    pub fn score(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        let d = self.dim;
        let lrd = self.lrd();
        let point = |i: usize| &self.points[i * d..(i + 1) * d];
        (0..x.ncols())
            .into_par_iter()
            .map(|q| {
                let qcol: Vec<f64> = x.column(q).to_vec();
                let mut dists: Vec<(f64, usize)> = (0..self.n_train)
                    .map(|j| (dist(&qcol, point(j)), j))
                    .collect();
                if let Some(pos) = dists.iter().position(|&(dv, _)| dv == 0.0) {
                    dists.remove(pos);
                }
                let (_, neighbors) = knn(dists, self.k);
                let own_lrd = lrd_from(&neighbors, &self.kdist);
                lof_from(own_lrd, &neighbors, &lrd)
            })
            .collect()
    }
}
