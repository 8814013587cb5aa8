//! Isolation forest: random axis-parallel splits over subsamples.

use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::util::{average_path_length, derive_seed};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        size: u32,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<TreeNode>,
    root: u32,
}

impl Tree {
    /// Path length of a query: tree depth reached plus the unbuilt-subtree
    /// estimate c(leaf size).
    fn path_length(&self, point: &[f64]) -> f64 {
        let mut node = self.root;
        let mut depth = 0.0;
        loop {
            match self.nodes[node as usize] {
                TreeNode::Leaf { size } => {
                    return depth + average_path_length(size as usize);
                }
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if point[feature] < threshold { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }
}

/// Fitted forest: trees, effective subsample size, and its normalizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IForestState {
    trees: Vec<Tree>,
    /// ψ actually used = min(requested, T).
    pub psi: usize,
    /// c(ψ) with exact harmonic numbers.
    pub c_norm: f64,
}

fn build_node(
    x: &ArrayView2<'_, f64>,
    points: &mut [usize],
    depth: usize,
    height_limit: usize,
    rng: &mut ChaCha8Rng,
    nodes: &mut Vec<TreeNode>,
) -> u32 {
    if points.len() <= 1 || depth >= height_limit {
        nodes.push(TreeNode::Leaf {
            size: points.len() as u32,
        });
        return (nodes.len() - 1) as u32;
    }
    // split only on features that actually vary here
    let d = x.nrows();
    let mut candidates: Vec<(usize, f64, f64)> = Vec::new();
    for f in 0..d {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &t in points.iter() {
            let v = x[[f, t]];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi > lo {
            candidates.push((f, lo, hi));
        }
    }
    if candidates.is_empty() {
        nodes.push(TreeNode::Leaf {
            size: points.len() as u32,
        });
        return (nodes.len() - 1) as u32;
    }
    let (feature, lo, hi) = candidates[rng.gen_range(0..candidates.len())];
    let threshold = rng.gen_range(lo..hi);
    let split_at = partition_in_place(points, |&t| x[[feature, t]] < threshold);
    let (left_pts, right_pts) = points.split_at_mut(split_at);
    if left_pts.is_empty() || right_pts.is_empty() {
        // degenerate draw at the boundary: count it against the depth budget
        let all = if left_pts.is_empty() { right_pts } else { left_pts };
        return build_node(x, all, depth + 1, height_limit, rng, nodes);
    }
    let left = build_node(x, left_pts, depth + 1, height_limit, rng, nodes);
    let right = build_node(x, right_pts, depth + 1, height_limit, rng, nodes);
    nodes.push(TreeNode::Split {
        feature,
        threshold,
        left,
        right,
    });
    (nodes.len() - 1) as u32
}

/// In-place partition; returns the split index.
fn partition_in_place(points: &mut [usize], pred: impl Fn(&usize) -> bool) -> usize {
    let mut split = 0;
    for i in 0..points.len() {
        if pred(&points[i]) {
            points.swap(split, i);
            split += 1;
        }
    }
    split
}

impl IForestState {
    pub fn fit(x: ArrayView2<'_, f64>, n_trees: usize, subsample: usize, seed: u64) -> IForestState {
        let t_total = x.ncols();
        let psi = subsample.min(t_total);
        let height_limit = (psi as f64).log2().ceil() as usize;
        let trees: Vec<Tree> = (0..n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[t as u64]));
                // partial Fisher-Yates: first psi entries form the subsample
                let mut idx: Vec<usize> = (0..t_total).collect();
                for i in 0..psi {
                    let j = rng.gen_range(i..t_total);
                    idx.swap(i, j);
                }
                let mut sample = idx[..psi].to_vec();
                let mut nodes = Vec::new();
                let root = build_node(&x, &mut sample, 0, height_limit, &mut rng, &mut nodes);
                Tree { nodes, root }
            })
            .collect();
        IForestState {
            trees,
            psi,
            c_norm: average_path_length(psi),
        }
    }

    /// Anomaly scores s = 2^(−E[h]/c(ψ)) ∈ (0, 1].
    pub fn score(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        let n_trees = self.trees.len() as f64;
        (0..x.ncols())
            .map(|q| {
                let col: Vec<f64> = x.column(q).to_vec();
                let mean_path: f64 =
                    self.trees.iter().map(|t| t.path_length(&col)).sum::<f64>() / n_trees;
                (-mean_path / self.c_norm).exp2()
            })
            .collect()
    }
}
