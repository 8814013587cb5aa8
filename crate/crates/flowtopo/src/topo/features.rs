//! Feature catalogs turning egonets and walks into fixed-length vectors.

use std::collections::HashSet;
use std::fmt;

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, TrafficGraph};
use crate::util::derive_seed;

use super::egonet::{extract_egonet, Egonet};
use super::walk::{sample_walk, RandomWalk, WalkTermination};

#[derive(Debug, Error)]
pub enum TopoError {
    #[error("node id {node} out of range for graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("walk length must be at least 1")]
    InvalidWalkLength,
    #[error("ragged feature vectors: expected length {expected}, found {got} at index {at}")]
    RaggedInput {
        expected: usize,
        got: usize,
        at: usize,
    },
    #[error("feature name count {names} does not match vector length {p}")]
    NameCountMismatch { names: usize, p: usize },
}

/// Whether features come from egonets or sampled walks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    Egonet,
    RandomWalk,
}

/// Named feature catalogs: base statistics, optionally extended with
/// signed log1p transforms and rank-normalized forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CatalogId {
    /// 16 egonet statistics + log1p + rank-normalized forms (p = 48).
    #[serde(rename = "egonet-48")]
    Egonet48,
    /// 16 egonet statistics + log1p forms (p = 32).
    #[serde(rename = "egonet-32")]
    Egonet32,
    /// 16 egonet statistics (p = 16).
    #[serde(rename = "egonet-16")]
    Egonet16,
    /// 7 walk statistics + log1p + rank-normalized forms (p = 21).
    #[serde(rename = "walk-21")]
    Walk21,
    /// 7 walk statistics + log1p forms (p = 14).
    #[serde(rename = "walk-14")]
    Walk14,
    /// 7 walk statistics (p = 7).
    #[serde(rename = "walk-7")]
    Walk7,
    /// No topological features (p = 0).
    Empty,
}

impl CatalogId {
    pub fn parse(name: &str) -> Option<CatalogId> {
        match name.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "egonet-48" | "egonet48" => Some(Self::Egonet48),
            "egonet-32" | "egonet32" => Some(Self::Egonet32),
            "egonet-16" | "egonet16" => Some(Self::Egonet16),
            "walk-21" | "walk21" => Some(Self::Walk21),
            "walk-14" | "walk14" => Some(Self::Walk14),
            "walk-7" | "walk7" => Some(Self::Walk7),
            "empty" | "none" => Some(Self::Empty),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Egonet48 => "egonet-48",
            Self::Egonet32 => "egonet-32",
            Self::Egonet16 => "egonet-16",
            Self::Walk21 => "walk-21",
            Self::Walk14 => "walk-14",
            Self::Walk7 => "walk-7",
            Self::Empty => "empty",
        }
    }

    /// Feature count p.
    pub fn p(&self) -> usize {
        match self {
            Self::Egonet48 => 48,
            Self::Egonet32 => 32,
            Self::Egonet16 => 16,
            Self::Walk21 => 21,
            Self::Walk14 => 14,
            Self::Walk7 => 7,
            Self::Empty => 0,
        }
    }

    pub fn mode(&self) -> Option<FeatureMode> {
        match self {
            Self::Egonet48 | Self::Egonet32 | Self::Egonet16 => Some(FeatureMode::Egonet),
            Self::Walk21 | Self::Walk14 | Self::Walk7 => Some(FeatureMode::RandomWalk),
            Self::Empty => None,
        }
    }

    /// Included transform tiers: (log1p, rank-normalized).
    fn tiers(&self) -> (bool, bool) {
        match self {
            Self::Egonet48 | Self::Walk21 => (true, true),
            Self::Egonet32 | Self::Walk14 => (true, false),
            Self::Egonet16 | Self::Walk7 => (false, false),
            Self::Empty => (false, false),
        }
    }
}

impl fmt::Display for CatalogId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Extraction settings for [`node_features`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub catalog: CatalogId,
    /// Maximum walk length ℓ.
    pub walk_length: usize,
    /// Walks sampled per node; features are averaged over them.
    pub walks_per_node: usize,
    pub seed: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            catalog: CatalogId::Egonet48,
            walk_length: 10,
            walks_per_node: 8,
            seed: 0,
        }
    }
}

/// Z ∈ R^{p×n}: one topological feature column per node.
#[derive(Debug, Clone)]
pub struct NodeFeatureMatrix {
    /// p×n values, column i belongs to NodeId i.
    pub values: Array2<f64>,
    pub feature_names: Vec<String>,
    pub catalog: CatalogId,
}

impl NodeFeatureMatrix {
    pub fn p(&self) -> usize {
        self.values.nrows()
    }

    pub fn n(&self) -> usize {
        self.values.ncols()
    }

    pub fn mode(&self) -> Option<FeatureMode> {
        self.catalog.mode()
    }

    pub fn column(&self, node: NodeId) -> ArrayView1<'_, f64> {
        self.values.column(node.index())
    }

    /// Delimited export: header of feature names, one row per node keyed
    /// by its endpoint string.
    pub fn to_delimited(&self, g: &TrafficGraph) -> String {
        let mut out = String::from("endpoint");
        for name in &self.feature_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for i in 0..self.n() {
            out.push_str(g.endpoint(NodeId(i as u32)));
            for v in self.values.column(i) {
                out.push(',');
                out.push_str(&format!("{v}"));
            }
            out.push('\n');
        }
        out
    }
}

const EGONET_BASE_NAMES: [&str; 16] = [
    "egonet_node_count",
    "center_out_links",
    "center_in_links",
    "egonet_edge_count",
    "center_out_weight",
    "center_in_weight",
    "egonet_total_weight",
    "egonet_mean_weight",
    "egonet_max_weight",
    "egonet_min_weight",
    "reciprocal_pairs",
    "center_degree_ratio",
    "nn_edge_count",
    "nn_total_weight",
    "nn_mean_weight",
    "nn_max_weight",
];

const WALK_BASE_NAMES: [&str; 7] = [
    "first_leg_weight",
    "bottleneck_weight",
    "walk_length",
    "total_walk_weight",
    "mean_step_weight",
    "distinct_nodes",
    "returned_to_start",
];

/// sign(x) · ln(1 + |x|): monotone, finite, defined for negatives.
pub fn signed_log1p(x: f64) -> f64 {
    if x >= 0.0 {
        x.ln_1p()
    } else {
        -(-x).ln_1p()
    }
}

/// Average ranks mapped to [0, 1]: (rank − 1)/(n − 1), ties averaged.
///
/// A single value ranks 0.5, as does every value of a constant slice.
pub fn rank_normalize(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![0.5];
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        // ranks are 1-based; a tie block spanning sorted slots i..=j
        // shares the average rank (i + j)/2 + 1
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let scaled = (avg_rank - 1.0) / (n as f64 - 1.0);
        for &k in &idx[i..=j] {
            out[k] = scaled;
        }
        i = j + 1;
    }
    out
}

fn egonet_base(g: &TrafficGraph, ego: &Egonet) -> [f64; 16] {
    let center = ego.center;
    let node_count = ego.members.len() as f64;
    let out_links = g.out_degree(center) as f64;
    let in_links = g.in_degree(center) as f64;
    let edge_count = ego.edges.len() as f64;
    let center_out_weight: f64 = g.out_edges(center).iter().map(|&(_, w)| w).sum();
    let center_in_weight: f64 = g.in_edges(center).iter().map(|&(_, w)| w).sum();

    let weights = || ego.edges.iter().map(|&(_, _, w)| w);
    let total_weight: f64 = weights().sum();
    let (mean_weight, max_weight, min_weight) = if ego.edges.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        (
            total_weight / edge_count,
            weights().fold(f64::NEG_INFINITY, f64::max),
            weights().fold(f64::INFINITY, f64::min),
        )
    };

    let pairs: HashSet<(NodeId, NodeId)> =
        ego.edges.iter().map(|&(u, v, _)| (u, v)).collect();
    let reciprocal = pairs
        .iter()
        .filter(|&&(u, v)| u < v && pairs.contains(&(v, u)))
        .count() as f64;

    let degree_ratio = if ego.edges.is_empty() {
        0.0
    } else {
        (out_links + in_links) / edge_count
    };

    // edges whose endpoints are both neighbors (center not involved)
    let nn = || {
        ego.edges
            .iter()
            .filter(move |&&(u, v, _)| u != center && v != center)
    };
    let nn_count = nn().count();
    let nn_total: f64 = nn().map(|&(_, _, w)| w).sum();
    let (nn_mean, nn_max) = if nn_count == 0 {
        (0.0, 0.0)
    } else {
        (
            nn_total / nn_count as f64,
            nn().map(|&(_, _, w)| w).fold(f64::NEG_INFINITY, f64::max),
        )
    };

    [
        node_count,
        out_links,
        in_links,
        edge_count,
        center_out_weight,
        center_in_weight,
        total_weight,
        mean_weight,
        max_weight,
        min_weight,
        reciprocal,
        degree_ratio,
        nn_count as f64,
        nn_total,
        nn_mean,
        nn_max,
    ]
}

fn walk_base(walk: &RandomWalk) -> [f64; 7] {
    let len = walk.len() as f64;
    // dead-ended walks report zero for weight aggregates but keep their
    // actual length and node counts
    let zero_weights = walk.is_empty() || walk.terminated_by == WalkTermination::DeadEnd;
    let (first_leg, bottleneck, total, mean) = if zero_weights {
        (0.0, 0.0, 0.0, 0.0)
    } else {
        let first = walk.steps[0].2;
        let min = walk
            .steps
            .iter()
            .map(|&(_, _, w)| w)
            .fold(f64::INFINITY, f64::min);
        let total: f64 = walk.steps.iter().map(|&(_, _, w)| w).sum();
        (first, min, total, total / len)
    };
    let returned = (walk.terminated_by == WalkTermination::ReturnedToStart) as u8 as f64;
    [
        first_leg,
        bottleneck,
        len,
        total,
        mean,
        walk.distinct_nodes() as f64,
        returned,
    ]
}

fn base_vector(g: &TrafficGraph, node: NodeId, config: &FeatureConfig) -> Vec<f64> {
    match config.catalog.mode() {
        None => Vec::new(),
        Some(FeatureMode::Egonet) => {
            let ego = extract_egonet(g, node).expect("node id in range");
            egonet_base(g, &ego).to_vec()
        }
        Some(FeatureMode::RandomWalk) => {
            let mut acc = [0.0; 7];
            for k in 0..config.walks_per_node {
                let seed = derive_seed(config.seed, &[node.index() as u64, k as u64]);
                let walk = sample_walk(g, node, config.walk_length, seed).expect("valid walk");
                for (a, b) in acc.iter_mut().zip(walk_base(&walk)) {
                    *a += b;
                }
            }
            acc.iter()
                .map(|v| v / config.walks_per_node.max(1) as f64)
                .collect()
        }
    }
}

fn base_names(mode: Option<FeatureMode>) -> Vec<String> {
    match mode {
        None => Vec::new(),
        Some(FeatureMode::Egonet) => EGONET_BASE_NAMES.iter().map(|s| s.to_string()).collect(),
        Some(FeatureMode::RandomWalk) => WALK_BASE_NAMES.iter().map(|s| s.to_string()).collect(),
    }
}

/// Extracts Z for every node in parallel; column i belongs to NodeId i.
pub fn node_features(
    g: &TrafficGraph,
    config: &FeatureConfig,
) -> Result<NodeFeatureMatrix, TopoError> {
    if g.n() == 0 {
        return Err(TopoError::EmptyGraph);
    }
    if config.catalog.mode() == Some(FeatureMode::RandomWalk) && config.walk_length == 0 {
        return Err(TopoError::InvalidWalkLength);
    }
    let n = g.n();
    let base: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| base_vector(g, NodeId(i as u32), config))
        .collect();

    let (with_log1p, with_rank) = config.catalog.tiers();
    let names = base_names(config.catalog.mode());
    let b = names.len();
    let p = config.catalog.p();
    let mut values = Array2::zeros((p, n));
    let mut feature_names = names.clone();
    for (col, vec) in base.iter().enumerate() {
        for (row, &v) in vec.iter().enumerate() {
            values[[row, col]] = v;
        }
    }
    if with_log1p {
        for name in &names {
            feature_names.push(format!("log1p_{name}"));
        }
        for row in 0..b {
            for col in 0..n {
                values[[b + row, col]] = signed_log1p(values[[row, col]]);
            }
        }
    }
    if with_rank {
        for name in &names {
            feature_names.push(format!("rank_{name}"));
        }
        let rank_offset = 2 * b;
        for row in 0..b {
            let row_vals: Vec<f64> = (0..n).map(|col| values[[row, col]]).collect();
            for (col, r) in rank_normalize(&row_vals).into_iter().enumerate() {
                values[[rank_offset + row, col]] = r;
            }
        }
    }
    debug_assert_eq!(feature_names.len(), p);
    Ok(NodeFeatureMatrix {
        values,
        feature_names,
        catalog: config.catalog,
    })
}

/// Stacks per-node vectors into a p×n matrix in NodeId order.
pub fn stack_features(
    per_node: &[Vec<f64>],
    feature_names: Vec<String>,
    catalog: CatalogId,
) -> Result<NodeFeatureMatrix, TopoError> {
    let p = feature_names.len();
    for (at, vec) in per_node.iter().enumerate() {
        if vec.len() != p {
            return Err(TopoError::RaggedInput {
                expected: p,
                got: vec.len(),
                at,
            });
        }
    }
    let mut values = Array2::zeros((p, per_node.len()));
    for (col, vec) in per_node.iter().enumerate() {
        for (row, &v) in vec.iter().enumerate() {
            values[[row, col]] = v;
        }
    }
    Ok(NodeFeatureMatrix {
        values,
        feature_names,
        catalog,
    })
}
