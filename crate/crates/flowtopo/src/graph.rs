//! Directed weighted traffic graph aggregated from flow records.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::ingest::FlowDataset;
use crate::util::fnv1a64;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("column {0:?} is not a numeric feature column of the dataset")]
    UnknownWeightColumn(String),
    #[error("dataset has no labels; node labels are evaluation-only")]
    UnlabeledDataset,
}

/// Dense node identifier in [0, n), assigned by first appearance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Directed graph over flow endpoints with per-edge aggregated weights.
#[derive(Debug, Clone)]
pub struct TrafficGraph {
    endpoint_of: Vec<String>,
    node_of: HashMap<String, NodeId>,
    out_adj: Vec<Vec<(NodeId, f64)>>,
    in_adj: Vec<Vec<(NodeId, f64)>>,
    total_edges: usize,
    weight_column: String,
}

/// Anything notable observed while aggregating edges.
#[derive(Debug, Clone, Default)]
pub struct BuildReport {
    /// Ordered endpoint pairs whose aggregate weight came out negative.
    pub negative_weight_edges: Vec<(String, String, f64)>,
}

/// How a node inherits anomaly labels from the flows that touch it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeLabelRule {
    /// Anomalous iff the node is the source of at least one attack flow.
    #[default]
    SourceOnly,
    /// Anomalous iff the node is the source or destination of one.
    SourceOrDest,
}

impl TrafficGraph {
    /// Builds a graph directly from endpoints and pre-aggregated edges.
    ///
    /// Unlike [`build_graph`] this permits isolated nodes. Duplicate (i, j)
    /// pairs still sum; node ids follow the order of `endpoints`.
    pub fn from_edges(
        endpoints: Vec<String>,
        edges: &[(u32, u32, f64)],
        weight_column: &str,
    ) -> TrafficGraph {
        let n = endpoints.len();
        let node_of = endpoints
            .iter()
            .enumerate()
            .map(|(i, ep)| (ep.clone(), NodeId(i as u32)))
            .collect();
        let mut weights: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
        for &(i, j, w) in edges {
            assert!((i as usize) < n && (j as usize) < n, "edge endpoint out of range");
            *weights.entry((NodeId(i), NodeId(j))).or_insert(0.0) += w;
        }
        let mut out_adj: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
        let mut in_adj: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
        let total_edges = weights.len();
        for (&(i, j), &w) in &weights {
            out_adj[i.index()].push((j, w));
            in_adj[j.index()].push((i, w));
        }
        for adj in in_adj.iter_mut() {
            adj.sort_unstable_by_key(|&(nb, _)| nb);
        }
        TrafficGraph {
            endpoint_of: endpoints,
            node_of,
            out_adj,
            in_adj,
            total_edges,
            weight_column: weight_column.to_string(),
        }
    }

    /// Node count.
    pub fn n(&self) -> usize {
        self.endpoint_of.len()
    }

    /// Count of distinct ordered endpoint pairs.
    pub fn total_edges(&self) -> usize {
        self.total_edges
    }

    pub fn node_of(&self, endpoint: &str) -> Option<NodeId> {
        self.node_of.get(endpoint).copied()
    }

    pub fn endpoint(&self, node: NodeId) -> &str {
        &self.endpoint_of[node.index()]
    }

    /// Out-edges of `node`, sorted by neighbor id.
    pub fn out_edges(&self, node: NodeId) -> &[(NodeId, f64)] {
        &self.out_adj[node.index()]
    }

    /// In-edges of `node`, sorted by neighbor id.
    pub fn in_edges(&self, node: NodeId) -> &[(NodeId, f64)] {
        &self.in_adj[node.index()]
    }

    pub fn out_degree(&self, node: NodeId) -> usize {
        self.out_adj[node.index()].len()
    }

    pub fn in_degree(&self, node: NodeId) -> usize {
        self.in_adj[node.index()].len()
    }

    /// Aggregated weight of edge (i, j) if present.
    pub fn weight(&self, i: NodeId, j: NodeId) -> Option<f64> {
        let adj = &self.out_adj[i.index()];
        adj.binary_search_by_key(&j, |&(nb, _)| nb)
            .ok()
            .map(|pos| adj[pos].1)
    }

    /// In- and out-neighbors of `node`, deduplicated and sorted, excluding
    /// the node itself (self-loops stay edges but are not neighbors).
    pub fn neighbor_set(&self, node: NodeId) -> Vec<NodeId> {
        let mut set: Vec<NodeId> = self.out_adj[node.index()]
            .iter()
            .chain(self.in_adj[node.index()].iter())
            .map(|&(nb, _)| nb)
            .filter(|&nb| nb != node)
            .collect();
        set.sort_unstable();
        set.dedup();
        set
    }

    /// Name of the feature column the edge weights were summed from.
    pub fn weight_column(&self) -> &str {
        &self.weight_column
    }

    /// Iterates all edges as (src, dst, weight), ordered by (src, dst).
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.out_adj.iter().enumerate().flat_map(|(i, adj)| {
            adj.iter()
                .map(move |&(j, w)| (NodeId(i as u32), j, w))
        })
    }

    /// Edge-list text: "src<TAB>dst<TAB>weight", one edge per line.
    pub fn edge_list_text(&self) -> String {
        let mut out = String::new();
        for (i, j, w) in self.edges() {
            writeln!(out, "{}\t{}\t{}", self.endpoint(i), self.endpoint(j), w).unwrap();
        }
        out
    }

    /// Stable digest over endpoints and edge weights, for provenance checks.
    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::new();
        for ep in &self.endpoint_of {
            bytes.extend_from_slice(ep.as_bytes());
            bytes.push(0);
        }
        for (i, j, w) in self.edges() {
            bytes.extend_from_slice(&i.0.to_le_bytes());
            bytes.extend_from_slice(&j.0.to_le_bytes());
            bytes.extend_from_slice(&w.to_bits().to_le_bytes());
        }
        fnv1a64(&bytes)
    }
}

/// Aggregates `ds` into a directed graph, summing `weight_column` over
/// repeated (src, dst) pairs. Node ids follow first appearance order.
pub fn build_graph(
    ds: &FlowDataset,
    weight_column: &str,
) -> Result<(TrafficGraph, BuildReport), GraphError> {
    let weight_idx = ds
        .schema
        .feature_index(weight_column)
        .ok_or_else(|| GraphError::UnknownWeightColumn(weight_column.to_string()))?;

    let mut node_of: HashMap<String, NodeId> = HashMap::new();
    let mut endpoint_of: Vec<String> = Vec::new();
    let mut intern = |ep: &str, endpoint_of: &mut Vec<String>| -> NodeId {
        if let Some(&id) = node_of.get(ep) {
            return id;
        }
        let id = NodeId(endpoint_of.len() as u32);
        node_of.insert(ep.to_string(), id);
        endpoint_of.push(ep.to_string());
        id
    };

    let mut weights: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
    for rec in &ds.records {
        let src = intern(&rec.src, &mut endpoint_of);
        let dst = intern(&rec.dst, &mut endpoint_of);
        *weights.entry((src, dst)).or_insert(0.0) += rec.features[weight_idx];
    }

    let n = endpoint_of.len();
    let mut out_adj: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
    let mut in_adj: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
    let mut report = BuildReport::default();
    let total_edges = weights.len();
    for (&(i, j), &w) in &weights {
        if w < 0.0 {
            report.negative_weight_edges.push((
                endpoint_of[i.index()].clone(),
                endpoint_of[j.index()].clone(),
                w,
            ));
        }
        out_adj[i.index()].push((j, w));
        in_adj[j.index()].push((i, w));
    }
    for adj in in_adj.iter_mut() {
        adj.sort_unstable_by_key(|&(nb, _)| nb);
    }

    Ok((
        TrafficGraph {
            endpoint_of,
            node_of,
            out_adj,
            in_adj,
            total_edges,
            weight_column: weight_column.to_string(),
        },
        report,
    ))
}

/// Per-node anomaly labels derived from flow labels.
pub fn node_labels(
    ds: &FlowDataset,
    g: &TrafficGraph,
    rule: NodeLabelRule,
) -> Result<Vec<bool>, GraphError> {
    if ds.records.iter().any(|r| r.label.is_none()) {
        return Err(GraphError::UnlabeledDataset);
    }
    let mut labels = vec![false; g.n()];
    for rec in &ds.records {
        if rec.label != Some(true) {
            continue;
        }
        if let Some(src) = g.node_of(&rec.src) {
            labels[src.index()] = true;
        }
        if rule == NodeLabelRule::SourceOrDest {
            if let Some(dst) = g.node_of(&rec.dst) {
                labels[dst.index()] = true;
            }
        }
    }
    Ok(labels)
}
