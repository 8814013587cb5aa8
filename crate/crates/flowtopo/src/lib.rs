//! Graph-augmented unsupervised anomaly detection for network flow records.
//!
//! The pipeline turns a flow table into a directed weighted graph of
//! communicating endpoints, summarizes each endpoint's local topology
//! (egonet statistics and random-walk profiles), concatenates those node
//! summaries onto the raw per-flow features, and hands the expanded vectors
//! to unsupervised detectors (isolation forest, local outlier factor,
//! one-class SVM) optionally fused by a voting ensemble.

pub mod detect;
pub mod ensemble;
pub mod eval;
pub mod expand;
pub mod graph;
pub mod ingest;
pub mod synth;
pub mod topo;
pub mod util;

pub use detect::{DetectorKind, DetectorModel, DetectorParams, GammaSpec};
pub use ensemble::{EnsembleModel, EnsembleParams, TieBreak, VoteRule};
pub use eval::{EvalError, EvalReport, GridSpec, SplitSpec};
pub use expand::{ExpandedDataset, Regime, Standardizer};
pub use graph::{build_graph, node_labels, NodeId, NodeLabelRule, TrafficGraph};
pub use ingest::{load_dataset, prefix_split, DatasetSchema, FlowDataset, FlowRecord};
pub use topo::{CatalogId, Egonet, FeatureConfig, NodeFeatureMatrix, RandomWalk};
