//! Per-node topological features from egonets and random walks.

mod egonet;
mod features;
mod walk;

pub use egonet::{extract_egonet, Egonet};
pub use features::{
    node_features, rank_normalize, signed_log1p, stack_features, CatalogId, FeatureConfig,
    FeatureMode, NodeFeatureMatrix, TopoError,
};
pub use walk::{sample_walk, RandomWalk, WalkTermination};
