//! Regime assembly: plain flow features, node features, or the mixed
//! prolongation [x_t; z_src; z_dst], plus post-expansion standardization.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{node_labels, NodeLabelRule, TrafficGraph};
use crate::ingest::FlowDataset;
use crate::topo::{CatalogId, NodeFeatureMatrix};

#[derive(Debug, Error)]
pub enum ExpandError {
    #[error("{0:?} regime requires node features")]
    MissingNodeFeatures(Regime),
    #[error("{0:?} regime requires the traffic graph")]
    MissingGraph(Regime),
    #[error("flow endpoint {0:?} is not a node of the provided graph")]
    UnknownEndpoint(String),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}

/// Which matrix the detectors see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Plain flow features, m×N.
    Standard,
    /// Node features, p×n, columns indexed by NodeId.
    Graph,
    /// Flows prolonged with endpoint embeddings, (m+2p)×N.
    Mixed,
}

impl Regime {
    pub fn parse(name: &str) -> Option<Regime> {
        match name.trim().to_ascii_lowercase().as_str() {
            "standard" => Some(Regime::Standard),
            "graph" => Some(Regime::Graph),
            "mixed" => Some(Regime::Mixed),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regime::Standard => "standard",
            Regime::Graph => "graph",
            Regime::Mixed => "mixed",
        }
    }
}

/// Where an expanded matrix came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub schema_name: String,
    pub weight_column: String,
    pub catalog: CatalogId,
    pub p: usize,
    pub m: usize,
}

/// A detector-ready matrix: one sample per column.
#[derive(Debug, Clone)]
pub struct ExpandedDataset {
    /// d×N (standard/mixed over flows) or p×n (graph over nodes).
    pub values: Array2<f64>,
    pub labels: Option<Vec<bool>>,
    pub regime: Regime,
    pub provenance: Provenance,
    pub row_names: Vec<String>,
    /// Original flow indices (standard/mixed) or node ids (graph).
    pub column_ids: Vec<usize>,
}

impl ExpandedDataset {
    /// Feature dimension d.
    pub fn d(&self) -> usize {
        self.values.nrows()
    }

    /// Sample count.
    pub fn n(&self) -> usize {
        self.values.ncols()
    }

    /// Delimited export in input-like shape: header of row names, one line
    /// per column (sample).
    pub fn to_delimited(&self) -> String {
        let mut out = String::from("sample_id");
        for name in &self.row_names {
            out.push(',');
            out.push_str(name);
        }
        if self.labels.is_some() {
            out.push_str(",label");
        }
        out.push('\n');
        for col in 0..self.n() {
            out.push_str(&self.column_ids[col].to_string());
            for v in self.values.column(col) {
                out.push(',');
                out.push_str(&format!("{v}"));
            }
            if let Some(labels) = &self.labels {
                out.push(',');
                out.push_str(if labels[col] { "1" } else { "0" });
            }
            out.push('\n');
        }
        out
    }
}

/// Prolongs every flow column with its endpoints' feature columns:
/// column t becomes [x_t; z_source; z_destination].
pub fn expand(
    ds: &FlowDataset,
    z: &NodeFeatureMatrix,
    g: &TrafficGraph,
) -> Result<ExpandedDataset, ExpandError> {
    let m = ds.m;
    let p = z.p();
    let n = ds.n();
    let mut values = Array2::zeros((m + 2 * p, n));
    for (t, rec) in ds.records.iter().enumerate() {
        let src = g
            .node_of(&rec.src)
            .ok_or_else(|| ExpandError::UnknownEndpoint(rec.src.clone()))?;
        let dst = g
            .node_of(&rec.dst)
            .ok_or_else(|| ExpandError::UnknownEndpoint(rec.dst.clone()))?;
        for (i, &v) in rec.features.iter().enumerate() {
            values[[i, t]] = v;
        }
        for (i, &v) in z.column(src).iter().enumerate() {
            values[[m + i, t]] = v;
        }
        for (i, &v) in z.column(dst).iter().enumerate() {
            values[[m + p + i, t]] = v;
        }
    }
    let mut row_names = ds.schema.numeric_feature_columns.clone();
    row_names.extend(z.feature_names.iter().map(|f| format!("z_src_{f}")));
    row_names.extend(z.feature_names.iter().map(|f| format!("z_dst_{f}")));
    Ok(ExpandedDataset {
        values,
        labels: ds.label_vec(),
        regime: Regime::Mixed,
        provenance: Provenance {
            schema_name: ds.schema.name.clone(),
            weight_column: g.weight_column().to_string(),
            catalog: z.catalog,
            p,
            m,
        },
        row_names,
        column_ids: ds.records.iter().map(|r| r.index).collect(),
    })
}

/// Assembles the requested regime from the pipeline pieces.
pub fn as_regime(
    ds: &FlowDataset,
    z: Option<&NodeFeatureMatrix>,
    g: Option<&TrafficGraph>,
    regime: Regime,
    rule: NodeLabelRule,
) -> Result<ExpandedDataset, ExpandError> {
    match regime {
        Regime::Standard => {
            let values = ds.feature_matrix();
            Ok(ExpandedDataset {
                values,
                labels: ds.label_vec(),
                regime,
                provenance: Provenance {
                    schema_name: ds.schema.name.clone(),
                    weight_column: ds.schema.summable_weight_column.clone(),
                    catalog: CatalogId::Empty,
                    p: 0,
                    m: ds.m,
                },
                row_names: ds.schema.numeric_feature_columns.clone(),
                column_ids: ds.records.iter().map(|r| r.index).collect(),
            })
        }
        Regime::Graph => {
            let z = z.ok_or(ExpandError::MissingNodeFeatures(regime))?;
            let g = g.ok_or(ExpandError::MissingGraph(regime))?;
            let labels = if ds.records.iter().all(|r| r.label.is_some()) {
                Some(node_labels(ds, g, rule)?)
            } else {
                None
            };
            Ok(ExpandedDataset {
                values: z.values.clone(),
                labels,
                regime,
                provenance: Provenance {
                    schema_name: ds.schema.name.clone(),
                    weight_column: g.weight_column().to_string(),
                    catalog: z.catalog,
                    p: z.p(),
                    m: ds.m,
                },
                row_names: z.feature_names.clone(),
                column_ids: (0..z.n()).collect(),
            })
        }
        Regime::Mixed => {
            let z = z.ok_or(ExpandError::MissingNodeFeatures(regime))?;
            let g = g.ok_or(ExpandError::MissingGraph(regime))?;
            expand(ds, z, g)
        }
    }
}

/// Per-feature zero-mean unit-variance scaling, fitted on one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits on columns of `x` (one sample per column). Constant features
    /// get unit scale so they standardize to zero rather than NaN.
    pub fn fit(x: ArrayView2<'_, f64>) -> Standardizer {
        let d = x.nrows();
        let n = x.ncols().max(1);
        let mut mean = vec![0.0; d];
        let mut std = vec![1.0; d];
        for i in 0..d {
            let row = x.row(i);
            let mu = row.sum() / n as f64;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64;
            mean[i] = mu;
            std[i] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Standardizer { mean, std }
    }

    /// Standardizes in place; rows must match the fitted dimension.
    pub fn apply(&self, x: &mut Array2<f64>) {
        assert_eq!(x.nrows(), self.mean.len(), "dimension mismatch");
        for (i, mut row) in x.rows_mut().into_iter().enumerate() {
            let (mu, sd) = (self.mean[i], self.std[i]);
            row.mapv_inplace(|v| (v - mu) / sd);
        }
    }

    /// Fits on `fit_block` and applies to every given matrix.
    pub fn fit_apply(fit_block: ArrayView2<'_, f64>, targets: &mut [&mut Array2<f64>]) -> Standardizer {
        let s = Standardizer::fit(fit_block);
        for t in targets.iter_mut() {
            s.apply(t);
        }
        s
    }
}
