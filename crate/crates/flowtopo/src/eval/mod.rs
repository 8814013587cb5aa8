//! Evaluation harness: time-ordered prefix splits, grid-search tuning,
//! fixed-parameter training, rolling test curves, and report assembly.

mod grid;
mod metrics;
mod protocol;
mod report;
mod rolling;

use thiserror::Error;

use crate::detect::{DetectError, DetectorKind};
use crate::expand::{ExpandError, Regime};
use crate::graph::GraphError;
use crate::ingest::IngestError;
use crate::topo::TopoError;

pub use grid::{
    default_candidates, grid_search, BestSelection, CandidateScore, GridSpec, TrainedRegime,
};
pub use grid::train_regime;
pub use metrics::{attack_breakdown, balanced_accuracy, BalancedAccuracy, CategoryCount, Confusion};
pub use protocol::{
    node_categories, prepare_block, stage_ranges, RegimeData, SplitSpec, StageRanges,
};
pub use report::{cells_for, render_timings, EvalReport, ReportCell, TimingRow};
pub use rolling::{rolling_rows, scaled_false_positives, RollingRow};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("record {index} is a labeled positive without an attack category")]
    MissingCategory { index: usize },
    #[error("all candidates failed for {regime:?}/{detector:?}: {failures:?}")]
    AllCandidatesFailed {
        regime: Regime,
        detector: DetectorKind,
        failures: Vec<String>,
    },
    #[error("the {0:?} block is not fully labeled")]
    UnlabeledData(Regime),
    #[error("stage-range audit failed: {0}")]
    LeakageAudit(String),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Expand(#[from] ExpandError),
    #[error(transparent)]
    Topo(#[from] TopoError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}
