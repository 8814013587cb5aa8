//! Unsupervised detectors behind one fit/score/predict contract.
//!
//! Scores are uniformly oriented: HIGHER means MORE anomalous. A point is
//! flagged iff its score exceeds the model threshold τ. IForest and LOF set
//! τ at the (1−contamination)-quantile of training scores; the one-class
//! SVM scores −f(x) and uses the sign rule τ = 0.

mod iforest;
mod lof;
mod ocsvm;
mod persist;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use iforest::IForestState;
pub use lof::LofState;
pub use ocsvm::{GammaSpec, OcSvmState};
pub use persist::{load_model, save_model, ModelFile, FORMAT_VERSION};

use crate::util::quantile;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("training set too small: {got} samples, need at least {need}")]
    TooFewSamples { need: usize, got: usize },
    #[error("dimension mismatch: model fitted on d={expected}, input has d={got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("solver did not converge within {sweeps} sweeps (gap {gap:.3e} > tol {tol:.3e})")]
    NoConvergence { sweeps: usize, gap: f64, tol: f64 },
    #[error("model i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model serialization error: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("unsupported model format version {found} (expected {expected})")]
    BadFormatVersion { found: u32, expected: u32 },
}

/// Detector family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    #[serde(rename = "iforest")]
    IForest,
    Lof,
    #[serde(rename = "ocsvm")]
    OcSvm,
}

impl DetectorKind {
    pub fn name(&self) -> &'static str {
        match self {
            DetectorKind::IForest => "iforest",
            DetectorKind::Lof => "lof",
            DetectorKind::OcSvm => "ocsvm",
        }
    }
}

/// Fit settings for one detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "detector", rename_all = "snake_case")]
pub enum DetectorParams {
    #[serde(rename = "iforest")]
    IForest {
        n_trees: usize,
        /// Subsample size ψ per tree (capped at T).
        subsample: usize,
        /// Expected anomaly fraction in (0, 0.5]; sets τ.
        contamination: f64,
        #[serde(default)]
        seed: u64,
    },
    Lof {
        /// Neighbor count; must satisfy k < T.
        k: usize,
        contamination: f64,
    },
    #[serde(rename = "ocsvm")]
    OcSvm {
        /// Margin parameter ν in (0, 1].
        nu: f64,
        gamma: GammaSpec,
        /// Duality-gap tolerance.
        #[serde(default = "default_tol")]
        tol: f64,
        /// Sweep cap for the solver.
        #[serde(default = "default_max_iter")]
        max_iter: usize,
    },
}

fn default_tol() -> f64 {
    1e-4
}

fn default_max_iter() -> usize {
    1000
}

impl DetectorParams {
    pub fn kind(&self) -> DetectorKind {
        match self {
            DetectorParams::IForest { .. } => DetectorKind::IForest,
            DetectorParams::Lof { .. } => DetectorKind::Lof,
            DetectorParams::OcSvm { .. } => DetectorKind::OcSvm,
        }
    }

    pub fn validate(&self) -> Result<(), DetectError> {
        let bad = |msg: String| Err(DetectError::InvalidParameter(msg));
        match *self {
            DetectorParams::IForest {
                n_trees,
                subsample,
                contamination,
                ..
            } => {
                if n_trees == 0 {
                    return bad("n_trees must be positive".into());
                }
                if subsample < 2 {
                    return bad("subsample must be at least 2".into());
                }
                check_contamination(contamination)?;
            }
            DetectorParams::Lof { k, contamination } => {
                if k == 0 {
                    return bad("k must be at least 1".into());
                }
                check_contamination(contamination)?;
            }
            DetectorParams::OcSvm {
                nu,
                gamma,
                tol,
                max_iter,
            } => {
                if !(nu > 0.0 && nu <= 1.0) {
                    return bad(format!("nu must be in (0, 1], got {nu}"));
                }
                if let GammaSpec::Fixed(v) = gamma {
                    if !(v > 0.0) {
                        return bad(format!("gamma must be positive, got {v}"));
                    }
                }
                if !(tol > 0.0) {
                    return bad(format!("tol must be positive, got {tol}"));
                }
                if max_iter == 0 {
                    return bad("max_iter must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// Short human-readable form for reports.
    pub fn describe(&self) -> String {
        match self {
            DetectorParams::IForest {
                n_trees,
                subsample,
                contamination,
                seed,
            } => format!(
                "iforest(n_trees={n_trees}, subsample={subsample}, c={contamination}, seed={seed})"
            ),
            DetectorParams::Lof { k, contamination } => format!("lof(k={k}, c={contamination})"),
            DetectorParams::OcSvm {
                nu,
                gamma,
                tol,
                max_iter,
            } => format!("ocsvm(nu={nu}, gamma={gamma}, tol={tol}, max_iter={max_iter})"),
        }
    }
}

fn check_contamination(c: f64) -> Result<(), DetectError> {
    if c > 0.0 && c <= 0.5 {
        Ok(())
    } else {
        Err(DetectError::InvalidParameter(format!(
            "contamination must be in (0, 0.5], got {c}"
        )))
    }
}

/// Fitted state per detector family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedState {
    IForest(IForestState),
    Lof(LofState),
    OcSvm(OcSvmState),
}

/// An immutable fitted detector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorModel {
    pub params: DetectorParams,
    /// Input dimension d the model was fitted on.
    pub dim: usize,
    /// Decision threshold τ: predict = score > τ.
    pub threshold: f64,
    /// Scores of the training samples, in training order.
    pub train_scores: Vec<f64>,
    pub state: FittedState,
}

impl DetectorModel {
    pub fn kind(&self) -> DetectorKind {
        self.params.kind()
    }

    /// Scores columns of `x`; higher = more anomalous.
    pub fn score(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>, DetectError> {
        if x.nrows() != self.dim {
            return Err(DetectError::DimensionMismatch {
                expected: self.dim,
                got: x.nrows(),
            });
        }
        Ok(match &self.state {
            FittedState::IForest(s) => s.score(x),
            FittedState::Lof(s) => s.score(x),
            FittedState::OcSvm(s) => s.score(x),
        })
    }

    /// Elementwise score > τ.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<bool>, DetectError> {
        Ok(self
            .score(x)?
            .into_iter()
            .map(|s| s > self.threshold)
            .collect())
    }
}

/// Dispatching fit over the parameter variants.
pub fn fit(x: ArrayView2<'_, f64>, params: &DetectorParams) -> Result<DetectorModel, DetectError> {
    match params {
        DetectorParams::IForest { .. } => fit_iforest(x, params),
        DetectorParams::Lof { .. } => fit_lof(x, params),
        DetectorParams::OcSvm { .. } => fit_ocsvm(x, params),
    }
}

/// Builds an isolation forest on columns of `x` (d×T, one sample per column).
pub fn fit_iforest(
    x: ArrayView2<'_, f64>,
    params: &DetectorParams,
) -> Result<DetectorModel, DetectError> {
    params.validate()?;
    let DetectorParams::IForest {
        n_trees,
        subsample,
        contamination,
        seed,
    } = *params
    else {
        return Err(DetectError::InvalidParameter(
            "expected iforest parameters".into(),
        ));
    };
    if x.ncols() < 2 {
        return Err(DetectError::TooFewSamples {
            need: 2,
            got: x.ncols(),
        });
    }
    let state = IForestState::fit(x, n_trees, subsample, seed);
    let train_scores = state.score(x);
    let threshold = quantile(&train_scores, 1.0 - contamination);
    Ok(DetectorModel {
        params: params.clone(),
        dim: x.nrows(),
        threshold,
        train_scores,
        state: FittedState::IForest(state),
    })
}

/// Fits LOF over columns of `x`; stores the training points.
pub fn fit_lof(
    x: ArrayView2<'_, f64>,
    params: &DetectorParams,
) -> Result<DetectorModel, DetectError> {
    params.validate()?;
    let DetectorParams::Lof { k, contamination } = *params else {
        return Err(DetectError::InvalidParameter(
            "expected lof parameters".into(),
        ));
    };
    if x.ncols() <= k {
        return Err(DetectError::InvalidParameter(format!(
            "k={} requires more than k training samples, got {}",
            k,
            x.ncols()
        )));
    }
    let state = LofState::fit(x, k);
    let train_scores = state.train_lof.clone();
    let threshold = quantile(&train_scores, 1.0 - contamination);
    Ok(DetectorModel {
        params: params.clone(),
        dim: x.nrows(),
        threshold,
        train_scores,
        state: FittedState::Lof(state),
    })
}

/// Trains a one-class SVM on columns of `x` via SMO-style pair updates.
pub fn fit_ocsvm(
    x: ArrayView2<'_, f64>,
    params: &DetectorParams,
) -> Result<DetectorModel, DetectError> {
    params.validate()?;
    let DetectorParams::OcSvm {
        nu,
        gamma,
        tol,
        max_iter,
    } = *params
    else {
        return Err(DetectError::InvalidParameter(
            "expected ocsvm parameters".into(),
        ));
    };
    if x.ncols() < 2 {
        return Err(DetectError::TooFewSamples {
            need: 2,
            got: x.ncols(),
        });
    }
    let state = OcSvmState::fit(x, nu, gamma, tol, max_iter)?;
    let train_scores = state.score(x);
    Ok(DetectorModel {
        params: params.clone(),
        dim: x.nrows(),
        threshold: 0.0,
        train_scores,
        state: FittedState::OcSvm(state),
    })
}
