//! Candidate grids, parallel tuning search, and fixed-parameter training.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use super::{balanced_accuracy, BalancedAccuracy, EvalError, RegimeData};
use crate::detect::{fit, DetectorKind, DetectorParams, GammaSpec};
use crate::ensemble::{ensemble_from_members, EnsembleModel, EnsembleParams};
use crate::expand::Regime;

/// Tuning search space: candidate parameter lists per detector family,
/// evaluated across the selected regimes.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub candidates: BTreeMap<DetectorKind, Vec<DetectorParams>>,
    pub regimes: Vec<Regime>,
    /// Break exact BA ties by shorter fit time before list order. Off by
    /// default so repeated runs select identically.
    pub time_tie_break: bool,
}

impl GridSpec {
    pub fn with_default_candidates(regimes: Vec<Regime>, seed: u64) -> GridSpec {
        GridSpec {
            candidates: default_candidates(seed),
            regimes,
            time_tie_break: false,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.regimes.is_empty() {
            return Err(EvalError::InvalidInput("no regimes selected".into()));
        }
        if self.candidates.is_empty() {
            return Err(EvalError::InvalidInput("no detectors selected".into()));
        }
        for (kind, list) in &self.candidates {
            if list.is_empty() {
                return Err(EvalError::InvalidInput(format!(
                    "empty candidate list for {}",
                    kind.name()
                )));
            }
            for params in list {
                if params.kind() != *kind {
                    return Err(EvalError::InvalidInput(format!(
                        "candidate {} listed under {}",
                        params.describe(),
                        kind.name()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The stock search space; spans the plausible magnitudes at prefix sizes.
pub fn default_candidates(seed: u64) -> BTreeMap<DetectorKind, Vec<DetectorParams>> {
    let mut iforest = Vec::new();
    for n_trees in [50, 100, 200] {
        for subsample in [64, 256] {
            for contamination in [0.01, 0.05, 0.1] {
                iforest.push(DetectorParams::IForest {
                    n_trees,
                    subsample,
                    contamination,
                    seed,
                });
            }
        }
    }
    let mut lof = Vec::new();
    for k in [5, 10, 20, 35] {
        for contamination in [0.01, 0.05, 0.1] {
            lof.push(DetectorParams::Lof { k, contamination });
        }
    }
    let mut ocsvm = Vec::new();
    for nu in [0.01, 0.05, 0.1, 0.2] {
        for gamma in [GammaSpec::Scale, GammaSpec::Fixed(0.1), GammaSpec::Fixed(1.0)] {
            ocsvm.push(DetectorParams::OcSvm {
                nu,
                gamma,
                tol: 1e-4,
                max_iter: 1000,
            });
        }
    }
    BTreeMap::from([
        (DetectorKind::IForest, iforest),
        (DetectorKind::Lof, lof),
        (DetectorKind::OcSvm, ocsvm),
    ])
}

/// One candidate's tuning outcome.
#[derive(Debug, Clone)]
pub struct CandidateScore {
    pub ba: BalancedAccuracy,
    pub false_positives: usize,
    pub fit_seconds: f64,
}

/// The winning candidate for one (regime, detector) cell.
#[derive(Debug, Clone)]
pub struct BestSelection {
    pub regime: Regime,
    pub detector: DetectorKind,
    pub params: DetectorParams,
    pub score: CandidateScore,
    pub candidates_tried: usize,
    /// describe() + error for every candidate that failed to fit.
    pub failures: Vec<String>,
}

/// Transductive tuning: every candidate fits and predicts the same block;
/// the highest balanced accuracy wins, ties falling to list order (or to
/// the faster fit first, when enabled).
pub fn grid_search(data: &[RegimeData], grid: &GridSpec) -> Result<Vec<BestSelection>, EvalError> {
    grid.validate()?;
    let mut out = Vec::new();
    for &regime in &grid.regimes {
        let rd = data
            .iter()
            .find(|d| d.regime == regime)
            .ok_or_else(|| {
                EvalError::InvalidInput(format!("no prepared data for the {} regime", regime.name()))
            })?;
        for (&detector, list) in &grid.candidates {
            let outcomes: Vec<Result<CandidateScore, String>> = list
                .par_iter()
                .map(|params| {
                    let start = Instant::now();
                    let model = fit(rd.x.view(), params).map_err(|e| e.to_string())?;
                    let fit_seconds = start.elapsed().as_secs_f64();
                    let flags = model.predict(rd.x.view()).map_err(|e| e.to_string())?;
                    let ba = balanced_accuracy(&flags, &rd.labels).map_err(|e| e.to_string())?;
                    Ok(CandidateScore {
                        ba,
                        false_positives: ba.confusion.false_pos,
                        fit_seconds,
                    })
                })
                .collect();
            let mut failures = Vec::new();
            let mut best: Option<(usize, CandidateScore)> = None;
            for (i, outcome) in outcomes.into_iter().enumerate() {
                match outcome {
                    Err(e) => failures.push(format!("{}: {e}", list[i].describe())),
                    Ok(score) => {
                        let better = match &best {
                            None => true,
                            Some((_, b)) => {
                                score.ba.value > b.ba.value
                                    || (grid.time_tie_break
                                        && score.ba.value == b.ba.value
                                        && score.fit_seconds < b.fit_seconds)
                            }
                        };
                        if better {
                            best = Some((i, score));
                        }
                    }
                }
            }
            let Some((idx, score)) = best else {
                return Err(EvalError::AllCandidatesFailed {
                    regime,
                    detector,
                    failures,
                });
            };
            out.push(BestSelection {
                regime,
                detector,
                params: list[idx].clone(),
                score,
                candidates_tried: list.len(),
                failures,
            });
        }
    }
    Ok(out)
}

/// A regime's detectors and their ensemble, fitted on one training block.
#[derive(Debug, Clone)]
pub struct TrainedRegime {
    pub regime: Regime,
    pub ensemble: EnsembleModel,
    pub member_seconds: Vec<(DetectorKind, f64)>,
    pub shape: (usize, usize, usize),
}

/// Fits each member with fixed parameters, then wraps them in an ensemble.
pub fn train_regime(
    data: &RegimeData,
    members: &[DetectorParams],
    params: &EnsembleParams,
) -> Result<TrainedRegime, EvalError> {
    let mut fitted = Vec::new();
    let mut member_seconds = Vec::new();
    for p in members {
        let start = Instant::now();
        let model = fit(data.x.view(), p)?;
        member_seconds.push((p.kind(), start.elapsed().as_secs_f64()));
        fitted.push(model);
    }
    let ensemble = ensemble_from_members(fitted, params, data.x.view())?;
    Ok(TrainedRegime {
        regime: data.regime,
        ensemble,
        member_seconds,
        shape: data.shape,
    })
}
