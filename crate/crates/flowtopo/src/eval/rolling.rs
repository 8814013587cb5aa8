//! Prefix-nested evaluation over the post-training remainder: one
//! prediction pass, counted at growing cutoffs.

use serde::{Deserialize, Serialize};

use super::{Confusion, EvalError};
use crate::util::min_max_scale;

/// Counts over the first ⌈f·N⌉ remainder samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingRow {
    pub fraction: f64,
    /// Samples covered by this cutoff.
    pub count: usize,
    pub confusion: Confusion,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Slices one aligned prediction/truth pass at each fraction. Because every
/// cutoff is a prefix of the same pass, true-positive counts are
/// non-decreasing in the fraction.
pub fn rolling_rows(
    pred: &[bool],
    truth: &[bool],
    fractions: &[f64],
) -> Result<Vec<RollingRow>, EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    for &f in fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(EvalError::InvalidInput(format!(
                "test fraction {f} outside (0, 1]"
            )));
        }
    }
    let n = pred.len();
    Ok(fractions
        .iter()
        .map(|&fraction| {
            let count = (fraction * n as f64).ceil() as usize;
            if count == 0 {
                return RollingRow {
                    fraction,
                    count,
                    confusion: Confusion::default(),
                    tpr: None,
                    tnr: None,
                    warning: Some(format!("fraction {fraction} covers no samples")),
                };
            }
            let confusion = Confusion::from_pairs(&pred[..count], &truth[..count])
                .expect("equal-length slices");
            RollingRow {
                fraction,
                count,
                confusion,
                tpr: confusion.tpr(),
                tnr: confusion.tnr(),
                warning: None,
            }
        })
        .collect())
}

/// False-positive counts min-max scaled across the series, for plotting.
pub fn scaled_false_positives(rows: &[RollingRow]) -> Vec<f64> {
    let raw: Vec<f64> = rows.iter().map(|r| r.confusion.false_pos as f64).collect();
    min_max_scale(&raw)
}
