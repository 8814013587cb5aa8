//! Balanced accuracy and per-attack-category detection counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Prediction/truth contingency counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl Confusion {
    pub fn from_pairs(pred: &[bool], truth: &[bool]) -> Result<Confusion, EvalError> {
        if pred.len() != truth.len() {
            return Err(EvalError::LengthMismatch {
                left: pred.len(),
                right: truth.len(),
            });
        }
        let mut c = Confusion::default();
        for (&p, &t) in pred.iter().zip(truth) {
            match (p, t) {
                (true, true) => c.true_pos += 1,
                (true, false) => c.false_pos += 1,
                (false, false) => c.true_neg += 1,
                (false, true) => c.false_neg += 1,
            }
        }
        Ok(c)
    }

    pub fn positives(&self) -> usize {
        self.true_pos + self.false_neg
    }

    pub fn negatives(&self) -> usize {
        self.true_neg + self.false_pos
    }

    /// TP / (TP + FN); undefined without positives.
    pub fn tpr(&self) -> Option<f64> {
        let p = self.positives();
        (p > 0).then(|| self.true_pos as f64 / p as f64)
    }

    /// TN / (TN + FP); undefined without negatives.
    pub fn tnr(&self) -> Option<f64> {
        let n = self.negatives();
        (n > 0).then(|| self.true_neg as f64 / n as f64)
    }
}

/// (TPR + TNR) / 2; on single-class truth the defined half stands in for
/// the whole, flagged via `single_class`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalancedAccuracy {
    pub value: f64,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub single_class: bool,
    pub confusion: Confusion,
}

pub fn balanced_accuracy(pred: &[bool], truth: &[bool]) -> Result<BalancedAccuracy, EvalError> {
    let confusion = Confusion::from_pairs(pred, truth)?;
    if truth.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let (tpr, tnr) = (confusion.tpr(), confusion.tnr());
    let (value, single_class) = match (tpr, tnr) {
        (Some(a), Some(b)) => ((a + b) / 2.0, false),
        (Some(a), None) => (a, true),
        (None, Some(b)) => (b, true),
        (None, None) => unreachable!("non-empty truth has a class"),
    };
    Ok(BalancedAccuracy {
        value,
        tpr,
        tnr,
        single_class,
        confusion,
    })
}

/// Detected/total counts for one attack category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub category: String,
    pub detected: usize,
    pub total: usize,
}

/// Per-category detection counts over the truth-positive samples. Every
/// positive must carry a category; negatives' categories are ignored.
pub fn attack_breakdown(
    pred: &[bool],
    truth: &[bool],
    categories: &[Option<String>],
) -> Result<Vec<CategoryCount>, EvalError> {
    if pred.len() != truth.len() || truth.len() != categories.len() {
        return Err(EvalError::LengthMismatch {
            left: pred.len(),
            right: truth.len().max(categories.len()),
        });
    }
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (index, ((&p, &t), cat)) in pred.iter().zip(truth).zip(categories).enumerate() {
        if !t {
            continue;
        }
        let cat = cat
            .as_deref()
            .ok_or(EvalError::MissingCategory { index })?;
        let entry = counts.entry(cat).or_insert((0, 0));
        entry.1 += 1;
        if p {
            entry.0 += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|(category, (detected, total))| CategoryCount {
            category: category.to_string(),
            detected,
            total,
        })
        .collect())
}
