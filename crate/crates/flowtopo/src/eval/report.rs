//! Report types: a canonical machine-readable form (free of wall times, so
//! reruns are byte-identical) and aligned human-readable tables. Timings go
//! to a separate sidecar.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{balanced_accuracy, CategoryCount, EvalError, StageRanges};
use crate::detect::DetectorModel;
use crate::ensemble::EnsembleModel;
use crate::expand::Regime;

/// One (regime, detector) result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub regime: String,
    pub detector: String,
    pub params: String,
    pub balanced_accuracy: f64,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub single_class: bool,
    pub false_positives: usize,
    /// (rows, samples, positives) of the evaluated block.
    pub shape: [usize; 3],
}

/// Scores fitted models against one block and emits their rows; the
/// ensemble, when given, is appended under the detector name "ensemble".
pub fn cells_for(
    regime: Regime,
    members: &[DetectorModel],
    ensemble: Option<&EnsembleModel>,
    x: ArrayView2<'_, f64>,
    labels: &[bool],
    shape: (usize, usize, usize),
) -> Result<Vec<ReportCell>, EvalError> {
    let mut cells = Vec::new();
    let shape = [shape.0, shape.1, shape.2];
    for model in members {
        let flags = model.predict(x)?;
        let ba = balanced_accuracy(&flags, labels)?;
        cells.push(ReportCell {
            regime: regime.name().to_string(),
            detector: model.kind().name().to_string(),
            params: model.params.describe(),
            balanced_accuracy: ba.value,
            tpr: ba.tpr,
            tnr: ba.tnr,
            single_class: ba.single_class,
            false_positives: ba.confusion.false_pos,
            shape,
        });
    }
    if let Some(ens) = ensemble {
        let flags = ens.predict(x)?;
        let ba = balanced_accuracy(&flags, labels)?;
        cells.push(ReportCell {
            regime: regime.name().to_string(),
            detector: "ensemble".to_string(),
            params: ens.params.describe(),
            balanced_accuracy: ba.value,
            tpr: ba.tpr,
            tnr: ba.tnr,
            single_class: ba.single_class,
            false_positives: ba.confusion.false_pos,
            shape,
        });
    }
    Ok(cells)
}

/// A full evaluation report; serializes deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub stage_ranges: StageRanges,
    pub cells: Vec<ReportCell>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub breakdown: Vec<CategoryCount>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn fmt_rate(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.4}"),
        None => "-".to_string(),
    }
}

fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let emit = |out: &mut String, cells: &[String]| {
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            out.push_str(cell);
            out.extend(std::iter::repeat(' ').take(w - cell.len()));
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    };
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    emit(&mut out, &header);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    emit(&mut out, &rule);
    for row in rows {
        emit(&mut out, row);
    }
    out
}

impl EvalReport {
    /// Deterministic JSON (pretty, trailing newline); the machine artifact.
    pub fn to_canonical_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    /// Aligned tables for reading alongside the JSON artifact.
    pub fn render_text(&self) -> String {
        let mut out = format!("# {}\n", self.title);
        if let Some(hash) = &self.config_hash {
            out.push_str(&format!("config_hash: {hash}\n"));
        }
        let sr = &self.stage_ranges;
        out.push_str(&format!(
            "stages: tune [{},{})  train [{},{})  test [{},{})\n",
            sr.tune.start, sr.tune.end, sr.train.start, sr.train.end, sr.test.start, sr.test.end
        ));
        if !sr.fractions.is_empty() {
            let parts: Vec<String> = sr
                .fractions
                .iter()
                .map(|(name, r)| format!("{name}→[{},{})", r.start, r.end))
                .collect();
            out.push_str(&format!("test fractions: {}\n", parts.join("  ")));
        }
        out.push('\n');
        let rows: Vec<Vec<String>> = self
            .cells
            .iter()
            .map(|c| {
                vec![
                    c.regime.clone(),
                    c.detector.clone(),
                    format!("{:.4}{}", c.balanced_accuracy, if c.single_class { "*" } else { "" }),
                    fmt_rate(c.tpr),
                    fmt_rate(c.tnr),
                    c.false_positives.to_string(),
                    format!("({}, {}, {})", c.shape[0], c.shape[1], c.shape[2]),
                    c.params.clone(),
                ]
            })
            .collect();
        out.push_str(&render_table(
            &["regime", "detector", "BA", "TPR", "TNR", "FP", "shape", "params"],
            &rows,
        ));
        if self.cells.iter().any(|c| c.single_class) {
            out.push_str("* single-class block: BA is the defined rate only\n");
        }
        if !self.breakdown.is_empty() {
            out.push('\n');
            let rows: Vec<Vec<String>> = self
                .breakdown
                .iter()
                .map(|b| {
                    vec![
                        b.category.clone(),
                        b.detected.to_string(),
                        b.total.to_string(),
                    ]
                })
                .collect();
            out.push_str(&render_table(&["category", "detected", "total"], &rows));
        }
        if !self.notes.is_empty() {
            out.push('\n');
            for note in &self.notes {
                out.push_str(&format!("note: {note}\n"));
            }
        }
        out
    }
}

/// Wall-clock sidecar row; kept out of the canonical report so reruns
/// compare byte-identical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingRow {
    pub regime: String,
    pub detector: String,
    pub params: String,
    pub fit_seconds: f64,
}

pub fn render_timings(rows: &[TimingRow]) -> String {
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.regime.clone(),
                r.detector.clone(),
                format!("{:.3}", r.fit_seconds),
                r.params.clone(),
            ]
        })
        .collect();
    render_table(&["regime", "detector", "fit_seconds", "params"], &table)
}
