//! Time-ordered stage slicing with a leakage audit, and per-block
//! assembly of regime feature matrices.

use std::ops::Range;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::expand::{as_regime, Regime, Standardizer};
use crate::graph::{build_graph, NodeLabelRule, TrafficGraph};
use crate::ingest::FlowDataset;
use crate::topo::{node_features, FeatureConfig};

/// Prefix fractions of the chronology: tuning head, training block,
/// rolling-test fractions of the remainder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub tune: f64,
    pub train: f64,
    pub test_fractions: Vec<f64>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            tune: 0.01,
            train: 0.10,
            test_fractions: vec![0.1, 0.3, 0.5, 0.7, 1.0],
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        let frac_ok = |f: f64| f > 0.0 && f < 1.0;
        if !frac_ok(self.tune) || !frac_ok(self.train) || self.tune + self.train >= 1.0 {
            return Err(EvalError::InvalidInput(format!(
                "tune ({}) and train ({}) must be positive and sum below 1",
                self.tune, self.train
            )));
        }
        let mut prev = 0.0;
        for &f in &self.test_fractions {
            if !(f > prev && f <= 1.0) {
                return Err(EvalError::InvalidInput(format!(
                    "test fractions must be strictly increasing within (0, 1], got {:?}",
                    self.test_fractions
                )));
            }
            prev = f;
        }
        Ok(())
    }
}

/// Recorded flow-index ranges per stage; the audit trail for no-leakage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRanges {
    pub tune: Range<usize>,
    pub train: Range<usize>,
    /// Whole post-training region; each test fraction is a prefix of it.
    pub test: Range<usize>,
    pub fractions: Vec<(String, Range<usize>)>,
}

fn ceil_frac(f: f64, n: usize) -> usize {
    (f * n as f64).ceil() as usize
}

pub fn stage_ranges(n: usize, spec: &SplitSpec) -> Result<StageRanges, EvalError> {
    spec.validate()?;
    if n == 0 {
        return Err(EvalError::EmptyInput);
    }
    let tune_end = ceil_frac(spec.tune, n).min(n);
    let train_end = (tune_end + ceil_frac(spec.train, n)).min(n);
    let remainder = n - train_end;
    let fractions = spec
        .test_fractions
        .iter()
        .map(|&f| (format!("{f}"), train_end..train_end + ceil_frac(f, remainder)))
        .collect();
    Ok(StageRanges {
        tune: 0..tune_end,
        train: tune_end..train_end,
        test: train_end..n,
        fractions,
    })
}

impl StageRanges {
    /// Verifies the stages are contiguous, time-ordered, and pairwise
    /// disjoint, and that every test fraction stays inside the test region.
    pub fn audit(&self) -> Result<(), EvalError> {
        let fail = |msg: String| Err(EvalError::LeakageAudit(msg));
        if self.tune.start != 0 {
            return fail(format!("tuning must start at index 0, not {}", self.tune.start));
        }
        if self.tune.end != self.train.start {
            return fail(format!(
                "training block [{},{}) does not start where tuning ends ({})",
                self.train.start, self.train.end, self.tune.end
            ));
        }
        if self.train.end != self.test.start {
            return fail(format!(
                "test region [{},{}) does not start where training ends ({})",
                self.test.start, self.test.end, self.train.end
            ));
        }
        if self.tune.end < self.tune.start
            || self.train.end < self.train.start
            || self.test.end < self.test.start
        {
            return fail("a stage range runs backwards".into());
        }
        let mut prev_end = self.test.start;
        for (name, r) in &self.fractions {
            if r.start != self.test.start {
                return fail(format!(
                    "fraction {name} starts at {} instead of the test region start {}",
                    r.start, self.test.start
                ));
            }
            if r.end > self.test.end {
                return fail(format!(
                    "fraction {name} ends at {} beyond the test region end {}",
                    r.end, self.test.end
                ));
            }
            if r.end < prev_end {
                return fail(format!("fraction {name} is shorter than its predecessor"));
            }
            prev_end = r.end;
        }
        Ok(())
    }
}

/// One stage block rendered into a regime's feature space.
#[derive(Debug, Clone)]
pub struct RegimeData {
    pub regime: Regime,
    /// Standardized d×N matrix, one sample per column.
    pub x: Array2<f64>,
    pub labels: Vec<bool>,
    /// (rows, samples, positives).
    pub shape: (usize, usize, usize),
    /// Attack category per sample (flows, or nodes in the graph regime).
    pub categories: Vec<Option<String>>,
    pub graph: Option<TrafficGraph>,
    /// Flow indices, or node ids in the graph regime.
    pub ids: Vec<usize>,
}

/// Attack category per node: the category of the first flow that marks the
/// node anomalous under `rule`.
pub fn node_categories(
    ds: &FlowDataset,
    g: &TrafficGraph,
    rule: NodeLabelRule,
) -> Vec<Option<String>> {
    let mut cats: Vec<Option<String>> = vec![None; g.n()];
    for r in &ds.records {
        if r.label != Some(true) {
            continue;
        }
        let mut mark = |endpoint: &str| {
            if let Some(node) = g.node_of(endpoint) {
                let slot = &mut cats[node.index()];
                if slot.is_none() {
                    *slot = r.attack_category.clone();
                }
            }
        };
        mark(&r.src);
        if rule == NodeLabelRule::SourceOrDest {
            mark(&r.dst);
        }
    }
    cats
}

/// Builds the stage graph (when the regime needs one), extracts node
/// features, assembles the regime matrix, and standardizes it — fitting the
/// scaler on this block when none is supplied.
pub fn prepare_block(
    block: &FlowDataset,
    regime: Regime,
    feature: &FeatureConfig,
    rule: NodeLabelRule,
    standardizer: Option<&Standardizer>,
) -> Result<(RegimeData, Standardizer), EvalError> {
    let (graph, z) = if regime == Regime::Standard {
        (None, None)
    } else {
        let (g, _) = build_graph(block, &block.schema.summable_weight_column)?;
        let z = node_features(&g, feature)?;
        (Some(g), Some(z))
    };
    let expanded = as_regime(block, z.as_ref(), graph.as_ref(), regime, rule)?;
    let labels = expanded
        .labels
        .clone()
        .ok_or(EvalError::UnlabeledData(regime))?;
    let mut x = expanded.values;
    let standardizer = match standardizer {
        Some(s) => {
            s.apply(&mut x);
            s.clone()
        }
        None => {
            let s = Standardizer::fit(x.view());
            s.apply(&mut x);
            s
        }
    };
    let categories = match regime {
        Regime::Graph => node_categories(block, graph.as_ref().expect("graph regime"), rule),
        _ => block.records.iter().map(|r| r.attack_category.clone()).collect(),
    };
    let positives = labels.iter().filter(|&&l| l).count();
    let shape = (x.nrows(), x.ncols(), positives);
    Ok((
        RegimeData {
            regime,
            x,
            labels,
            shape,
            categories,
            graph,
            ids: expanded.column_ids,
        },
        standardizer,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{lateral_movement_dataset, LateralMovementSpec};
    use crate::topo::CatalogId;

    #[test]
    fn stage_arithmetic_on_a_round_count() {
        let r = stage_ranges(1000, &SplitSpec::default()).unwrap();
        assert_eq!(r.tune, 0..10);
        assert_eq!(r.train, 10..110);
        assert_eq!(r.test, 110..1000);
        // remainder 890: ceil(0.1·890)=89, …, ceil(1.0·890)=890
        assert_eq!(r.fractions[0].1, 110..199);
        assert_eq!(r.fractions[4].1, 110..1000);
        r.audit().unwrap();
    }

    #[test]
    fn audit_rejects_overlapping_stages() {
        let mut r = stage_ranges(1000, &SplitSpec::default()).unwrap();
        r.train = 5..110;
        assert!(matches!(r.audit(), Err(EvalError::LeakageAudit(_))));

        let mut r2 = stage_ranges(1000, &SplitSpec::default()).unwrap();
        r2.fractions[0].1 = 100..199;
        assert!(r2.audit().is_err());

        let mut r3 = stage_ranges(1000, &SplitSpec::default()).unwrap();
        r3.fractions[1].1 = 110..2000;
        assert!(r3.audit().is_err());
    }

    #[test]
    fn split_spec_validation() {
        assert!(SplitSpec {
            tune: 0.5,
            train: 0.6,
            test_fractions: vec![1.0],
        }
        .validate()
        .is_err());
        assert!(SplitSpec {
            tune: 0.01,
            train: 0.1,
            test_fractions: vec![0.5, 0.5],
        }
        .validate()
        .is_err());
        assert!(SplitSpec::default().validate().is_ok());
    }

    #[test]
    fn prepared_blocks_have_regime_shapes() {
        let ds = lateral_movement_dataset(&LateralMovementSpec {
            n_flows: 400,
            ..Default::default()
        });
        let feature = FeatureConfig::default();
        let (std_data, _) =
            prepare_block(&ds, Regime::Standard, &feature, NodeLabelRule::SourceOnly, None)
                .unwrap();
        assert_eq!(std_data.shape.0, 6);
        assert_eq!(std_data.shape.1, 400);

        let (graph_data, _) =
            prepare_block(&ds, Regime::Graph, &feature, NodeLabelRule::SourceOnly, None).unwrap();
        assert_eq!(graph_data.shape.0, CatalogId::Egonet48.p());
        assert!(graph_data.shape.1 <= 48 + 8);

        let (mixed_data, _) =
            prepare_block(&ds, Regime::Mixed, &feature, NodeLabelRule::SourceOnly, None).unwrap();
        assert_eq!(mixed_data.shape.0, 6 + 2 * CatalogId::Egonet48.p());
        assert_eq!(mixed_data.shape.1, 400);
        assert_eq!(mixed_data.shape.2, std_data.shape.2);
    }

    #[test]
    fn standardizer_reuse_does_not_refit() {
        let ds = lateral_movement_dataset(&LateralMovementSpec {
            n_flows: 300,
            ..Default::default()
        });
        let feature = FeatureConfig::default();
        let head = ds.slice_range(0..200);
        let tail = ds.slice_range(200..300);
        let (_, fitted) =
            prepare_block(&head, Regime::Standard, &feature, NodeLabelRule::SourceOnly, None)
                .unwrap();
        let (_, reused) = prepare_block(
            &tail,
            Regime::Standard,
            &feature,
            NodeLabelRule::SourceOnly,
            Some(&fitted),
        )
        .unwrap();
        assert_eq!(fitted, reused);
    }

    #[test]
    fn node_categories_follow_the_label_rule() {
        let ds = lateral_movement_dataset(&LateralMovementSpec::default());
        let (g, _) = build_graph(&ds, "packets").unwrap();
        let cats = node_categories(&ds, &g, NodeLabelRule::SourceOnly);
        let tagged = cats.iter().flatten().count();
        assert_eq!(tagged, 5, "one category per chain hop source");
        assert!(cats
            .iter()
            .flatten()
            .all(|c| c == "lateral_movement"));
        let both = node_categories(&ds, &g, NodeLabelRule::SourceOrDest);
        assert_eq!(both.iter().flatten().count(), 6);
    }
}
