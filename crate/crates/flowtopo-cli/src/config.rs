//! Declarative pipeline configuration: one TOML file drives every command.
//!
//! Paths inside the config resolve relative to the config file's directory,
//! so a config plus its data travels as one reproducible artifact. The
//! sha256 hash of the configuration (after `--set` overrides) is stamped
//! into every output file as provenance.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use flowtopo::detect::DetectorKind;
use flowtopo::ensemble::EnsembleParams;
use flowtopo::eval::default_candidates;
use flowtopo::ingest::{CustomSchema, PresetKind, SchemaSpec};
use flowtopo::topo::FeatureConfig;
use flowtopo::{CatalogId, DetectorParams, NodeLabelRule, Regime, SplitSpec, TieBreak, VoteRule};

use crate::CliError;

/// Raw config file contents, section by section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: DatasetSection,
    #[serde(default)]
    pub graph: GraphSection,
    #[serde(default)]
    pub features: FeatureSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub detectors: DetectorSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// Flow CSV path, relative to the config file.
    pub path: String,
    /// Schema preset name ("cic-ids2017", "unsw-nb15") or "custom".
    pub schema: String,
    /// Single-byte field delimiter.
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    /// Column layout, required when schema = "custom".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomSchema>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    /// Overrides the schema's summable weight column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_column: Option<String>,
    /// How nodes inherit flow labels: "source_only" or "source_or_dest".
    #[serde(default)]
    pub label_rule: NodeLabelRule,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSection {
    /// Node feature catalog: "egonet-48", "egonet-32", "egonet-16",
    /// "walk-21", "walk-14", "walk-7", or "empty".
    #[serde(default = "default_catalog")]
    pub catalog: CatalogId,
    /// Maximum random-walk length ℓ.
    #[serde(default = "default_walk_length")]
    pub walk_length: usize,
    /// Walks sampled per node.
    #[serde(default = "default_walks_per_node")]
    pub walks_per_node: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    /// Tuning prefix fraction.
    #[serde(default = "default_tune")]
    pub tune: f64,
    /// Training block fraction, taken directly after the tuning prefix.
    #[serde(default = "default_train")]
    pub train: f64,
    /// Nested prefix fractions of the post-training remainder.
    #[serde(default = "default_test_fractions")]
    pub test_fractions: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Top-level seed; every stage derives its randomness from it.
    #[serde(default)]
    pub seed: u64,
    /// Regimes to evaluate.
    #[serde(default = "default_regimes")]
    pub regimes: Vec<Regime>,
    /// Output directory, relative to the config file.
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    /// Break exact balanced-accuracy ties by shorter fit time instead of
    /// candidate order (makes selection depend on wall-clock noise).
    #[serde(default)]
    pub time_tie_break: bool,
    /// Worker thread count; defaults to all cores. Outputs do not depend
    /// on this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    /// Candidate parameter sets, tagged by `detector`. Omitted → built-in
    /// default grids. IForest candidates with seed 0 inherit the run seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<DetectorParams>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    /// "majority_vote" or "average_score".
    #[serde(default = "default_rule")]
    pub rule: VoteRule,
    /// Exact-split outcome: "normal" or "anomalous".
    #[serde(default)]
    pub tie_break: TieBreak,
    /// Assumed anomaly fraction for the average-score threshold.
    #[serde(default = "default_ensemble_contamination")]
    pub contamination: f64,
}

fn default_delimiter() -> String {
    ",".into()
}

fn default_catalog() -> CatalogId {
    CatalogId::Egonet48
}

fn default_walk_length() -> usize {
    10
}

fn default_walks_per_node() -> usize {
    8
}

fn default_tune() -> f64 {
    0.01
}

fn default_train() -> f64 {
    0.10
}

fn default_test_fractions() -> Vec<f64> {
    vec![0.1, 0.3, 0.5, 0.7, 1.0]
}

fn default_regimes() -> Vec<Regime> {
    vec![Regime::Standard, Regime::Graph, Regime::Mixed]
}

fn default_output_dir() -> String {
    "out".into()
}

fn default_rule() -> VoteRule {
    VoteRule::MajorityVote
}

fn default_ensemble_contamination() -> f64 {
    0.05
}

impl Default for GraphSection {
    fn default() -> Self {
        GraphSection {
            weight_column: None,
            label_rule: NodeLabelRule::default(),
        }
    }
}

impl Default for FeatureSection {
    fn default() -> Self {
        FeatureSection {
            catalog: default_catalog(),
            walk_length: default_walk_length(),
            walks_per_node: default_walks_per_node(),
        }
    }
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            tune: default_tune(),
            train: default_train(),
            test_fractions: default_test_fractions(),
        }
    }
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            regimes: default_regimes(),
            output_dir: default_output_dir(),
            time_tie_break: false,
            workers: None,
        }
    }
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection {
            rule: default_rule(),
            tie_break: TieBreak::default(),
            contamination: default_ensemble_contamination(),
        }
    }
}

/// Config after validation: typed values, absolute paths, provenance hash.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub dataset_path: PathBuf,
    pub schema_spec: SchemaSpec,
    pub delimiter: u8,
    pub weight_column: Option<String>,
    pub label_rule: NodeLabelRule,
    pub feature: FeatureConfig,
    pub split: SplitSpec,
    pub regimes: Vec<Regime>,
    pub output_dir: PathBuf,
    pub time_tie_break: bool,
    pub workers: Option<usize>,
    pub candidates: BTreeMap<DetectorKind, Vec<DetectorParams>>,
    pub ensemble: EnsembleParams,
    /// sha256 over the canonical JSON form of the raw config.
    pub hash: String,
}

/// Reads a config file, applies `--set key=value` overrides, validates.
pub fn load_config(path: &Path, sets: &[String]) -> Result<ResolvedConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    let mut value: toml::Value = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("config parse error: {e}")))?;
    for set in sets {
        apply_override(&mut value, set)?;
    }
    let raw: PipelineConfig = value
        .try_into()
        .map_err(|e| CliError::Config(format!("config error: {e}")))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    resolve(&raw, base)
}

/// Sets one dotted key to a TOML literal, e.g. `run.seed=7` or
/// `features.catalog="walk-21"`. Unquoted values that do not parse as a
/// TOML literal are taken as strings.
fn apply_override(value: &mut toml::Value, set: &str) -> Result<(), CliError> {
    let (key, raw) = set
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set {set:?} is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Config(format!("--set {set:?} has an empty key")));
    }
    let leaf: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut table) => table.remove("v").expect("parsed assignment has the key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut node = value;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let table = node.as_table_mut().ok_or_else(|| {
            CliError::Config(format!("--set {key}: {part} is not a config section"))
        })?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| CliError::Config(format!("--set {key}: parent is not a config section")))?;
    table.insert(parts[parts.len() - 1].to_string(), leaf);
    Ok(())
}

/// Validates every section, collecting all failures into one message.
fn resolve(raw: &PipelineConfig, base: &Path) -> Result<ResolvedConfig, CliError> {
    let mut problems: Vec<String> = Vec::new();

    let schema_spec = match raw.dataset.schema.trim().to_ascii_lowercase().as_str() {
        "custom" => match &raw.dataset.custom {
            Some(custom) => Some(SchemaSpec::Custom(custom.clone())),
            None => {
                problems.push("dataset.schema = \"custom\" requires [dataset.custom]".into());
                None
            }
        },
        name => match PresetKind::parse(name) {
            Ok(preset) => {
                if raw.dataset.custom.is_some() {
                    problems.push(format!(
                        "[dataset.custom] is set but dataset.schema is the preset {name:?}"
                    ));
                }
                Some(SchemaSpec::Preset(preset))
            }
            Err(_) => {
                problems.push(format!(
                    "unknown dataset.schema {:?} (expected cic-ids2017, unsw-nb15, or custom)",
                    raw.dataset.schema
                ));
                None
            }
        },
    };

    let delimiter = match raw.dataset.delimiter.as_bytes() {
        [b] => *b,
        _ => {
            problems.push(format!(
                "dataset.delimiter {:?} must be a single byte",
                raw.dataset.delimiter
            ));
            b','
        }
    };

    if raw.dataset.path.trim().is_empty() {
        problems.push("dataset.path is empty".into());
    }

    if raw.features.walk_length == 0 {
        problems.push("features.walk_length must be at least 1".into());
    }
    if raw.features.walks_per_node == 0 {
        problems.push("features.walks_per_node must be at least 1".into());
    }

    let split = SplitSpec {
        tune: raw.split.tune,
        train: raw.split.train,
        test_fractions: raw.split.test_fractions.clone(),
    };
    if let Err(e) = split.validate() {
        problems.push(format!("[split]: {e}"));
    }

    if raw.run.regimes.is_empty() {
        problems.push("run.regimes is empty".into());
    }
    let mut seen = Vec::new();
    for r in &raw.run.regimes {
        if seen.contains(r) {
            problems.push(format!("run.regimes lists {} twice", r.name()));
        }
        seen.push(*r);
    }
    if raw.run.workers == Some(0) {
        problems.push("run.workers must be at least 1".into());
    }

    let candidates = match &raw.detectors.candidates {
        None => default_candidates(raw.run.seed),
        Some(list) => {
            let mut grouped: BTreeMap<DetectorKind, Vec<DetectorParams>> = BTreeMap::new();
            if list.is_empty() {
                problems.push("detectors.candidates is empty; omit it for defaults".into());
            }
            for params in list {
                let params = match params {
                    DetectorParams::IForest {
                        n_trees,
                        subsample,
                        contamination,
                        seed: 0,
                    } => DetectorParams::IForest {
                        n_trees: *n_trees,
                        subsample: *subsample,
                        contamination: *contamination,
                        seed: raw.run.seed,
                    },
                    other => other.clone(),
                };
                if let Err(e) = params.validate() {
                    problems.push(format!("candidate {}: {e}", params.describe()));
                }
                grouped.entry(params.kind()).or_default().push(params);
            }
            grouped
        }
    };

    let contamination = raw.ensemble.contamination;
    if !(contamination > 0.0 && contamination <= 0.5) {
        problems.push(format!(
            "ensemble.contamination must be in (0, 0.5], got {contamination}"
        ));
    }

    if !problems.is_empty() {
        return Err(CliError::Config(format!(
            "invalid config ({} problem{}):\n  - {}",
            problems.len(),
            if problems.len() == 1 { "" } else { "s" },
            problems.join("\n  - ")
        )));
    }

    Ok(ResolvedConfig {
        dataset_path: base.join(&raw.dataset.path),
        schema_spec: schema_spec.expect("validated above"),
        delimiter,
        weight_column: raw.graph.weight_column.clone(),
        label_rule: raw.graph.label_rule,
        feature: FeatureConfig {
            catalog: raw.features.catalog,
            walk_length: raw.features.walk_length,
            walks_per_node: raw.features.walks_per_node,
            seed: raw.run.seed,
        },
        split,
        regimes: raw.run.regimes.clone(),
        output_dir: base.join(&raw.run.output_dir),
        time_tie_break: raw.run.time_tie_break,
        workers: raw.run.workers,
        candidates,
        ensemble: EnsembleParams {
            rule: raw.ensemble.rule,
            tie_break: raw.ensemble.tie_break,
            contamination,
        },
        hash: config_hash(raw),
    })
}

/// sha256 of the canonical JSON serialization, hex-encoded.
fn config_hash(raw: &PipelineConfig) -> String {
    let canonical = serde_json::to_string(raw).expect("config serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}
