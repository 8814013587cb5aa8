//! Dataset schema descriptors and their resolution against CSV headers.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema column {column:?} not found in header")]
    MissingColumn { column: String },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("dataset {0:?} contains no data rows")]
    EmptyDataset(String),
    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),
    #[error("unknown schema preset {0:?}")]
    UnknownPreset(String),
}

/// Fully resolved description of one flow table layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub name: String,
    pub source_ip_column: String,
    pub dest_ip_column: String,
    pub label_column: Option<String>,
    pub attack_category_column: Option<String>,
    pub numeric_feature_columns: Vec<String>,
    pub summable_weight_column: String,
    pub positive_label_values: BTreeSet<String>,
}

impl DatasetSchema {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.source_ip_column == self.dest_ip_column {
            return Err(IngestError::InvalidSchema(
                "source and destination columns must differ".into(),
            ));
        }
        if self.numeric_feature_columns.is_empty() {
            return Err(IngestError::InvalidSchema(
                "schema declares no numeric feature columns".into(),
            ));
        }
        let unique: BTreeSet<&String> = self.numeric_feature_columns.iter().collect();
        if unique.len() != self.numeric_feature_columns.len() {
            return Err(IngestError::InvalidSchema(
                "numeric feature columns contain duplicates".into(),
            ));
        }
        if !self
            .numeric_feature_columns
            .contains(&self.summable_weight_column)
        {
            return Err(IngestError::InvalidSchema(format!(
                "weight column {:?} is not a numeric feature column",
                self.summable_weight_column
            )));
        }
        Ok(())
    }

    /// Position of the weight column inside the feature vector.
    pub fn weight_index(&self) -> usize {
        self.numeric_feature_columns
            .iter()
            .position(|c| c == &self.summable_weight_column)
            .expect("validated schema contains its weight column")
    }

    pub fn feature_index(&self, column: &str) -> Option<usize> {
        self.numeric_feature_columns
            .iter()
            .position(|c| c == column)
    }
}

/// How a schema spec decides which header columns hold numeric features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureColumns {
    /// Use exactly these columns, in this order.
    Explicit(Vec<String>),
    /// Use every header column except these, in header order.
    InferExcluding(Vec<String>),
}

/// User-declared schema that still needs a header to become a [`DatasetSchema`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CustomSchema {
    pub name: String,
    pub source_ip_column: String,
    pub dest_ip_column: String,
    #[serde(default)]
    pub label_column: Option<String>,
    #[serde(default)]
    pub attack_category_column: Option<String>,
    pub feature_columns: FeatureColumns,
    pub summable_weight_column: String,
    #[serde(default)]
    pub positive_label_values: Vec<String>,
}

/// Built-in layouts for the two public flow dataset shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetKind {
    CicIds2017,
    UnswNb15,
}

impl PresetKind {
    pub fn parse(name: &str) -> Result<Self, IngestError> {
        match name.trim().to_ascii_lowercase().as_str() {
            "cic-ids2017" | "cic_ids2017" | "cicids2017" => Ok(Self::CicIds2017),
            "unsw-nb15" | "unsw_nb15" | "unswnb15" => Ok(Self::UnswNb15),
            other => Err(IngestError::UnknownPreset(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::CicIds2017 => "cic-ids2017",
            Self::UnswNb15 => "unsw-nb15",
        }
    }
}

/// Schema selection: a named preset or a custom declaration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaSpec {
    Preset(PresetKind),
    Custom(CustomSchema),
}

/// Attack labels observed in public CIC-IDS2017 releases; the label column
/// doubles as the attack category, with "BENIGN" marking normal traffic.
const CIC_ATTACK_LABELS: &[&str] = &[
    "FTP-Patator",
    "SSH-Patator",
    "DoS slowloris",
    "DoS Slowhttptest",
    "DoS Hulk",
    "DoS GoldenEye",
    "Heartbleed",
    "Web Attack - Brute Force",
    "Web Attack - XSS",
    "Web Attack - Sql Injection",
    "Web Attack \u{2013} Brute Force",
    "Web Attack \u{2013} XSS",
    "Web Attack \u{2013} Sql Injection",
    "Infiltration",
    "Bot",
    "PortScan",
    "DDoS",
];

/// Candidate header spellings per role, first match wins.
struct PresetAliases {
    name: &'static str,
    source: &'static [&'static str],
    dest: &'static [&'static str],
    label: &'static [&'static str],
    category: &'static [&'static str],
    weight: &'static [&'static str],
    excluded: &'static [&'static str],
    positive: &'static [&'static str],
    category_is_label: bool,
}

fn preset_aliases(kind: PresetKind) -> PresetAliases {
    match kind {
        PresetKind::CicIds2017 => PresetAliases {
            name: "cic-ids2017",
            source: &["Source IP", "Src IP"],
            dest: &["Destination IP", "Dst IP"],
            label: &["Label"],
            category: &["Label"],
            weight: &["Total Fwd Packets", "Tot Fwd Pkts"],
            excluded: &[
                "Flow ID",
                "Source IP",
                "Src IP",
                "Destination IP",
                "Dst IP",
                "Timestamp",
                "Label",
            ],
            positive: CIC_ATTACK_LABELS,
            category_is_label: true,
        },
        PresetKind::UnswNb15 => PresetAliases {
            name: "unsw-nb15",
            source: &["srcip"],
            dest: &["dstip"],
            label: &["label", "Label"],
            category: &["attack_cat"],
            weight: &["Spkts", "spkts"],
            excluded: &[
                "srcip", "sport", "dstip", "dsport", "proto", "state", "service", "Stime",
                "stime", "Ltime", "ltime", "attack_cat", "label", "Label",
            ],
            positive: &["1"],
            category_is_label: false,
        },
    }
}

fn find_alias(header: &[String], candidates: &[&str]) -> Option<String> {
    candidates
        .iter()
        .find(|c| header.iter().any(|h| h == *c))
        .map(|c| c.to_string())
}

impl SchemaSpec {
    /// Resolves against a trimmed header row, producing a concrete schema.
    pub fn resolve(&self, header: &[String]) -> Result<DatasetSchema, IngestError> {
        let schema = match self {
            SchemaSpec::Preset(kind) => resolve_preset(*kind, header)?,
            SchemaSpec::Custom(custom) => resolve_custom(custom, header)?,
        };
        schema.validate()?;
        Ok(schema)
    }
}

fn require_column(header: &[String], column: &str) -> Result<String, IngestError> {
    if header.iter().any(|h| h == column) {
        Ok(column.to_string())
    } else {
        Err(IngestError::MissingColumn {
            column: column.to_string(),
        })
    }
}

fn resolve_preset(kind: PresetKind, header: &[String]) -> Result<DatasetSchema, IngestError> {
    let aliases = preset_aliases(kind);
    let source =
        find_alias(header, aliases.source).ok_or_else(|| IngestError::MissingColumn {
            column: aliases.source[0].to_string(),
        })?;
    let dest = find_alias(header, aliases.dest).ok_or_else(|| IngestError::MissingColumn {
        column: aliases.dest[0].to_string(),
    })?;
    let label = find_alias(header, aliases.label);
    let category = if aliases.category_is_label {
        label.clone()
    } else {
        find_alias(header, aliases.category)
    };
    let excluded: BTreeSet<&str> = aliases.excluded.iter().copied().collect();
    let features: Vec<String> = header
        .iter()
        .filter(|h| !excluded.contains(h.as_str()))
        .cloned()
        .collect();
    let weight = find_alias(header, aliases.weight)
        .filter(|w| features.contains(w))
        .ok_or_else(|| IngestError::MissingColumn {
            column: aliases.weight[0].to_string(),
        })?;
    Ok(DatasetSchema {
        name: aliases.name.to_string(),
        source_ip_column: source,
        dest_ip_column: dest,
        label_column: label,
        attack_category_column: category,
        numeric_feature_columns: features,
        summable_weight_column: weight,
        positive_label_values: aliases.positive.iter().map(|s| s.to_string()).collect(),
    })
}

fn resolve_custom(custom: &CustomSchema, header: &[String]) -> Result<DatasetSchema, IngestError> {
    let source = require_column(header, &custom.source_ip_column)?;
    let dest = require_column(header, &custom.dest_ip_column)?;
    let label = custom
        .label_column
        .as_deref()
        .map(|c| require_column(header, c))
        .transpose()?;
    let category = custom
        .attack_category_column
        .as_deref()
        .map(|c| require_column(header, c))
        .transpose()?;
    let features = match &custom.feature_columns {
        FeatureColumns::Explicit(cols) => {
            for c in cols {
                require_column(header, c)?;
            }
            cols.clone()
        }
        FeatureColumns::InferExcluding(excluded) => {
            let mut skip: BTreeSet<&str> = excluded.iter().map(String::as_str).collect();
            skip.insert(custom.source_ip_column.as_str());
            skip.insert(custom.dest_ip_column.as_str());
            if let Some(c) = &custom.label_column {
                skip.insert(c.as_str());
            }
            if let Some(c) = &custom.attack_category_column {
                skip.insert(c.as_str());
            }
            header
                .iter()
                .filter(|h| !skip.contains(h.as_str()))
                .cloned()
                .collect()
        }
    };
    let weight = require_column(header, &custom.summable_weight_column)?;
    Ok(DatasetSchema {
        name: custom.name.clone(),
        source_ip_column: source,
        dest_ip_column: dest,
        label_column: label,
        attack_category_column: category,
        numeric_feature_columns: features,
        summable_weight_column: weight,
        positive_label_values: custom.positive_label_values.iter().cloned().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(cols: &[&str]) -> Vec<String> {
        cols.iter().map(|c| c.to_string()).collect()
    }

    #[test]
    fn preset_names_round_trip() {
        assert_eq!(
            PresetKind::parse("CIC-IDS2017").unwrap(),
            PresetKind::CicIds2017
        );
        assert_eq!(
            PresetKind::parse("unsw_nb15").unwrap(),
            PresetKind::UnswNb15
        );
        assert!(PresetKind::parse("kdd99").is_err());
    }

    #[test]
    fn cic_preset_resolves_features_in_header_order() {
        let h = header(&[
            "Flow ID",
            "Source IP",
            "Destination IP",
            "Flow Duration",
            "Total Fwd Packets",
            "Flow Bytes/s",
            "Label",
        ]);
        let schema = SchemaSpec::Preset(PresetKind::CicIds2017)
            .resolve(&h)
            .unwrap();
        assert_eq!(schema.source_ip_column, "Source IP");
        assert_eq!(
            schema.numeric_feature_columns,
            vec!["Flow Duration", "Total Fwd Packets", "Flow Bytes/s"]
        );
        assert_eq!(schema.summable_weight_column, "Total Fwd Packets");
        assert_eq!(schema.weight_index(), 1);
        assert_eq!(schema.attack_category_column.as_deref(), Some("Label"));
        assert!(schema.positive_label_values.contains("DDoS"));
        assert!(!schema.positive_label_values.contains("BENIGN"));
    }

    #[test]
    fn unsw_preset_separates_label_and_category() {
        let h = header(&[
            "srcip", "sport", "dstip", "dsport", "proto", "dur", "sbytes", "dbytes", "Spkts",
            "attack_cat", "label",
        ]);
        let schema = SchemaSpec::Preset(PresetKind::UnswNb15).resolve(&h).unwrap();
        assert_eq!(schema.label_column.as_deref(), Some("label"));
        assert_eq!(schema.attack_category_column.as_deref(), Some("attack_cat"));
        assert_eq!(
            schema.numeric_feature_columns,
            vec!["dur", "sbytes", "dbytes", "Spkts"]
        );
        assert_eq!(schema.summable_weight_column, "Spkts");
        assert!(schema.positive_label_values.contains("1"));
    }

    #[test]
    fn custom_schema_with_explicit_columns() {
        let h = header(&["src", "dst", "bytes", "pkts", "label"]);
        let spec = SchemaSpec::Custom(CustomSchema {
            name: "tiny".into(),
            source_ip_column: "src".into(),
            dest_ip_column: "dst".into(),
            label_column: Some("label".into()),
            attack_category_column: None,
            feature_columns: FeatureColumns::Explicit(vec!["bytes".into(), "pkts".into()]),
            summable_weight_column: "bytes".into(),
            positive_label_values: vec!["1".into()],
        });
        let schema = spec.resolve(&h).unwrap();
        assert_eq!(schema.numeric_feature_columns.len(), 2);
        assert_eq!(schema.weight_index(), 0);
    }

    #[test]
    fn missing_column_is_named_in_error() {
        let h = header(&["src", "dst", "bytes"]);
        let spec = SchemaSpec::Custom(CustomSchema {
            name: "tiny".into(),
            source_ip_column: "src".into(),
            dest_ip_column: "dst".into(),
            label_column: Some("label".into()),
            attack_category_column: None,
            feature_columns: FeatureColumns::Explicit(vec!["bytes".into()]),
            summable_weight_column: "bytes".into(),
            positive_label_values: vec![],
        });
        let err = spec.resolve(&h).unwrap_err();
        assert!(err.to_string().contains("label"));
    }

    #[test]
    fn schema_rejects_weight_outside_features() {
        let schema = DatasetSchema {
            name: "bad".into(),
            source_ip_column: "src".into(),
            dest_ip_column: "dst".into(),
            label_column: None,
            attack_category_column: None,
            numeric_feature_columns: vec!["a".into()],
            summable_weight_column: "b".into(),
            positive_label_values: BTreeSet::new(),
        };
        assert!(schema.validate().is_err());
    }

    #[test]
    fn schema_rejects_duplicate_features() {
        let schema = DatasetSchema {
            name: "bad".into(),
            source_ip_column: "src".into(),
            dest_ip_column: "dst".into(),
            label_column: None,
            attack_category_column: None,
            numeric_feature_columns: vec!["a".into(), "a".into()],
            summable_weight_column: "a".into(),
            positive_label_values: BTreeSet::new(),
        };
        assert!(schema.validate().is_err());
    }
}
