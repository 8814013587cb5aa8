//! Synthetic flow generators: a lateral-movement scenario whose attack flows
//! are marginally indistinguishable from background, plus CSV fixtures shaped
//! like the two public IDS datasets (column names and dimensions only).

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{write_dataset, DatasetSchema, FlowDataset, FlowRecord, IngestError};

/// Shape of the lateral-movement scenario.
#[derive(Debug, Clone)]
pub struct LateralMovementSpec {
    pub n_flows: usize,
    pub n_clients: usize,
    pub n_servers: usize,
    /// Hop count of the client-to-client attack chain.
    pub chain_len: usize,
    /// Fraction of flows that belong to the chain.
    pub attack_fraction: f64,
    pub seed: u64,
}

impl Default for LateralMovementSpec {
    fn default() -> Self {
        LateralMovementSpec {
            n_flows: 2000,
            n_clients: 40,
            n_servers: 8,
            chain_len: 6,
            attack_fraction: 0.05,
            seed: 0,
        }
    }
}

const LATERAL_FEATURES: [&str; 6] = [
    "packets",
    "duration",
    "bytes_fwd",
    "bytes_bwd",
    "iat_mean",
    "flag_count",
];

fn lateral_schema() -> DatasetSchema {
    DatasetSchema {
        name: "synthetic-lateral".into(),
        source_ip_column: "src".into(),
        dest_ip_column: "dst".into(),
        label_column: Some("label".into()),
        attack_category_column: Some("category".into()),
        numeric_feature_columns: LATERAL_FEATURES.iter().map(|s| s.to_string()).collect(),
        summable_weight_column: "packets".into(),
        positive_label_values: BTreeSet::from(["1".to_string()]),
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// One flow's statistics; identical law for background and attack flows, so
/// the classes cannot be told apart from the feature columns alone.
fn flow_features(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let packets = (3.0 + 0.5 * gauss(rng)).exp().round().max(1.0);
    let duration = (0.5 + 0.25 * gauss(rng)).exp();
    let bytes_fwd = packets * (200.0 + 40.0 * gauss(rng)).max(40.0);
    let bytes_bwd = packets * (300.0 + 80.0 * gauss(rng)).max(40.0);
    let iat_mean = duration / packets;
    let flag_count = (2.0 + gauss(rng)).round().clamp(0.0, 8.0);
    vec![packets, duration, bytes_fwd, bytes_bwd, iat_mean, flag_count]
}

/// Client/server star traffic with an interleaved client-to-client chain.
///
/// Background clients talk only to a few sticky servers; the chain walks
/// through distinct clients, so only the graph around its members looks
/// unusual — every per-flow statistic is drawn from the background law.
pub fn lateral_movement_dataset(spec: &LateralMovementSpec) -> FlowDataset {
    assert!(spec.n_clients >= spec.chain_len + 1, "chain needs distinct clients");
    assert!(spec.n_servers >= 1 && spec.chain_len >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let client = |i: usize| format!("10.0.0.{i}");
    let server = |j: usize| format!("10.0.1.{j}");

    // chain members, chosen once per dataset
    let mut pool: Vec<usize> = (0..spec.n_clients).collect();
    for i in (1..pool.len()).rev() {
        pool.swap(i, rng.gen_range(0..=i));
    }
    let chain: Vec<usize> = pool[..spec.chain_len].to_vec();

    let n_attacks = ((spec.n_flows as f64 * spec.attack_fraction).round() as usize)
        .clamp(1, spec.n_flows);
    let stride = spec.n_flows / n_attacks;
    let mut records = Vec::with_capacity(spec.n_flows);
    let mut hop = 0usize;
    let mut attacks_made = 0usize;
    for index in 0..spec.n_flows {
        let is_attack =
            stride > 0 && index % stride == stride / 2 && attacks_made < n_attacks;
        let features = flow_features(&mut rng);
        let record = if is_attack {
            attacks_made += 1;
            let a = chain[hop % (spec.chain_len - 1)];
            let b = chain[hop % (spec.chain_len - 1) + 1];
            hop += 1;
            FlowRecord {
                index,
                src: client(a),
                dst: client(b),
                features,
                label: Some(true),
                attack_category: Some("lateral_movement".into()),
            }
        } else {
            // sticky fan-out: each client prefers two servers
            let c = rng.gen_range(0..spec.n_clients);
            let pick = rng.gen_range(0..2usize);
            let s = (c * 7 + pick * 3) % spec.n_servers;
            FlowRecord {
                index,
                src: client(c),
                dst: server(s),
                features,
                label: Some(false),
                attack_category: None,
            }
        };
        records.push(record);
    }
    FlowDataset {
        schema: lateral_schema(),
        records,
        m: LATERAL_FEATURES.len(),
    }
}

fn shaped_records(
    n_flows: usize,
    m: usize,
    seed: u64,
    categories: &[&str],
    category_of: impl Fn(&mut ChaCha8Rng, usize) -> usize,
) -> Vec<(String, String, Vec<f64>, Option<String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_attacks = (n_flows / 20).max(1);
    let stride = (n_flows / n_attacks).max(1);
    let mut rows = Vec::with_capacity(n_flows);
    let mut attacks_made = 0usize;
    for index in 0..n_flows {
        let is_attack = index % stride == stride / 2 && attacks_made < n_attacks;
        if is_attack {
            attacks_made += 1;
        }
        let (src, dst) = if is_attack {
            (
                format!("192.168.9.{}", rng.gen_range(0..4)),
                format!("10.1.0.{}", rng.gen_range(0..30)),
            )
        } else {
            (
                format!("10.1.0.{}", rng.gen_range(0..30)),
                format!("10.2.0.{}", rng.gen_range(0..6)),
            )
        };
        let shift = if is_attack { 1.5 } else { 0.0 };
        let mut features: Vec<f64> = (0..m).map(|_| 10.0 + 3.0 * gauss(&mut rng) + shift).collect();
        features[0] = features[0].abs().round().max(1.0);
        let category = if is_attack {
            Some(categories[category_of(&mut rng, index)].to_string())
        } else {
            None
        };
        rows.push((src, dst, features, category));
    }
    rows
}

/// Writes a CSV with the first public dataset's column conventions:
/// attack names live in the label column itself, m = 87 numeric features.
pub fn write_cic_shaped(path: &Path, n_flows: usize, seed: u64) -> Result<(), IngestError> {
    let mut feature_names = vec!["Total Fwd Packets".to_string()];
    for i in 1..87 {
        feature_names.push(format!("Stat {i:02}"));
    }
    let categories = ["DDoS", "PortScan", "Bot"];
    let schema = DatasetSchema {
        name: "cic-ids2017".into(),
        source_ip_column: "Source IP".into(),
        dest_ip_column: "Destination IP".into(),
        label_column: Some("Label".into()),
        attack_category_column: Some("Label".into()),
        numeric_feature_columns: feature_names,
        summable_weight_column: "Total Fwd Packets".into(),
        positive_label_values: categories.iter().map(|s| s.to_string()).collect(),
    };
    let rows = shaped_records(n_flows, 87, seed, &categories, |rng, _| rng.gen_range(0..3));
    let records: Vec<FlowRecord> = rows
        .into_iter()
        .enumerate()
        .map(|(index, (src, dst, features, category))| FlowRecord {
            index,
            src,
            dst,
            features,
            label: Some(category.is_some()),
            attack_category: category,
        })
        .collect();
    let ds = FlowDataset {
        schema,
        m: 87,
        records,
    };
    write_dataset(&ds, path)
}

/// The nine attack families of the second public dataset.
pub const UNSW_CATEGORIES: [&str; 9] = [
    "Fuzzers",
    "Analysis",
    "Backdoors",
    "DoS",
    "Exploits",
    "Generic",
    "Reconnaissance",
    "Shellcode",
    "Worms",
];

/// Writes a CSV with the second public dataset's column conventions:
/// binary label column plus a separate category column, m = 59 features.
pub fn write_unsw_shaped(path: &Path, n_flows: usize, seed: u64) -> Result<(), IngestError> {
    let mut feature_names = vec!["Spkts".to_string()];
    for i in 1..59 {
        feature_names.push(format!("stat_{i:02}"));
    }
    let rows = shaped_records(n_flows, 59, seed, &UNSW_CATEGORIES, |_, index| index % 9);
    let records: Vec<FlowRecord> = rows
        .into_iter()
        .enumerate()
        .map(|(index, (src, dst, features, category))| FlowRecord {
            index,
            src,
            dst,
            features,
            label: Some(category.is_some()),
            attack_category: category,
        })
        .collect();
    let schema = DatasetSchema {
        name: "unsw-nb15".into(),
        source_ip_column: "srcip".into(),
        dest_ip_column: "dstip".into(),
        label_column: Some("label".into()),
        attack_category_column: Some("attack_cat".into()),
        numeric_feature_columns: feature_names,
        summable_weight_column: "Spkts".into(),
        positive_label_values: BTreeSet::from(["1".to_string()]),
    };
    let ds = FlowDataset {
        schema,
        m: 59,
        records,
    };
    write_dataset(&ds, path)
}
