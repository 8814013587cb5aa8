//! End-to-end runs of the `flowtopo` binary against generated fixtures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Output;

use flowtopo::synth::write_cic_shaped;

const CONFIG: &str = r#"
[dataset]
path = "flows.csv"
schema = "cic-ids2017"

[split]
tune = 0.10
train = 0.20

[run]
seed = 0

[[detectors.candidates]]
detector = "iforest"
n_trees = 50
subsample = 64
contamination = 0.1

[[detectors.candidates]]
detector = "lof"
k = 5
contamination = 0.1

[[detectors.candidates]]
detector = "ocsvm"
nu = 0.2
gamma = "scale"
"#;

fn fixture(dir: &Path, n_flows: usize) -> PathBuf {
    write_cic_shaped(&dir.join("flows.csv"), n_flows, 0).unwrap();
    let path = dir.join("pipeline.toml");
    fs::write(&path, CONFIG).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_flowtopo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
}

#[test]
fn featurize_writes_stamped_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture(dir.path(), 400);
    let config = config.to_str().unwrap();

    let stdout = run_ok(&["featurize", "--config", config]);
    assert!(stdout.contains("expanded features: 183x400"), "{stdout}");
    assert!(stdout.contains("node features: 48x"), "{stdout}");
    assert!(stdout.contains("flow features: 87x400"), "{stdout}");

    let out = dir.path().join("out");
    let names = [
        "graph_edges.tsv",
        "node_features.csv",
        "flow_features.csv",
        "expanded_features.csv",
    ];
    let first: Vec<String> = names.iter().map(|n| read(&out.join(n))).collect();
    for text in &first {
        assert!(text.starts_with("# config_hash="), "missing provenance stamp");
    }

    run_ok(&["featurize", "--config", config]);
    for (name, before) in names.iter().zip(&first) {
        assert_eq!(&read(&out.join(name)), before, "{name} changed between runs");
    }
}

#[test]
fn empty_catalog_expansion_equals_flow_features() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture(dir.path(), 200);
    run_ok(&[
        "featurize",
        "--config",
        config.to_str().unwrap(),
        "--set",
        "features.catalog=empty",
    ]);
    let out = dir.path().join("out");
    let flow = read(&out.join("flow_features.csv"));
    let expanded = read(&out.join("expanded_features.csv"));
    assert_eq!(flow, expanded);
}

#[test]
fn full_chain_produces_reports_models_and_series() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture(dir.path(), 1200);
    let config = config.to_str().unwrap();
    let out = dir.path().join("out");

    let stdout = run_ok(&["tune", "--config", config]);
    assert!(stdout.contains("iforest"), "{stdout}");
    for name in [
        "tuned_params.json",
        "tune_report.json",
        "tune_report.txt",
        "tune_timings.json",
        "tune_timings.txt",
    ] {
        assert!(out.join(name).exists(), "missing {name}");
    }
    let tuned = read(&out.join("tuned_params.json"));
    assert!(tuned.contains("\"config_hash\""));
    assert_eq!(tuned.matches("\"regime\"").count(), 9, "3 regimes x 3 detectors");

    run_ok(&["train", "--config", config]);
    let models = out.join("models");
    for regime in ["standard", "graph", "mixed"] {
        for file in ["iforest", "lof", "ocsvm", "ensemble", "standardizer"] {
            let name = format!("{regime}.{file}.json");
            assert!(models.join(&name).exists(), "missing {name}");
        }
    }
    assert!(out.join("train_report.json").exists());
    assert!(out.join("next_block_report.json").exists());

    run_ok(&["predict", "--config", config]);
    let rolling = read(&out.join("rolling.csv"));
    assert!(rolling.starts_with("# config_hash="));
    // hash line + header + 3 regimes x 4 series x 5 fractions
    assert_eq!(rolling.lines().count(), 2 + 3 * 4 * 5, "{rolling}");
    assert!(rolling.contains("mixed,ensemble,1,"));
    for regime in ["standard", "graph", "mixed"] {
        assert!(out.join(format!("predict_report.{regime}.json")).exists());
        assert!(out.join(format!("predict_report.{regime}.txt")).exists());
    }

    let rendered = run_ok(&["report", "--config", config]);
    assert!(rendered.contains("== tune_report.json =="), "{rendered}");
    assert!(rendered.contains("== predict_report.standard.json =="));
    assert!(rendered.contains("== train_timings.json =="));
}

#[test]
fn repeated_chain_runs_are_byte_identical() {
    let keep_a = tempfile::tempdir().unwrap();
    let keep_b = tempfile::tempdir().unwrap();
    for dir in [keep_a.path(), keep_b.path()] {
        let config = fixture(dir, 800);
        let config = config.to_str().unwrap();
        run_ok(&["tune", "--config", config]);
        run_ok(&["train", "--config", config]);
        run_ok(&["predict", "--config", config]);
    }
    let out_a = keep_a.path().join("out");
    let out_b = keep_b.path().join("out");
    let mut compared = 0;
    for name in [
        "tuned_params.json",
        "tune_report.json",
        "tune_report.txt",
        "train_report.json",
        "next_block_report.json",
        "rolling.csv",
        "predict_report.standard.json",
        "predict_report.graph.json",
        "predict_report.mixed.json",
    ] {
        assert_eq!(
            read(&out_a.join(name)),
            read(&out_b.join(name)),
            "{name} differs between identical runs"
        );
        compared += 1;
    }
    for entry in fs::read_dir(out_a.join("models")).unwrap() {
        let name = entry.unwrap().file_name();
        let name = name.to_str().unwrap();
        assert_eq!(
            read(&out_a.join("models").join(name)),
            read(&out_b.join("models").join(name)),
            "models/{name} differs between identical runs"
        );
        compared += 1;
    }
    assert_eq!(compared, 9 + 15);
}

#[test]
fn bad_config_exits_2_with_all_problems() {
    let dir = tempfile::tempdir().unwrap();
    write_cic_shaped(&dir.path().join("flows.csv"), 100, 0).unwrap();
    let config = dir.path().join("pipeline.toml");
    fs::write(
        &config,
        "[dataset]\npath = \"flows.csv\"\nschema = \"nope\"\n[features]\nwalk_length = 0\n",
    )
    .unwrap();
    let out = run(&["featurize", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("unknown dataset.schema"), "{stderr}");
    assert!(stderr.contains("walk_length"), "{stderr}");
}

#[test]
fn unlabeled_tuning_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    write_cic_shaped(&dir.path().join("flows.csv"), 200, 0).unwrap();
    let config = dir.path().join("pipeline.toml");
    fs::write(
        &config,
        r#"
[dataset]
path = "flows.csv"
schema = "custom"

[dataset.custom]
name = "unlabeled"
source_ip_column = "Source IP"
dest_ip_column = "Destination IP"
summable_weight_column = "Total Fwd Packets"
feature_columns = { explicit = ["Total Fwd Packets", "Stat 01", "Stat 02"] }
"#,
    )
    .unwrap();
    let out = run(&["tune", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not fully labeled"));
}

#[test]
fn all_failing_candidates_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    write_cic_shaped(&dir.path().join("flows.csv"), 200, 0).unwrap();
    let config = dir.path().join("pipeline.toml");
    fs::write(
        &config,
        "[dataset]\npath = \"flows.csv\"\nschema = \"cic-ids2017\"\n\
         [split]\ntune = 0.10\ntrain = 0.20\n\
         [[detectors.candidates]]\ndetector = \"lof\"\nk = 500\ncontamination = 0.1\n",
    )
    .unwrap();
    let out = run(&["tune", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("all candidates failed"));
}

#[test]
fn provenance_mismatch_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture(dir.path(), 600);
    let config = config.to_str().unwrap();
    run_ok(&["tune", "--config", config]);

    let out = run(&["train", "--config", config, "--set", "run.seed=1"]);
    assert_eq!(exit_code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("refusing to run"));

    run_ok(&["train", "--config", config]);
    let out = run(&["predict", "--config", config, "--set", "run.seed=1"]);
    assert_eq!(exit_code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("refusing to run"));

    run_ok(&["predict", "--config", config]);
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("pipeline.toml");
    fs::write(&config, "[dataset]\npath = \"absent.csv\"\nschema = \"cic-ids2017\"\n").unwrap();
    let out = run(&["featurize", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 3);
}

#[test]
fn missing_config_exits_1() {
    let out = run(&["featurize", "--config", "/nonexistent/pipeline.toml"]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read config"));
}

#[test]
fn report_before_any_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture(dir.path(), 100);
    fs::create_dir_all(dir.path().join("out")).unwrap();
    let out = run(&["report", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no report files"));
}
