//! Command implementations: each consumes a resolved config and writes
//! provenance-stamped artifacts into the output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use flowtopo::detect::{fit, save_model, FORMAT_VERSION};
use flowtopo::ensemble::{ensemble_from_members, load_ensemble, EnsembleFile};
use flowtopo::eval::{
    attack_breakdown, cells_for, grid_search, prepare_block, render_timings, rolling_rows,
    scaled_false_positives, stage_ranges, BestSelection, EvalReport, GridSpec, ReportCell,
    StageRanges, TimingRow,
};
use flowtopo::expand::as_regime;
use flowtopo::graph::build_graph;
use flowtopo::ingest::load_with_spec;
use flowtopo::topo::node_features;
use flowtopo::{DetectorKind, DetectorParams, FlowDataset, Regime, Standardizer};

use crate::config::ResolvedConfig;
use crate::CliError;

const TUNED_FORMAT_VERSION: u32 = 1;

/// Output of `tune`, input of `train`.
#[derive(Debug, Serialize, Deserialize)]
struct TunedFile {
    format_version: u32,
    config_hash: String,
    stage_ranges: StageRanges,
    selections: Vec<TunedSelection>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TunedSelection {
    regime: Regime,
    detector: DetectorKind,
    params: DetectorParams,
    balanced_accuracy: f64,
    false_positives: usize,
    candidates_tried: usize,
    failures: Vec<String>,
}

/// Per-regime standardizer fitted on the training block; `predict` must
/// reuse it verbatim on later data.
#[derive(Debug, Serialize, Deserialize)]
struct StandardizerFile {
    format_version: u32,
    config_hash: String,
    regime: Regime,
    standardizer: Standardizer,
}

/// Builds the graph, node features, and expanded features over the whole
/// dataset and writes each as delimited text.
pub fn featurize(cfg: &ResolvedConfig) -> Result<(), CliError> {
    let ds = load_flows(cfg)?;
    let (graph, _) = build_graph(&ds, &ds.schema.summable_weight_column)?;
    let z = node_features(&graph, &cfg.feature)?;
    let standard = as_regime(&ds, None, None, Regime::Standard, cfg.label_rule)?;
    let mixed = as_regime(&ds, Some(&z), Some(&graph), Regime::Mixed, cfg.label_rule)?;

    ensure_dir(&cfg.output_dir)?;
    let artifacts = [
        ("graph_edges.tsv", graph.edge_list_text()),
        ("node_features.csv", z.to_delimited(&graph)),
        ("flow_features.csv", standard.to_delimited()),
        ("expanded_features.csv", mixed.to_delimited()),
    ];
    for (name, body) in &artifacts {
        write_stamped(&cfg.output_dir.join(name), &cfg.hash, body)?;
    }
    println!(
        "graph: {} nodes, {} directed edges -> graph_edges.tsv",
        graph.n(),
        graph.total_edges()
    );
    println!("node features: {}x{} -> node_features.csv", z.p(), z.n());
    println!(
        "flow features: {}x{} -> flow_features.csv",
        standard.d(),
        standard.n()
    );
    println!(
        "expanded features: {}x{} -> expanded_features.csv",
        mixed.d(),
        mixed.n()
    );
    Ok(())
}

/// Grid-searches detector parameters on the tuning prefix (fit and score
/// the same block) and records the per-(regime, detector) winners.
pub fn tune(cfg: &ResolvedConfig) -> Result<(), CliError> {
    let ds = load_flows(cfg)?;
    let ranges = stage_ranges(ds.n(), &cfg.split)?;
    ranges.audit()?;
    let block = ds.slice_range(ranges.tune.clone());

    let grid = GridSpec {
        candidates: cfg.candidates.clone(),
        regimes: cfg.regimes.clone(),
        time_tie_break: cfg.time_tie_break,
    };
    let mut data = Vec::new();
    for &regime in &cfg.regimes {
        let (rd, _) = prepare_block(&block, regime, &cfg.feature, cfg.label_rule, None)?;
        data.push(rd);
    }
    let selections = grid_search(&data, &grid)?;
    let shape_of: BTreeMap<Regime, (usize, usize, usize)> =
        data.iter().map(|d| (d.regime, d.shape)).collect();

    let mut cells = Vec::new();
    let mut timings = Vec::new();
    let mut notes = vec!["scores are fit-and-predict on the tuning prefix".to_string()];
    for s in &selections {
        let shape = shape_of[&s.regime];
        cells.push(ReportCell {
            regime: s.regime.name().into(),
            detector: s.detector.name().into(),
            params: s.params.describe(),
            balanced_accuracy: s.score.ba.value,
            tpr: s.score.ba.tpr,
            tnr: s.score.ba.tnr,
            single_class: s.score.ba.single_class,
            false_positives: s.score.false_positives,
            shape: [shape.0, shape.1, shape.2],
        });
        timings.push(TimingRow {
            regime: s.regime.name().into(),
            detector: s.detector.name().into(),
            params: s.params.describe(),
            fit_seconds: s.score.fit_seconds,
        });
        if !s.failures.is_empty() {
            notes.push(format!(
                "{}/{}: {} of {} candidates failed to fit",
                s.regime.name(),
                s.detector.name(),
                s.failures.len(),
                s.candidates_tried
            ));
        }
    }

    let report = EvalReport {
        title: "parameter tuning on the labeled prefix".into(),
        config_hash: Some(cfg.hash.clone()),
        stage_ranges: ranges.clone(),
        cells,
        breakdown: vec![],
        notes,
    };
    ensure_dir(&cfg.output_dir)?;
    let tuned = TunedFile {
        format_version: TUNED_FORMAT_VERSION,
        config_hash: cfg.hash.clone(),
        stage_ranges: ranges,
        selections: selections.into_iter().map(to_tuned).collect(),
    };
    write_json(&cfg.output_dir.join("tuned_params.json"), &tuned)?;
    write_report(cfg, "tune_report", &report)?;
    write_timings(cfg, "tune_timings", &timings)?;
    print!("{}", report.render_text());
    Ok(())
}

fn to_tuned(s: BestSelection) -> TunedSelection {
    TunedSelection {
        regime: s.regime,
        detector: s.detector,
        params: s.params,
        balanced_accuracy: s.score.ba.value,
        false_positives: s.score.false_positives,
        candidates_tried: s.candidates_tried,
        failures: s.failures,
    }
}

/// Fits every tuned detector plus the ensemble on the training block,
/// persists the models, and reports training-block and next-block scores.
pub fn train(cfg: &ResolvedConfig, params_path: Option<&Path>) -> Result<(), CliError> {
    let ds = load_flows(cfg)?;
    let ranges = stage_ranges(ds.n(), &cfg.split)?;
    ranges.audit()?;

    let default_path = cfg.output_dir.join("tuned_params.json");
    let path = params_path.unwrap_or(&default_path);
    let tuned: TunedFile = read_json(path)?;
    if tuned.format_version != TUNED_FORMAT_VERSION {
        return Err(CliError::Data(format!(
            "{}: unsupported format version {}",
            path.display(),
            tuned.format_version
        )));
    }
    check_provenance(path, Some(&tuned.config_hash), &cfg.hash)?;

    let train_block = ds.slice_range(ranges.train.clone());
    let test_block = if ranges.test.is_empty() {
        None
    } else {
        Some(ds.slice_range(ranges.test.clone()))
    };

    let models_dir = cfg.output_dir.join("models");
    ensure_dir(&models_dir)?;

    let mut cells = Vec::new();
    let mut next_cells = Vec::new();
    let mut timings: Vec<TimingRow> = Vec::new();
    let mut notes = vec!["scored on the block the models were fitted on".to_string()];
    let next_notes = vec!["scored on the post-training remainder by the models above".to_string()];
    let mut trained_any = false;

    for &regime in &cfg.regimes {
        let mut selected: Vec<&TunedSelection> = tuned
            .selections
            .iter()
            .filter(|s| s.regime == regime)
            .collect();
        selected.sort_by_key(|s| s.detector);
        if selected.is_empty() {
            return Err(CliError::Data(format!(
                "{} has no tuned parameters for the {} regime",
                path.display(),
                regime.name()
            )));
        }

        let (rd, standardizer) =
            prepare_block(&train_block, regime, &cfg.feature, cfg.label_rule, None)?;
        let mut members = Vec::new();
        for sel in &selected {
            let started = Instant::now();
            match fit(rd.x.view(), &sel.params) {
                Ok(model) => {
                    timings.push(TimingRow {
                        regime: regime.name().into(),
                        detector: sel.detector.name().into(),
                        params: sel.params.describe(),
                        fit_seconds: started.elapsed().as_secs_f64(),
                    });
                    members.push(model);
                }
                Err(e) => notes.push(format!(
                    "{}/{}: fit failed: {e}",
                    regime.name(),
                    sel.detector.name()
                )),
            }
        }
        if members.is_empty() {
            notes.push(format!(
                "{}: no members could be fitted; regime skipped",
                regime.name()
            ));
            continue;
        }
        let ensemble = ensemble_from_members(members, &cfg.ensemble, rd.x.view())
            .map_err(CliError::from)?;

        for model in &ensemble.members {
            let file = member_file_name(regime, model.params.kind());
            save_model(&models_dir.join(&file), model, Some(&cfg.hash))?;
        }
        let container = EnsembleFile {
            format_version: FORMAT_VERSION,
            config_hash: Some(cfg.hash.clone()),
            params: ensemble.params,
            threshold: ensemble.threshold,
            dim: ensemble.dim,
            norms: ensemble.norms.clone(),
            member_files: ensemble
                .members
                .iter()
                .map(|m| member_file_name(regime, m.params.kind()))
                .collect(),
        };
        write_json(
            &models_dir.join(format!("{}.ensemble.json", regime.name())),
            &container,
        )?;
        write_json(
            &models_dir.join(format!("{}.standardizer.json", regime.name())),
            &StandardizerFile {
                format_version: FORMAT_VERSION,
                config_hash: cfg.hash.clone(),
                regime,
                standardizer: standardizer.clone(),
            },
        )?;

        cells.extend(cells_for(
            regime,
            &ensemble.members,
            Some(&ensemble),
            rd.x.view(),
            &rd.labels,
            rd.shape,
        )?);
        trained_any = true;

        if let Some(block) = &test_block {
            let (test_rd, _) =
                prepare_block(block, regime, &cfg.feature, cfg.label_rule, Some(&standardizer))?;
            next_cells.extend(cells_for(
                regime,
                &ensemble.members,
                Some(&ensemble),
                test_rd.x.view(),
                &test_rd.labels,
                test_rd.shape,
            )?);
        }
    }
    if !trained_any {
        return Err(CliError::Fit(
            "no detector could be fitted in any regime".into(),
        ));
    }

    let report = EvalReport {
        title: "training-block fit with tuned parameters".into(),
        config_hash: Some(cfg.hash.clone()),
        stage_ranges: ranges.clone(),
        cells,
        breakdown: vec![],
        notes,
    };
    write_report(cfg, "train_report", &report)?;
    if !next_cells.is_empty() {
        let next = EvalReport {
            title: "next-block evaluation (post-training remainder)".into(),
            config_hash: Some(cfg.hash.clone()),
            stage_ranges: ranges,
            cells: next_cells,
            breakdown: vec![],
            notes: next_notes,
        };
        write_report(cfg, "next_block_report", &next)?;
    }
    write_timings(cfg, "train_timings", &timings)?;
    print!("{}", report.render_text());
    Ok(())
}

fn member_file_name(regime: Regime, kind: DetectorKind) -> String {
    format!("{}.{}.json", regime.name(), kind.name())
}

/// Scores the post-training remainder with persisted models: one rolling
/// TPR/TNR/FP series per (regime, detector) and the per-attack breakdown
/// of each regime's ensemble.
pub fn predict(cfg: &ResolvedConfig, models_dir: Option<&Path>) -> Result<(), CliError> {
    let ds = load_flows(cfg)?;
    let ranges = stage_ranges(ds.n(), &cfg.split)?;
    ranges.audit()?;
    if ranges.test.is_empty() {
        return Err(CliError::Data(
            "no samples remain after the training block; nothing to predict".into(),
        ));
    }
    let default_dir = cfg.output_dir.join("models");
    let dir = models_dir.unwrap_or(&default_dir);
    let test_block = ds.slice_range(ranges.test.clone());
    ensure_dir(&cfg.output_dir)?;

    let mut rolling = String::from(
        "regime,detector,fraction,count,true_pos,false_pos,true_neg,false_neg,tpr,tnr,scaled_fp,note\n",
    );
    for &regime in &cfg.regimes {
        let ensemble_path = dir.join(format!("{}.ensemble.json", regime.name()));
        let (ensemble, hash) = load_ensemble(&ensemble_path)?;
        check_provenance(&ensemble_path, hash.as_deref(), &cfg.hash)?;
        let std_path = dir.join(format!("{}.standardizer.json", regime.name()));
        let std_file: StandardizerFile = read_json(&std_path)?;
        check_provenance(&std_path, Some(&std_file.config_hash), &cfg.hash)?;
        if std_file.regime != regime {
            return Err(CliError::Data(format!(
                "{} was fitted for the {} regime",
                std_path.display(),
                std_file.regime.name()
            )));
        }

        let (rd, _) = prepare_block(
            &test_block,
            regime,
            &cfg.feature,
            cfg.label_rule,
            Some(&std_file.standardizer),
        )?;

        let mut series: Vec<(String, Vec<bool>)> = Vec::new();
        for member in &ensemble.members {
            let name = member.params.kind().name().to_string();
            series.push((name, member.predict(rd.x.view())?));
        }
        let ensemble_pred = ensemble.predict(rd.x.view())?;
        series.push(("ensemble".into(), ensemble_pred.clone()));

        for (detector, pred) in &series {
            let rows = rolling_rows(pred, &rd.labels, &cfg.split.test_fractions)?;
            let scaled = scaled_false_positives(&rows);
            for (row, s) in rows.iter().zip(&scaled) {
                let c = &row.confusion;
                rolling.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    regime.name(),
                    detector,
                    row.fraction,
                    row.count,
                    c.true_pos,
                    c.false_pos,
                    c.true_neg,
                    c.false_neg,
                    fmt_opt(row.tpr),
                    fmt_opt(row.tnr),
                    s,
                    row.warning.as_deref().unwrap_or("")
                ));
            }
        }

        let breakdown = attack_breakdown(&ensemble_pred, &rd.labels, &rd.categories)?;
        let cells = cells_for(
            regime,
            &ensemble.members,
            Some(&ensemble),
            rd.x.view(),
            &rd.labels,
            rd.shape,
        )?;
        let report = EvalReport {
            title: format!("{} regime on the post-training remainder", regime.name()),
            config_hash: Some(cfg.hash.clone()),
            stage_ranges: ranges.clone(),
            cells,
            breakdown,
            notes: vec![
                format!("ensemble: {}", ensemble.params.describe()),
                "breakdown counts the ensemble's detections per attack category".into(),
            ],
        };
        write_report(cfg, &format!("predict_report.{}", regime.name()), &report)?;
        print!("{}", report.render_text());
    }
    let rolling_path = cfg.output_dir.join("rolling.csv");
    write_stamped(&rolling_path, &cfg.hash, &rolling)?;
    println!("wrote {}", rolling_path.display());
    Ok(())
}

/// Re-renders every machine-readable report found in the output directory.
pub fn report(cfg: &ResolvedConfig) -> Result<(), CliError> {
    let dir = &cfg.output_dir;
    let entries = fs::read_dir(dir).map_err(|e| {
        CliError::Io(format!("cannot read output directory {}: {e}", dir.display()))
    })?;
    let mut names: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();

    let mut found = false;
    for path in names {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        if name.contains("_timings") {
            let rows: Vec<TimingRow> = read_json(&path)?;
            println!("== {name} ==");
            print!("{}", render_timings(&rows));
            found = true;
        } else if name.contains("_report") {
            let parsed: EvalReport = read_json(&path)?;
            println!("== {name} ==");
            if parsed.config_hash.as_deref() != Some(cfg.hash.as_str()) {
                println!("(produced by a different config than the current one)");
            }
            print!("{}", parsed.render_text());
            found = true;
        }
    }
    if !found {
        return Err(CliError::Data(format!(
            "no report files in {}; run tune, train, or predict first",
            dir.display()
        )));
    }
    Ok(())
}

/// Loads the flow table and applies the config's weight-column override.
fn load_flows(cfg: &ResolvedConfig) -> Result<FlowDataset, CliError> {
    let mut ds = load_with_spec(&cfg.dataset_path, &cfg.schema_spec, cfg.delimiter)?;
    if let Some(w) = &cfg.weight_column {
        if ds.schema.feature_index(w).is_none() {
            return Err(CliError::Config(format!(
                "graph.weight_column {w:?} is not a numeric feature column of the dataset"
            )));
        }
        ds.schema.summable_weight_column = w.clone();
    }
    Ok(ds)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}

/// Delimited artifacts carry the provenance hash as a comment first line.
fn write_stamped(path: &Path, hash: &str, body: &str) -> Result<(), CliError> {
    write_text(path, &format!("# config_hash={hash}\n{body}"))
}

fn write_text(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("cannot parse {}: {e}", path.display())))
}

/// Reports get a canonical JSON file and an aligned text rendering.
fn write_report(cfg: &ResolvedConfig, stem: &str, report: &EvalReport) -> Result<(), CliError> {
    write_text(
        &cfg.output_dir.join(format!("{stem}.json")),
        &report.to_canonical_json(),
    )?;
    write_text(
        &cfg.output_dir.join(format!("{stem}.txt")),
        &report.render_text(),
    )
}

/// Wall times vary run to run, so they live in their own sidecar files
/// and never in the canonical reports.
fn write_timings(cfg: &ResolvedConfig, stem: &str, rows: &[TimingRow]) -> Result<(), CliError> {
    write_json(&cfg.output_dir.join(format!("{stem}.json")), &rows)?;
    write_text(
        &cfg.output_dir.join(format!("{stem}.txt")),
        &render_timings(rows),
    )
}

fn check_provenance(path: &Path, found: Option<&str>, expected: &str) -> Result<(), CliError> {
    match found {
        Some(h) if h == expected => Ok(()),
        Some(h) => Err(CliError::Data(format!(
            "{} was produced by config {}, current config is {}; refusing to run",
            path.display(),
            short_hash(h),
            short_hash(expected)
        ))),
        None => Err(CliError::Data(format!(
            "{} carries no config hash; refusing to run",
            path.display()
        ))),
    }
}

fn short_hash(h: &str) -> &str {
    &h[..h.len().min(12)]
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}
