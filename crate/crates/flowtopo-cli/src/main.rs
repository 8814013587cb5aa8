//! flowtopo: graph-augmented anomaly detection over network flow records.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flowtopo::detect::DetectError;
use flowtopo::eval::EvalError;
use flowtopo::expand::ExpandError;
use flowtopo::graph::GraphError;
use flowtopo::ingest::IngestError;
use flowtopo::topo::TopoError;

/// Failure classes, one exit code each, so scripts can tell a bad config
/// from bad data from a failed fit.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Invalid config file or flags → exit 2.
    #[error("{0}")]
    Config(String),
    /// Unusable data, labels, or provenance mismatch → exit 3.
    #[error("{0}")]
    Data(String),
    /// Detector fitting failed → exit 4.
    #[error("{0}")]
    Fit(String),
    /// Filesystem trouble → exit 1.
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Fit(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match &e {
            IngestError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ExpandError> for CliError {
    fn from(e: ExpandError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TopoError> for CliError {
    fn from(e: TopoError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<DetectError> for CliError {
    fn from(e: DetectError) -> Self {
        let msg = e.to_string();
        match e {
            DetectError::Io(_) => CliError::Io(msg),
            DetectError::Serde(_) | DetectError::BadFormatVersion { .. } => CliError::Data(msg),
            DetectError::InvalidParameter(_) => CliError::Config(msg),
            _ => CliError::Fit(msg),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        let msg = e.to_string();
        match e {
            EvalError::InvalidInput(_) => CliError::Config(msg),
            EvalError::AllCandidatesFailed { .. } => CliError::Fit(msg),
            EvalError::Detect(inner) => CliError::from(inner),
            EvalError::Ingest(inner) => CliError::from(inner),
            _ => CliError::Data(msg),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "flowtopo",
    version,
    about = "Flow-to-graph anomaly detection pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the traffic graph, node features, and expanded features.
    Featurize(CommonArgs),
    /// Grid-search detector parameters on the labeled tuning prefix.
    Tune(CommonArgs),
    /// Fit detectors and ensembles on the training block with tuned params.
    Train(TrainArgs),
    /// Score the post-training remainder: rolling series + attack breakdown.
    Predict(PredictArgs),
    /// Re-render human-readable tables from emitted machine-readable files.
    Report(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Pipeline config file (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Override one config key, e.g. --set run.seed=7 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Tuned-parameters file (default: <output_dir>/tuned_params.json).
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Models directory (default: <output_dir>/models).
    #[arg(long)]
    models: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Featurize(args) => commands::featurize(&load(&args)?),
        Command::Tune(args) => commands::tune(&load(&args)?),
        Command::Train(args) => commands::train(&load(&args.common)?, args.params.as_deref()),
        Command::Predict(args) => commands::predict(&load(&args.common)?, args.models.as_deref()),
        Command::Report(args) => commands::report(&load(&args)?),
    }
}

fn load(args: &CommonArgs) -> Result<config::ResolvedConfig, CliError> {
    let cfg = config::load_config(&args.config, &args.sets)?;
    if let Some(workers) = cfg.workers {
        // First initialization wins; a later redundant call fails harmlessly.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    Ok(cfg)
}
