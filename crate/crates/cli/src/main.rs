mod config;
mod manifest;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use quakecast::evaluation::Aggregation;
use quakecast::Error;
use serde_json::json;

use config::{Overrides, RunConfig};
use manifest::{ConfigError, MissingArtifact};
use stages::{SplitChoice, Stage};

/// Seismic forecasting and nowcasting pipeline.
#[derive(Parser)]
#[command(name = "quakecast", version)]
struct Cli {
    /// JSON run configuration; input paths inside it resolve against its directory, `out` against the working directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the training seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the catalog and keep events inside the region.
    Ingest,
    /// Grid events into per-bin series and build the bin graph.
    Build,
    /// Build lookback windows and the train/test split.
    Features,
    /// Train configured models.
    Train {
        #[arg(long)]
        model: Option<String>,
    },
    /// Write forecast streams for trained models.
    Predict {
        #[arg(long)]
        model: Option<String>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitChoice,
    },
    /// Score forecast streams against observed series.
    Eval {
        /// Extra forecast stream files to score alongside the predictions.
        #[arg(long = "stream")]
        streams: Vec<PathBuf>,
        /// Also score the observed series itself as a reference.
        #[arg(long)]
        truth: bool,
        #[arg(long, value_parser = parse_aggregation)]
        aggregation: Option<Aggregation>,
    },
    /// Fit the regional nowcast filter and score it with ROC skill.
    NowcastRoc,
}

fn parse_aggregation(s: &str) -> Result<Aggregation, String> {
    serde_json::from_value(json!(s)).map_err(|_| format!("unknown aggregation `{s}` (pooled, bin_averaged)"))
}

fn core_kind(e: &Error) -> &'static str {
    match e {
        Error::MissingColumn(_) => "missing_column",
        Error::InvalidRegion(_) => "invalid_region",
        Error::OutOfExtent { .. } => "out_of_extent",
        Error::NonFiniteMagnitude(_) => "non_finite_magnitude",
        Error::SpanTooShort { .. } => "span_too_short",
        Error::Degenerate(_) => "degenerate",
        Error::InvalidSplit(_) => "invalid_split",
        Error::InvalidFeatureSpec(_) => "invalid_feature_spec",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::ShapeMismatch(_) => "shape_mismatch",
        Error::NonFiniteGradient(_) => "non_finite_gradient",
        Error::EmptyNeighborhood(_) => "empty_neighborhood",
        Error::Diverged { .. } => "diverged",
        Error::CoverageGaps(_) => "coverage_gaps",
        Error::UndefinedSkill(_) => "undefined_skill",
        Error::Parse(_) => "parse",
        Error::Io { .. } => "io",
        Error::Csv(_) => "csv",
        Error::Json(_) => "json",
    }
}

/// Structured error for stderr plus the process exit code.
fn describe(err: &anyhow::Error) -> (serde_json::Value, u8) {
    let message = format!("{err:#}");
    if let Some(m) = err.downcast_ref::<MissingArtifact>() {
        let body = json!({
            "kind": "missing_artifact",
            "message": message,
            "path": m.path,
            "required_command": m.command,
        });
        return (body, 3);
    }
    if let Some(c) = err.downcast_ref::<ConfigError>() {
        return (json!({ "kind": "config", "message": message, "problems": c.0 }), 2);
    }
    if let Some(e) = err.chain().find_map(|c| c.downcast_ref::<Error>()) {
        let mut body = json!({ "kind": core_kind(e), "message": message });
        match e {
            Error::Diverged { epoch, trace } => {
                body["epoch"] = json!(epoch);
                body["loss_trace"] = json!(trace);
            }
            Error::CoverageGaps(gaps) => {
                body["missing"] = json!(gaps.len());
                body["gaps"] = json!(gaps.iter().take(100).collect::<Vec<_>>());
            }
            _ => {}
        }
        return (body, 1);
    }
    (json!({ "kind": "other", "message": message }), 1)
}

fn run(cli: Cli) -> anyhow::Result<serde_json::Value> {
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out,
    };
    let config = RunConfig::resolve(cli.config.as_deref(), &overrides).map_err(ConfigError)?;
    let stage = Stage::new(&config);
    let summary = match cli.command {
        Command::Ingest => stage.ingest()?,
        Command::Build => stage.build()?,
        Command::Features => stage.features()?,
        Command::Train { model } => stage.train(model.as_deref())?,
        Command::Predict { model, split } => stage.predict(model.as_deref(), split)?,
        Command::Eval {
            streams,
            truth,
            aggregation,
        } => stage.eval(&streams, truth, aggregation)?,
        Command::NowcastRoc => stage.nowcast_roc()?,
    };
    Ok(summary)
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("QUAKECAST_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| ConfigError(vec![format!("QUAKECAST_THREADS must be a positive integer, got `{v}`")]))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let body = json!({ "kind": "usage", "message": e.to_string().trim_end() });
            eprintln!("{}", json!({ "error": body }));
            return ExitCode::from(2);
        }
        Err(e) => e.exit(),
    };
    match init_threads().and_then(|_| run(cli)) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(err) => {
            let (body, code) = describe(&err);
            eprintln!("{}", json!({ "error": body }));
            ExitCode::from(code)
        }
    }
}
