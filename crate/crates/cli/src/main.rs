use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use climate_narrative::classify::{BackendKind, MODEL_DIR_ENV};
use climate_narrative::pipeline::{Pipeline, PipelineConfig, Stage, StageOutcome};

/// Climate narrative pipeline: paragraphs to report labels, firm joins,
/// statistics, clusters and reports.
#[derive(Debug, Parser)]
#[command(name = "climate-narrative", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Pipeline config (TOML). Relative paths inside it resolve against its directory.
    #[arg(short, long, default_value = "pipeline.toml")]
    config: PathBuf,
    /// Worker threads, 0 for all cores. Overrides the config.
    #[arg(short, long)]
    workers: Option<usize>,
    /// Output directory. Overrides the config.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    /// Classifier backend. Overrides the config.
    #[arg(long, value_parser = parse_backend)]
    backend: Option<BackendKind>,
    /// Directory with `<axis>.onnx` models for the graph_runtime backend.
    #[arg(long, env = MODEL_DIR_ENV)]
    model_dir: Option<PathBuf>,
    /// Master seed for clustering. Overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    match s {
        "stub" => Ok(BackendKind::Stub),
        "fixture" => Ok(BackendKind::Fixture),
        "graph_runtime" | "onnx" => Ok(BackendKind::GraphRuntime),
        other => Err(format!(
            "unknown backend `{other}` (stub, fixture, graph_runtime)"
        )),
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the config and every referenced input without running anything.
    Validate(Common),
    /// Extract, segment and keyword-filter the documents.
    Ingest(Common),
    /// Label climate paragraphs on the four axes.
    Classify(Common),
    /// Turn paragraph labels into report-level labels per firm.
    Aggregate(Common),
    /// Join report labels with firm data and assign size and emission classes.
    Join(Common),
    /// Correlations, distributions and cross-tabulations.
    Stats(Common),
    /// KMeans, elbow scan, GMM with BIC selection and PCA.
    Cluster(Common),
    /// Render tables, figures and the run manifest.
    Report(Common),
    /// Run every stage in order; unchanged stages are skipped.
    RunAll(Common),
}

fn load_config(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&c.config)?;
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    if let Some(dir) = &c.output_dir {
        cfg.output_dir = std::env::current_dir()?.join(dir);
    }
    if let Some(kind) = c.backend {
        cfg.backend.kind = kind;
    }
    if let Some(dir) = &c.model_dir {
        if cfg.backend.model_dir.is_none() {
            cfg.backend.model_dir = Some(std::env::current_dir()?.join(dir));
        }
    }
    if let Some(seed) = c.seed {
        cfg.cluster.seed = seed;
    }
    Ok(cfg)
}

fn print_outcome(o: &StageOutcome) {
    let status = if o.cached { "cached" } else { "ran" };
    println!(
        "{:<10} {status:<7} {} outputs",
        o.stage.name(),
        o.outputs.len()
    );
}

fn run(cli: Cli) -> Result<()> {
    let (common, stage) = match &cli.command {
        Command::Validate(c) => {
            load_config(c)?.validate().context("validation failed")?;
            println!("config {} is valid", c.config.display());
            return Ok(());
        }
        Command::RunAll(c) => {
            let pipeline = Pipeline::new(load_config(c)?);
            for o in pipeline.run_all()? {
                print_outcome(&o);
            }
            return Ok(());
        }
        Command::Ingest(c) => (c, Stage::Ingest),
        Command::Classify(c) => (c, Stage::Classify),
        Command::Aggregate(c) => (c, Stage::Aggregate),
        Command::Join(c) => (c, Stage::Join),
        Command::Stats(c) => (c, Stage::Stats),
        Command::Cluster(c) => (c, Stage::Cluster),
        Command::Report(c) => (c, Stage::Report),
    };
    let pipeline = Pipeline::new(load_config(common)?);
    print_outcome(&pipeline.run_stage(stage)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
