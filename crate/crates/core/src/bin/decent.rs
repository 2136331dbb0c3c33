use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use mec_offload::experiments::{self, ExperimentConfig};

/// Train and evaluate the actor-critic offloading scheduler against the
/// nearest-server and largest-server baselines.
#[derive(Debug, Parser)]
#[command(name = "decent", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learning curves: training.csv, training_summary.json, actor checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
        /// Also write a tab-separated per-episode log with wall-clock times.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Policy comparison per arrival rate: comparison_tasks.csv, comparison_summary.{csv,json}.
    Compare(Common),
    /// Sensitivity over the configured sweep axis: sweep.csv, sweep_summary.json.
    Sweep(Common),
    /// Delays per weight class: breakdown.csv, breakdown_summary.json.
    Breakdown(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Base seed; replica r uses seed + r. Overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of replicas. Overrides the configuration.
    #[arg(long)]
    replicas: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.experiment.seed = seed;
        }
        if let Some(replicas) = self.replicas {
            cfg.experiment.replicas = replicas;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, log } => {
            let cfg = common.load()?;
            let trained = experiments::run_training(&cfg).context("training failed")?;
            report(&experiments::write_training(&common.out, &cfg, &trained)?);
            if let Some(path) = log {
                experiments::write_training_log(&path, &trained)
                    .with_context(|| format!("writing {}", Path::new(&path).display()))?;
                println!("wrote {}", path.display());
            }
        }
        Command::Compare(common) => {
            let cfg = common.load()?;
            let evals = experiments::run_comparison(&cfg).context("comparison failed")?;
            report(&experiments::write_comparison(&common.out, &cfg, &evals)?);
        }
        Command::Sweep(common) => {
            let cfg = common.load()?;
            let evals = experiments::run_sensitivity(&cfg).context("sweep failed")?;
            report(&experiments::write_sensitivity(&common.out, &cfg, &evals)?);
        }
        Command::Breakdown(common) => {
            let cfg = common.load()?;
            let classes = experiments::run_weight_breakdown(&cfg).context("breakdown failed")?;
            report(&experiments::write_breakdown(&common.out, &cfg, &classes)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
