use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::runs::{aggregate, learning_summary, ClassAggregate, LearningSummary, PointEval, TrainedReplica};
use super::ExperimentError;

pub const TRAINING_COLUMNS: [&str; 4] = ["replica", "episode", "mean_reward", "mean_weighted_response_s"];
pub const COMPARISON_TASK_COLUMNS: [&str; 11] = [
    "replica",
    "seed",
    "lambda",
    "policy",
    "task_id",
    "weight",
    "server",
    "alloc_cycles_per_s",
    "t_net_s",
    "t_comp_s",
    "weighted_response_s",
];
pub const COMPARISON_SUMMARY_COLUMNS: [&str; 5] =
    ["policy", "lambda", "replicas", "mean_weighted_response_s", "std_weighted_response_s"];
pub const BREAKDOWN_COLUMNS: [&str; 8] = [
    "policy",
    "lambda",
    "weight",
    "tasks",
    "mean_net_s",
    "mean_comp_s",
    "mean_response_s",
    "std_response_s",
];
pub const SWEEP_COLUMNS: [&str; 6] = [
    "policy",
    "axis",
    "sweep_value",
    "replicas",
    "mean_weighted_response_s",
    "std_weighted_response_s",
];

/// Window for the learning-curve summary.
const LEARNING_WINDOW: usize = 50;

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    experiment: &'a str,
    config_hash: String,
    seeds: Vec<u64>,
    aggregates: T,
    config: &'a ExperimentConfig,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, ExperimentError> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn write_summary<T: Serialize>(
    dir: &Path,
    name: &str,
    experiment: &str,
    cfg: &ExperimentConfig,
    aggregates: T,
) -> Result<PathBuf, ExperimentError> {
    let path = dir.join(name);
    let mut out = BufWriter::new(File::create(&path)?);
    let summary = Summary {
        experiment,
        config_hash: cfg.hash(),
        seeds: cfg.seeds(),
        aggregates,
        config: cfg,
    };
    serde_json::to_writer_pretty(&mut out, &summary)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(path)
}

#[derive(Serialize)]
struct ReplicaLearning {
    replica: usize,
    seed: u64,
    episodes: usize,
    summary: Option<LearningSummary>,
}

/// `training.csv`, `training_summary.json` and one actor checkpoint per replica.
pub fn write_training(dir: &Path, cfg: &ExperimentConfig, trained: &[TrainedReplica]) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join("training.csv");
    let mut w = csv_writer(&csv_path)?;
    w.write_record(TRAINING_COLUMNS)?;
    for t in trained {
        for e in &t.curve {
            w.write_record([
                t.replica.to_string(),
                e.episode.to_string(),
                e.mean_reward.to_string(),
                e.mean_weighted_response_s.to_string(),
            ])?;
        }
    }
    w.flush()?;
    let mut paths = vec![csv_path];

    let learning: Vec<ReplicaLearning> = trained
        .iter()
        .map(|t| ReplicaLearning {
            replica: t.replica,
            seed: t.seed,
            episodes: t.curve.len(),
            summary: learning_summary(&t.curve, LEARNING_WINDOW),
        })
        .collect();
    paths.push(write_summary(dir, "training_summary.json", "train", cfg, learning)?);
    for t in trained {
        let path = dir.join(format!("actor_replica{}.json", t.replica));
        t.actor.save(&path)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Tab-separated per-episode log including wall-clock time. Because of the
/// timing column it is not reproducible and is only written on request.
pub fn write_training_log(path: &Path, trained: &[TrainedReplica]) -> Result<(), ExperimentError> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["replica", "episode", "mean_reward", "mean_weighted_response_s", "epsilon", "wallclock_s"])?;
    for t in trained {
        for (e, clock) in t.curve.iter().zip(&t.wallclock_s) {
            w.write_record([
                t.replica.to_string(),
                e.episode.to_string(),
                e.mean_reward.to_string(),
                e.mean_weighted_response_s.to_string(),
                e.epsilon.to_string(),
                format!("{clock:.6}"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `comparison_tasks.csv` (every evaluated task), `comparison_summary.csv`
/// and `comparison_summary.json`.
pub fn write_comparison(dir: &Path, cfg: &ExperimentConfig, evals: &[PointEval]) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir)?;
    let tasks_path = dir.join("comparison_tasks.csv");
    let mut w = csv_writer(&tasks_path)?;
    w.write_record(COMPARISON_TASK_COLUMNS)?;
    for e in evals {
        for r in &e.stats.records {
            w.write_record([
                e.replica.to_string(),
                e.seed.to_string(),
                e.lambda.to_string(),
                e.policy.name().to_string(),
                r.task_id.to_string(),
                r.weight.to_string(),
                r.server.to_string(),
                r.alloc_cycles_per_s.to_string(),
                r.t_net_s.to_string(),
                r.t_comp_s.to_string(),
                r.weighted_response.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let aggregates = aggregate(evals);
    let summary_path = dir.join("comparison_summary.csv");
    let mut w = csv_writer(&summary_path)?;
    w.write_record(COMPARISON_SUMMARY_COLUMNS)?;
    for a in &aggregates {
        w.write_record([
            a.policy.name().to_string(),
            a.lambda.to_string(),
            a.per_replica.len().to_string(),
            a.mean_weighted_response_s.to_string(),
            a.std_weighted_response_s.to_string(),
        ])?;
    }
    w.flush()?;
    let json = write_summary(dir, "comparison_summary.json", "compare", cfg, &aggregates)?;
    Ok(vec![tasks_path, summary_path, json])
}

/// `breakdown.csv` and `breakdown_summary.json`.
pub fn write_breakdown(dir: &Path, cfg: &ExperimentConfig, classes: &[ClassAggregate]) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir)?;
    let path = dir.join("breakdown.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(BREAKDOWN_COLUMNS)?;
    for c in classes {
        w.write_record([
            c.policy.name().to_string(),
            c.lambda.to_string(),
            c.weight.to_string(),
            c.tasks.to_string(),
            c.mean_net_s.to_string(),
            c.mean_comp_s.to_string(),
            c.mean_response_s.to_string(),
            c.std_response_s.to_string(),
        ])?;
    }
    w.flush()?;
    let json = write_summary(dir, "breakdown_summary.json", "breakdown", cfg, classes)?;
    Ok(vec![path, json])
}

/// `sweep.csv` and `sweep_summary.json`.
pub fn write_sensitivity(dir: &Path, cfg: &ExperimentConfig, evals: &[PointEval]) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir)?;
    let aggregates = aggregate(evals);
    let axis = cfg.experiment.sweep_axis.name();
    let path = dir.join("sweep.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(SWEEP_COLUMNS)?;
    for a in &aggregates {
        w.write_record([
            a.policy.name().to_string(),
            axis.to_string(),
            a.value.to_string(),
            a.per_replica.len().to_string(),
            a.mean_weighted_response_s.to_string(),
            a.std_weighted_response_s.to_string(),
        ])?;
    }
    w.flush()?;
    let json = write_summary(dir, "sweep_summary.json", "sweep", cfg, &aggregates)?;
    Ok(vec![path, json])
}
