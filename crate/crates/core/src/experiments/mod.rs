//! Experiment driver: configuration files, training and evaluation runs over
//! replicas and sweep points, and the CSV/JSON tables they produce.
//!
//! Every replica owns its simulator, networks and RNG streams, all derived
//! from the replica seed, so a table regenerated from the same configuration
//! is byte-identical.

mod config;
mod output;
mod runs;

use thiserror::Error;

pub use config::{
    AgentSection, DelaySection, ExperimentConfig, ExperimentSection, ResourcesSection, ServersSection, SweepAxis,
    WorkloadSection,
};
pub use output::{
    write_breakdown, write_comparison, write_sensitivity, write_training, write_training_log, BREAKDOWN_COLUMNS,
    COMPARISON_SUMMARY_COLUMNS, COMPARISON_TASK_COLUMNS, SWEEP_COLUMNS, TRAINING_COLUMNS,
};
pub use runs::{
    aggregate, build_env, class_breakdown, evaluate_grid, learning_summary, run_comparison, run_sensitivity, run_training,
    run_weight_breakdown, train_replica, train_replicas, Aggregate, ClassAggregate, LearningSummary, PointEval, PolicyKind,
    SweepPoint, TrainedReplica,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Mdp(#[from] crate::mdp::MdpError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error(transparent)]
    Agent(#[from] crate::agent::AgentError),
    #[error(transparent)]
    Neural(#[from] crate::neural::NeuralError),
    #[error("writing results: {0}")]
    Io(#[from] std::io::Error),
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("writing JSON: {0}")]
    Json(#[from] serde_json::Error),
}
