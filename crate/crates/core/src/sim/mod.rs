//! Discrete-event simulation of one base station feeding K MEC servers.
//!
//! Each server has a FIFO communication queue on its link (one transfer at a
//! time, propagation overlapping the next transfer) and a FIFO computing queue
//! with head-of-line blocking over a finite CPU capacity.

mod engine;
mod workload;

use thiserror::Error;

use crate::model::ModelError;

pub use engine::{Event, EventKind, LinkState, ServerState, Simulator, TaskRecord, TraceRecord};
pub use workload::{generate_arrivals, WorkloadConfig};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid action for task {task_id}: {reason}")]
    InvalidAction { task_id: u64, reason: String },
    #[error("task {task_id} is awaiting an offloading decision")]
    DecisionPending { task_id: u64 },
    #[error("task {task_id} is not awaiting a decision")]
    NotPending { task_id: u64 },
    #[error("unknown task {0}")]
    UnknownTask(u64),
    #[error("duplicate task id {0}")]
    DuplicateTask(u64),
    #[error("task {task_id} arrives at {arrival_s} s, before the simulation clock {now_s} s")]
    ArrivalInPast { task_id: u64, arrival_s: f64, now_s: f64 },
    #[error("task {task_id} has not completed")]
    Incomplete { task_id: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("trace export failed: {0}")]
    Io(#[from] std::io::Error),
}
