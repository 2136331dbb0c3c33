//! Closed-form delay model for a task offloaded from the base station to an
//! MEC server.
//!
//! A task's response time is its network delay (transmission, propagation and
//! waiting in the per-server communication queue) plus its computing delay
//! (execution and waiting in the server's computing queue). All functions are
//! pure and work in bits, bits/s, CPU cycles, cycles/s and seconds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid argument `{name}`: {value} ({reason})")]
    InvalidArgument {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("task {task_id} has no CPU allocation")]
    AllocationUnset { task_id: u64 },
}

pub type ModelResult<T> = Result<T, ModelError>;

fn invalid<F: Scalar, T>(name: &'static str, value: F, reason: &'static str) -> ModelResult<T> {
    Err(ModelError::InvalidArgument {
        name,
        value: value.as_f64(),
        reason,
    })
}

fn non_negative<F: Scalar>(name: &'static str, value: F) -> ModelResult<F> {
    if !value.is_finite() {
        return invalid(name, value, "must be finite");
    }
    if value < F::zero() {
        return invalid(name, value, "must be nonnegative");
    }
    Ok(value)
}

fn positive<F: Scalar>(name: &'static str, value: F) -> ModelResult<F> {
    if !value.is_finite() {
        return invalid(name, value, "must be finite");
    }
    if value <= F::zero() {
        return invalid(name, value, "must be positive");
    }
    Ok(value)
}

/// One offloadable job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task<F> {
    pub id: u64,
    pub size_bits: F,
    /// Priority; larger means the response time matters more.
    pub weight: F,
    pub arrival_time: F,
    /// CPU share granted by the offloading action, unset until decided.
    pub alloc_cycles_per_s: Option<F>,
}

impl<F: Scalar> Task<F> {
    pub fn new(id: u64, size_bits: F, weight: F, arrival_time: F) -> ModelResult<Self> {
        positive("size_bits", size_bits)?;
        positive("weight", weight)?;
        non_negative("arrival_time", arrival_time)?;
        Ok(Self {
            id,
            size_bits,
            weight,
            arrival_time,
            alloc_cycles_per_s: None,
        })
    }

    pub fn with_alloc(mut self, alloc_cycles_per_s: F) -> Self {
        self.alloc_cycles_per_s = Some(alloc_cycles_per_s);
        self
    }
}

/// Static description of one MEC server and its link from the base station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServerConfig<F> {
    pub id: usize,
    pub capacity_cycles_per_s: F,
    pub distance_km: F,
    pub link_bps: F,
}

impl<F: Scalar> ServerConfig<F> {
    pub fn new(id: usize, capacity_cycles_per_s: F, distance_km: F, link_bps: F) -> ModelResult<Self> {
        positive("capacity_cycles_per_s", capacity_cycles_per_s)?;
        non_negative("distance_km", distance_km)?;
        positive("link_bps", link_bps)?;
        Ok(Self {
            id,
            capacity_cycles_per_s,
            distance_km,
            link_bps,
        })
    }
}

/// Coefficients of the linear end-to-end delay and the bits-to-cycles map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayParams<F> {
    pub alpha_s_per_km: F,
    pub zeta_s: F,
    pub mu_cycles_per_bit: F,
}

impl<F: Scalar> DelayParams<F> {
    /// Accepts `mu = 0` so that a degenerate zero-intensity workload can be
    /// swept; execution times then vanish.
    pub fn new(alpha_s_per_km: F, zeta_s: F, mu_cycles_per_bit: F) -> ModelResult<Self> {
        non_negative("alpha_s_per_km", alpha_s_per_km)?;
        non_negative("zeta_s", zeta_s)?;
        non_negative("mu_cycles_per_bit", mu_cycles_per_bit)?;
        Ok(Self {
            alpha_s_per_km,
            zeta_s,
            mu_cycles_per_bit,
        })
    }
}

/// One entry of a computing queue: remaining size and the granted allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompEntry<F> {
    pub size_bits: F,
    pub alloc_cycles_per_s: F,
}

/// Queue contents ahead of a task on one server.
///
/// `comm_backlog_bits` counts bits still to be sent on the server's link
/// (including the untransmitted remainder of a transfer in progress).
/// `comp_backlog` lists computing work ahead of the task; an executing task
/// contributes its remaining bits.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueueSnapshot<F> {
    pub comm_backlog_bits: F,
    pub comp_backlog: Vec<CompEntry<F>>,
}

impl<F: Scalar> QueueSnapshot<F> {
    pub fn empty() -> Self {
        Self {
            comm_backlog_bits: F::zero(),
            comp_backlog: Vec::new(),
        }
    }
}

pub fn transmission_time<F: Scalar>(size_bits: F, link_bps: F) -> ModelResult<F> {
    let size_bits = non_negative("size_bits", size_bits)?;
    let link_bps = positive("link_bps", link_bps)?;
    Ok(size_bits / link_bps)
}

/// Propagation delay between the base station and a server `distance_km` away.
pub fn e2e_delay<F: Scalar>(distance_km: F, params: &DelayParams<F>) -> ModelResult<F> {
    let distance_km = non_negative("distance_km", distance_km)?;
    Ok(params.alpha_s_per_km * distance_km + params.zeta_s)
}

/// Time spent behind the bits already queued on a link.
pub fn comm_wait<F: Scalar>(comm_backlog_bits: F, link_bps: F) -> ModelResult<F> {
    let backlog = non_negative("comm_backlog_bits", comm_backlog_bits)?;
    let link_bps = positive("link_bps", link_bps)?;
    Ok(backlog / link_bps)
}

pub fn network_delay<F: Scalar>(
    task: &Task<F>,
    server: &ServerConfig<F>,
    snapshot: &QueueSnapshot<F>,
    params: &DelayParams<F>,
) -> ModelResult<F> {
    let trans = transmission_time(task.size_bits, server.link_bps)?;
    let e2e = e2e_delay(server.distance_km, params)?;
    let wait = comm_wait(snapshot.comm_backlog_bits, server.link_bps)?;
    Ok(trans + e2e + wait)
}

pub fn exec_time<F: Scalar>(size_bits: F, mu: F, alloc_cycles_per_s: F) -> ModelResult<F> {
    let size_bits = non_negative("size_bits", size_bits)?;
    let mu = non_negative("mu_cycles_per_bit", mu)?;
    let alloc = positive("alloc_cycles_per_s", alloc_cycles_per_s)?;
    Ok(mu * size_bits / alloc)
}

/// Sum of execution times of the work queued ahead.
pub fn comp_wait<F: Scalar>(backlog: &[CompEntry<F>], mu: F) -> ModelResult<F> {
    backlog.iter().try_fold(F::zero(), |acc, entry| {
        Ok(acc + exec_time(entry.size_bits, mu, entry.alloc_cycles_per_s)?)
    })
}

pub fn computing_delay<F: Scalar>(task: &Task<F>, snapshot: &QueueSnapshot<F>, mu: F) -> ModelResult<F> {
    let alloc = task
        .alloc_cycles_per_s
        .ok_or(ModelError::AllocationUnset { task_id: task.id })?;
    Ok(exec_time(task.size_bits, mu, alloc)? + comp_wait(&snapshot.comp_backlog, mu)?)
}

/// Priority-weighted response time, the per-task summand of the objective.
pub fn weighted_response<F: Scalar>(weight: F, net_delay: F, comp_delay: F) -> ModelResult<F> {
    let weight = non_negative("weight", weight)?;
    let net = non_negative("net_delay", net_delay)?;
    let comp = non_negative("comp_delay", comp_delay)?;
    Ok(weight * (net + comp))
}
