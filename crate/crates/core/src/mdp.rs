//! Observation, action and reward definitions shared by the simulator and
//! the learner.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("server index {server} out of range for {num_servers} servers")]
    ServerOutOfRange { server: usize, num_servers: usize },
    #[error("resource block rank {rank} out of range for {num_blocks} blocks")]
    BlockOutOfRange { rank: usize, num_blocks: usize },
    #[error("action index {index} out of range for {num_actions} actions")]
    ActionOutOfRange { index: usize, num_actions: usize },
    #[error("invalid action space: {0}")]
    InvalidSpace(String),
    #[error("invalid normalization: {0}")]
    InvalidNorms(String),
}

/// System observation at the arrival of a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpState {
    pub weight: f64,
    pub size_bits: f64,
    /// Unallocated CPU per server, cycles/s.
    pub free_cycles: Vec<f64>,
    /// Work waiting in each computing queue (not yet started), cycles.
    pub queued_cycles: Vec<f64>,
    /// Time until each server's link has sent everything queued on it, s.
    pub comm_wait_s: Vec<f64>,
}

impl MdpState {
    pub fn num_servers(&self) -> usize {
        self.free_cycles.len()
    }

    /// Length of the flattened observation, `2 + 3K`.
    pub fn dim(&self) -> usize {
        2 + 3 * self.num_servers()
    }

    pub fn idle(weight: f64, size_bits: f64, capacities: &[f64]) -> Self {
        let k = capacities.len();
        Self {
            weight,
            size_bits,
            free_cycles: capacities.to_vec(),
            queued_cycles: vec![0.0; k],
            comm_wait_s: vec![0.0; k],
        }
    }
}

pub fn state_dim(num_servers: usize) -> usize {
    2 + 3 * num_servers
}

/// A joint choice of destination server and CPU block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub server: usize,
    pub block_rank: usize,
    pub alloc_cycles_per_s: f64,
}

/// The discrete joint action set: every (server, resource block) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    num_servers: usize,
    /// Nonzero CPU blocks in ascending order, cycles/s.
    blocks: Vec<f64>,
}

impl ActionSpace {
    pub fn new(num_servers: usize, blocks: &[f64]) -> Result<Self, MdpError> {
        if num_servers == 0 {
            return Err(MdpError::InvalidSpace("no servers".into()));
        }
        if blocks.is_empty() {
            return Err(MdpError::InvalidSpace("no resource blocks".into()));
        }
        if blocks.iter().any(|b| !b.is_finite() || *b <= 0.0) {
            return Err(MdpError::InvalidSpace(
                "resource blocks must be finite and positive".into(),
            ));
        }
        let mut blocks = blocks.to_vec();
        blocks.sort_by(f64::total_cmp);
        if blocks.windows(2).any(|w| w[0] == w[1]) {
            return Err(MdpError::InvalidSpace("duplicate resource block".into()));
        }
        Ok(Self { num_servers, blocks })
    }

    pub fn num_servers(&self) -> usize {
        self.num_servers
    }

    pub fn blocks(&self) -> &[f64] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn len(&self) -> usize {
        self.num_servers * self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn largest_block_rank(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn index(&self, server: usize, block_rank: usize) -> Result<usize, MdpError> {
        if server >= self.num_servers {
            return Err(MdpError::ServerOutOfRange {
                server,
                num_servers: self.num_servers,
            });
        }
        if block_rank >= self.blocks.len() {
            return Err(MdpError::BlockOutOfRange {
                rank: block_rank,
                num_blocks: self.blocks.len(),
            });
        }
        Ok(server * self.blocks.len() + block_rank)
    }

    /// Inverse of [`ActionSpace::index`].
    pub fn pair(&self, index: usize) -> Result<(usize, usize), MdpError> {
        if index >= self.len() {
            return Err(MdpError::ActionOutOfRange {
                index,
                num_actions: self.len(),
            });
        }
        Ok((index / self.blocks.len(), index % self.blocks.len()))
    }

    pub fn action(&self, server: usize, block_rank: usize) -> Result<Action, MdpError> {
        self.index(server, block_rank)?;
        Ok(Action {
            server,
            block_rank,
            alloc_cycles_per_s: self.blocks[block_rank],
        })
    }

    pub fn action_at(&self, index: usize) -> Result<Action, MdpError> {
        let (server, rank) = self.pair(index)?;
        self.action(server, rank)
    }

    pub fn index_of(&self, action: &Action) -> Result<usize, MdpError> {
        self.index(action.server, action.block_rank)
    }
}

/// Per-group divisors applied before the observation enters a network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationConfig {
    pub weight_scale: f64,
    pub size_scale_bits: f64,
    /// Divisor for free capacity (cycles/s).
    pub cycles_scale: f64,
    /// Divisor for queued work (cycles).
    pub queued_cycles_scale: f64,
    pub wait_scale_s: f64,
}

impl NormalizationConfig {
    pub fn validate(&self) -> Result<(), MdpError> {
        let scales = [
            ("weight_scale", self.weight_scale),
            ("size_scale_bits", self.size_scale_bits),
            ("cycles_scale", self.cycles_scale),
            ("queued_cycles_scale", self.queued_cycles_scale),
            ("wait_scale_s", self.wait_scale_s),
        ];
        for (name, v) in scales {
            if !(v.is_finite() && v > 0.0) {
                return Err(MdpError::InvalidNorms(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// Flattens and scales a state into `[η, l, C.., D.., B..]`.
pub fn encode<F: Scalar>(state: &MdpState, norms: &NormalizationConfig) -> Vec<F> {
    let mut out = Vec::with_capacity(state.dim());
    out.push(F::lit(state.weight / norms.weight_scale));
    out.push(F::lit(state.size_bits / norms.size_scale_bits));
    out.extend(state.free_cycles.iter().map(|c| F::lit(c / norms.cycles_scale)));
    out.extend(state.queued_cycles.iter().map(|d| F::lit(d / norms.queued_cycles_scale)));
    out.extend(state.comm_wait_s.iter().map(|b| F::lit(b / norms.wait_scale_s)));
    out
}

/// Negated, scaled weighted response time of one task.
pub fn reward(weight: f64, t_net: f64, t_comp: f64, scale: f64) -> f64 {
    -weight * (t_net + t_comp) / scale
}

/// Which delays a transition's reward is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Delays measured by the simulator once the task completes.
    #[default]
    Measured,
    /// Closed-form estimate from the queue contents at decision time.
    Analytic,
}

/// `(s_i, a_i, r_i, s_{i+1})`; `next_state` is `None` at the end of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: MdpState,
    pub action_index: usize,
    pub reward: f64,
    pub next_state: Option<MdpState>,
}
