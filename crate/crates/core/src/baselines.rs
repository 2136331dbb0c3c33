//! Policy interface and the greedy comparison policies.
//!
//! Neither baseline chooses a CPU share on its own, so both request the
//! largest resource block and wait in the computing queue when it is busy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mdp::{Action, ActionSpace, MdpState};
use crate::model;
use crate::{DelayParams, ServerConfig};

/// Maps the observation at a task's arrival to an offloading action.
pub trait Policy {
    fn decide(&mut self, state: &MdpState) -> Action;

    fn name(&self) -> &str;
}

impl<P: Policy + ?Sized> Policy for &mut P {
    fn decide(&mut self, state: &MdpState) -> Action {
        (**self).decide(state)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

/// Index of the first maximum; NaN entries never win.
fn first_argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Always offloads to the server with the lowest end-to-end delay.
#[derive(Debug, Clone)]
pub struct NearestServer {
    action: Action,
}

impl NearestServer {
    pub fn new(servers: &[ServerConfig], params: &DelayParams, space: &ActionSpace) -> Result<Self, model::ModelError> {
        let mut delays = Vec::with_capacity(servers.len());
        for s in servers {
            delays.push(model::e2e_delay(s.distance_km, params)?);
        }
        let server = first_argmax(delays.iter().map(|d| -d));
        let action = space
            .action(server, space.largest_block_rank())
            .expect("server index within action space");
        Ok(Self { action })
    }

    pub fn server(&self) -> usize {
        self.action.server
    }
}

impl Policy for NearestServer {
    fn decide(&mut self, _state: &MdpState) -> Action {
        self.action
    }

    fn name(&self) -> &str {
        "nearest"
    }
}

/// Offloads to the server with the most unallocated CPU.
#[derive(Debug, Clone)]
pub struct LargestServer {
    space: ActionSpace,
}

impl LargestServer {
    pub fn new(space: &ActionSpace) -> Self {
        Self { space: space.clone() }
    }
}

impl Policy for LargestServer {
    fn decide(&mut self, state: &MdpState) -> Action {
        let server = first_argmax(state.free_cycles.iter().copied());
        self.space
            .action(server, self.space.largest_block_rank())
            .expect("server index within action space")
    }

    fn name(&self) -> &str {
        "largest"
    }
}

/// Uniformly random actions; only used for smoke tests.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    space: ActionSpace,
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(space: &ActionSpace, seed: u64) -> Self {
        Self {
            space: space.clone(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for RandomPolicy {
    fn decide(&mut self, _state: &MdpState) -> Action {
        let index = self.rng.gen_range(0..self.space.len());
        self.space.action_at(index).expect("index drawn within range")
    }

    fn name(&self) -> &str {
        "random"
    }
}
