use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::Task;

/// Poisson arrivals with normally distributed sizes and uniformly drawn weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub arrival_rate_per_s: f64,
    pub size_mean_bits: f64,
    pub size_std_bits: f64,
    pub weights: Vec<f64>,
    pub rng_seed: u64,
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        if !(self.arrival_rate_per_s.is_finite() && self.arrival_rate_per_s > 0.0) {
            return bad(format!("arrival_rate_per_s = {} must be positive", self.arrival_rate_per_s));
        }
        if !(self.size_mean_bits.is_finite() && self.size_mean_bits > 0.0) {
            return bad(format!("size_mean_bits = {} must be positive", self.size_mean_bits));
        }
        if !(self.size_std_bits.is_finite() && self.size_std_bits >= 0.0) {
            return bad(format!("size_std_bits = {} must be nonnegative", self.size_std_bits));
        }
        if self.weights.is_empty() {
            return bad("weight set is empty".into());
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return bad("weights must be finite and positive".into());
        }
        Ok(())
    }

    pub fn with_seed(&self, rng_seed: u64) -> Self {
        Self {
            rng_seed,
            ..self.clone()
        }
    }
}

/// Draws `count` tasks starting at time zero, ids `0..count`.
pub fn generate_arrivals(workload: &WorkloadConfig, count: usize) -> Result<Vec<Task>, SimError> {
    workload.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(workload.rng_seed);
    let gaps = Exp::new(workload.arrival_rate_per_s)
        .map_err(|e| SimError::Config(format!("arrival distribution: {e}")))?;
    let sizes = Normal::new(workload.size_mean_bits, workload.size_std_bits)
        .map_err(|e| SimError::Config(format!("size distribution: {e}")))?;

    let mut clock = 0.0;
    let mut tasks = Vec::with_capacity(count);
    for id in 0..count {
        clock += gaps.sample(&mut rng);
        let size_bits = sizes.sample(&mut rng).max(1.0);
        let weight = *workload.weights.choose(&mut rng).expect("nonempty weight set");
        let task = Task::new(id as u64, size_bits, weight, clock)
            .map_err(|e| SimError::Config(format!("generated task {id}: {e}")))?;
        tasks.push(task);
    }
    Ok(tasks)
}
