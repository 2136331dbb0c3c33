use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentError;
use crate::agent::{AgentConfig, UpdateMode};
use crate::mdp::{ActionSpace, NormalizationConfig, RewardMode};
use crate::neural::OptimizerKind;
use crate::sim::WorkloadConfig;
use crate::{DelayParams, ServerConfig};

/// Servers are listed in index order; all three lists have one entry per server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServersSection {
    pub distances_km: Vec<f64>,
    pub capacities_cycles_per_s: Vec<f64>,
    pub link_bps: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySection {
    pub alpha_s_per_km: f64,
    pub zeta_s: f64,
    pub mu_cycles_per_bit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourcesSection {
    pub blocks_cycles_per_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSection {
    pub arrival_rate_per_s: f64,
    pub size_mean_bits: f64,
    pub size_std_bits: f64,
    pub weights: Vec<f64>,
}

/// Learner settings. The seed is not part of the file; every replica gets
/// its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub gamma: f64,
    pub beta_actor: f64,
    pub beta_critic: f64,
    pub epsilon: f64,
    pub episode_len: usize,
    /// Episodes for the `train` learning curve.
    pub episodes: usize,
    pub hidden_units: usize,
    pub clip_norm: f64,
    pub optimizer: OptimizerKind,
    pub reward_scale: f64,
    pub reward_mode: RewardMode,
    pub update_mode: UpdateMode,
    pub bootstrap_truncation: bool,
    pub importance_correction: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    None,
    Lambda,
    Mu,
    Alpha,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Lambda => "lambda",
            Self::Mu => "mu",
            Self::Alpha => "alpha",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub sweep_axis: SweepAxis,
    pub sweep_values: Vec<f64>,
    /// Tasks per evaluation run.
    pub eval_tasks: usize,
    /// Episodes used to train the policy that `compare`, `sweep` and
    /// `breakdown` evaluate.
    pub policy_train_episodes: usize,
    /// Train a fresh policy at every sweep point instead of reusing the one
    /// trained at the base configuration.
    pub retrain_per_point: bool,
    pub replicas: usize,
    /// Replica `r` uses seed `seed + r`.
    pub seed: u64,
}

/// Everything one experiment run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub servers: ServersSection,
    pub delay: DelaySection,
    pub resources: ResourcesSection,
    pub workload: WorkloadSection,
    pub normalization: NormalizationConfig,
    pub agent: AgentSection,
    pub experiment: ExperimentSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            servers: ServersSection {
                distances_km: vec![0.0, 1.0, 2.0, 3.0],
                capacities_cycles_per_s: vec![2e8; 4],
                link_bps: vec![2e9; 4],
            },
            delay: DelaySection {
                alpha_s_per_km: 0.03,
                zeta_s: 0.03,
                mu_cycles_per_bit: 0.15,
            },
            resources: ResourcesSection {
                blocks_cycles_per_s: [10.0, 20.0, 40.0, 60.0, 80.0, 100.0, 120.0, 140.0, 160.0, 200.0]
                    .iter()
                    .map(|m| m * 1e6)
                    .collect(),
            },
            workload: WorkloadSection {
                arrival_rate_per_s: 50.0,
                size_mean_bits: 3e7,
                size_std_bits: 3e5,
                weights: vec![10.0, 20.0, 50.0, 100.0],
            },
            normalization: NormalizationConfig {
                weight_scale: 100.0,
                size_scale_bits: 3e7,
                cycles_scale: 2e8,
                queued_cycles_scale: 4.5e6,
                wait_scale_s: 0.1,
            },
            agent: AgentSection {
                gamma: 0.0,
                beta_actor: 1e-4,
                beta_critic: 2e-4,
                epsilon: 0.1,
                episode_len: 64,
                episodes: 1000,
                hidden_units: 128,
                clip_norm: 1.0,
                optimizer: OptimizerKind::Adam,
                reward_scale: 100.0,
                reward_mode: RewardMode::Analytic,
                update_mode: UpdateMode::OnPolicy,
                bootstrap_truncation: false,
                importance_correction: true,
            },
            experiment: ExperimentSection {
                sweep_axis: SweepAxis::None,
                sweep_values: Vec::new(),
                eval_tasks: 6400,
                policy_train_episodes: 16000,
                retrain_per_point: false,
                replicas: 5,
                seed: 1,
            },
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            ExperimentError::Config(m) => ExperimentError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Checks every section by building the objects it describes.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        let k = self.servers.distances_km.len();
        if k == 0 {
            return bad("at least one server is required".into());
        }
        if self.servers.capacities_cycles_per_s.len() != k || self.servers.link_bps.len() != k {
            return bad("servers: distances_km, capacities_cycles_per_s and link_bps must have equal length".into());
        }
        self.servers()?;
        self.delay_params(&self.delay)?;
        self.action_space()?;
        self.workload(self.workload.arrival_rate_per_s, 0).validate()?;
        self.normalization.validate()?;
        self.agent_config(0, self.agent.episodes).validate()?;
        let e = &self.experiment;
        if e.eval_tasks == 0 {
            return bad("experiment.eval_tasks must be positive".into());
        }
        if e.replicas == 0 {
            return bad("experiment.replicas must be positive".into());
        }
        if e.sweep_axis == SweepAxis::None && !e.sweep_values.is_empty() {
            return bad("experiment.sweep_values given but sweep_axis is \"none\"".into());
        }
        for &v in &e.sweep_values {
            let mut point = self.delay;
            match e.sweep_axis {
                SweepAxis::Lambda => self.workload(v, 0).validate()?,
                SweepAxis::Mu => {
                    point.mu_cycles_per_bit = v;
                    self.delay_params(&point)?;
                }
                SweepAxis::Alpha => {
                    point.alpha_s_per_km = v;
                    self.delay_params(&point)?;
                }
                SweepAxis::None => {}
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes to JSON");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.experiment.replicas as u64)
            .map(|r| self.experiment.seed.wrapping_add(r))
            .collect()
    }

    pub(crate) fn servers(&self) -> Result<Vec<ServerConfig>, ExperimentError> {
        let s = &self.servers;
        (0..s.distances_km.len())
            .map(|k| Ok(ServerConfig::new(k, s.capacities_cycles_per_s[k], s.distances_km[k], s.link_bps[k])?))
            .collect()
    }

    pub(crate) fn delay_params(&self, d: &DelaySection) -> Result<DelayParams, ExperimentError> {
        Ok(DelayParams::new(d.alpha_s_per_km, d.zeta_s, d.mu_cycles_per_bit)?)
    }

    pub(crate) fn action_space(&self) -> Result<ActionSpace, ExperimentError> {
        Ok(ActionSpace::new(self.servers.distances_km.len(), &self.resources.blocks_cycles_per_s)?)
    }

    pub(crate) fn workload(&self, arrival_rate_per_s: f64, rng_seed: u64) -> WorkloadConfig {
        WorkloadConfig {
            arrival_rate_per_s,
            size_mean_bits: self.workload.size_mean_bits,
            size_std_bits: self.workload.size_std_bits,
            weights: self.workload.weights.clone(),
            rng_seed,
        }
    }

    pub(crate) fn agent_config(&self, seed: u64, episodes: usize) -> AgentConfig {
        let a = &self.agent;
        AgentConfig {
            gamma: a.gamma,
            beta_actor: a.beta_actor,
            beta_critic: a.beta_critic,
            epsilon: a.epsilon,
            episode_len: a.episode_len,
            episodes,
            seed,
            hidden_units: a.hidden_units,
            clip_norm: a.clip_norm,
            optimizer: a.optimizer,
            reward_scale: a.reward_scale,
            reward_mode: a.reward_mode,
            update_mode: a.update_mode,
            bootstrap_truncation: a.bootstrap_truncation,
            importance_correction: a.importance_correction,
        }
    }
}
