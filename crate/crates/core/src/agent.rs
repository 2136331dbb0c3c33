//! Advantage actor-critic training and evaluation over the simulator.
//!
//! One episode is a fixed number of task arrivals starting from an empty
//! system. Every arrival is one decision; the transition's reward is the
//! negated weighted response time of the decided task, known once the task
//! completes. At the end of the episode the actor and then the critic take
//! one full-batch step on the episode's transitions.

use rand::distributions::WeightedIndex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::Policy;
use crate::mdp::{self, Action, ActionSpace, MdpState, NormalizationConfig, RewardMode, Transition};
use crate::neural::{Gradients, Head, NeuralError, Optimizer, OptimizerKind};
use crate::sim::{generate_arrivals, SimError, Simulator, TaskRecord, WorkloadConfig};
use crate::{Mlp, Task};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Mdp(#[from] mdp::MdpError),
    #[error("invalid agent configuration: {0}")]
    Config(String),
}

/// How transitions are chosen for an update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum UpdateMode {
    /// The episode just collected, then discarded.
    #[default]
    OnPolicy,
    /// Uniform sample from a FIFO buffer of past transitions.
    Replay { capacity: usize, batch: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub gamma: f64,
    pub beta_actor: f64,
    pub beta_critic: f64,
    pub epsilon: f64,
    pub episode_len: usize,
    pub episodes: usize,
    pub seed: u64,
    pub hidden_units: usize,
    pub clip_norm: f64,
    pub optimizer: OptimizerKind,
    pub reward_scale: f64,
    pub reward_mode: RewardMode,
    pub update_mode: UpdateMode,
    /// Bootstrap the last transition of an episode from the observation at
    /// the following arrival instead of treating the cut as terminal.
    pub bootstrap_truncation: bool,
    /// Weight each transition by π(a|s)/μ(a|s), where μ is the ε-greedy
    /// behaviour distribution that actually chose the action.
    pub importance_correction: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            beta_actor: 1e-4,
            beta_critic: 2e-4,
            epsilon: 0.1,
            episode_len: 64,
            episodes: 1000,
            seed: 0,
            hidden_units: 128,
            clip_norm: 1.0,
            optimizer: OptimizerKind::Sgd,
            reward_scale: 100.0,
            reward_mode: RewardMode::Measured,
            update_mode: UpdateMode::OnPolicy,
            bootstrap_truncation: false,
            importance_correction: false,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let fail = |m: String| Err(AgentError::Config(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail(format!("gamma = {} must be in [0, 1]", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return fail(format!("epsilon = {} must be in [0, 1]", self.epsilon));
        }
        if !(self.beta_actor > 0.0 && self.beta_critic > 0.0) {
            return fail("learning rates must be positive".into());
        }
        if self.episode_len == 0 || self.hidden_units == 0 {
            return fail("episode_len and hidden_units must be positive".into());
        }
        if !(self.clip_norm > 0.0) {
            return fail(format!("clip_norm = {} must be positive", self.clip_norm));
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            return fail(format!("reward_scale = {} must be positive", self.reward_scale));
        }
        if let UpdateMode::Replay { capacity, batch } = self.update_mode {
            if capacity == 0 || batch == 0 {
                return fail("replay capacity and batch must be positive".into());
            }
        }
        Ok(())
    }
}

/// Mixes `(base, stream, index)` into an independent 64-bit seed.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// With probability `epsilon` a uniformly random action index, otherwise a
/// sample from the actor's distribution.
pub fn select_action<R: Rng + ?Sized>(actor: &Mlp, x: &[f64], epsilon: f64, rng: &mut R) -> Result<usize, AgentError> {
    if rng.gen::<f64>() < epsilon {
        return Ok(rng.gen_range(0..actor.outputs()));
    }
    let probs = actor.forward_actor(x)?;
    let dist = WeightedIndex::new(&probs).map_err(|e| AgentError::Config(format!("policy distribution: {e}")))?;
    Ok(dist.sample(rng))
}

/// Most probable action; ties go to the lowest index.
pub fn greedy_action(actor: &Mlp, x: &[f64]) -> Result<usize, AgentError> {
    let probs = actor.forward_actor(x)?;
    let mut best = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = i;
        }
    }
    Ok(best)
}

/// One-step advantage `r + γ·V(s') − V(s)`; `V(s')` is zero at a terminal step.
pub fn advantage(reward: f64, v_next: f64, v_cur: f64, gamma: f64, terminal: bool) -> f64 {
    let bootstrap = if terminal { 0.0 } else { gamma * v_next };
    reward + bootstrap - v_cur
}

/// Simulator plus the workload and encoding the agent is trained on.
pub struct OffloadEnv {
    pub sim: Simulator,
    pub workload: WorkloadConfig,
    pub norms: NormalizationConfig,
}

impl OffloadEnv {
    pub fn new(sim: Simulator, workload: WorkloadConfig, norms: NormalizationConfig) -> Result<Self, AgentError> {
        workload.validate()?;
        norms.validate()?;
        Ok(Self { sim, workload, norms })
    }

    pub fn space(&self) -> &ActionSpace {
        self.sim.action_space()
    }

    pub fn state_dim(&self) -> usize {
        mdp::state_dim(self.space().num_servers())
    }

    /// A task stream of `count` arrivals drawn with `seed`.
    pub fn tasks(&self, count: usize, seed: u64) -> Result<Vec<Task>, AgentError> {
        Ok(generate_arrivals(&self.workload.with_seed(seed), count)?)
    }
}

/// Per-episode training summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub total_reward: f64,
    pub mean_reward: f64,
    pub mean_weighted_response_s: f64,
    pub epsilon: f64,
}

/// Mean delays of the tasks sharing one weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub weight: f64,
    pub count: usize,
    pub mean_net_s: f64,
    pub mean_comp_s: f64,
    pub mean_response_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalStats {
    pub records: Vec<TaskRecord>,
    pub mean_weighted_response: f64,
    pub classes: Vec<ClassStats>,
}

impl EvalStats {
    pub fn from_records(records: Vec<TaskRecord>) -> Self {
        let n = records.len();
        let mean_weighted_response = if n == 0 {
            0.0
        } else {
            records.iter().map(|r| r.weighted_response).sum::<f64>() / n as f64
        };
        let mut weights: Vec<f64> = records.iter().map(|r| r.weight).collect();
        weights.sort_by(f64::total_cmp);
        weights.dedup();
        let classes = weights
            .into_iter()
            .map(|w| {
                let members: Vec<&TaskRecord> = records.iter().filter(|r| r.weight == w).collect();
                let count = members.len();
                let mean = |f: fn(&TaskRecord) -> f64| members.iter().map(|r| f(r)).sum::<f64>() / count as f64;
                ClassStats {
                    weight: w,
                    count,
                    mean_net_s: mean(|r| r.t_net_s),
                    mean_comp_s: mean(|r| r.t_comp_s),
                    mean_response_s: mean(TaskRecord::response_s),
                }
            })
            .collect();
        Self {
            records,
            mean_weighted_response,
            classes,
        }
    }

    pub fn class(&self, weight: f64) -> Option<&ClassStats> {
        self.classes.iter().find(|c| c.weight == weight)
    }
}

/// The learned policy as a [`Policy`]: argmax of the actor by default, or
/// ε-greedy sampling when built with [`ActorPolicy::sampling`].
pub struct ActorPolicy<'a> {
    actor: &'a Mlp,
    norms: NormalizationConfig,
    space: ActionSpace,
    sampling: Option<(f64, ChaCha8Rng)>,
}

impl<'a> ActorPolicy<'a> {
    pub fn greedy(actor: &'a Mlp, norms: NormalizationConfig, space: ActionSpace) -> Self {
        Self {
            actor,
            norms,
            space,
            sampling: None,
        }
    }

    pub fn sampling(actor: &'a Mlp, norms: NormalizationConfig, space: ActionSpace, epsilon: f64, seed: u64) -> Self {
        Self {
            actor,
            norms,
            space,
            sampling: Some((epsilon, ChaCha8Rng::seed_from_u64(seed))),
        }
    }

    fn choose(&mut self, state: &MdpState) -> Result<Action, AgentError> {
        let x: Vec<f64> = mdp::encode(state, &self.norms);
        let index = match &mut self.sampling {
            None => greedy_action(self.actor, &x)?,
            Some((eps, rng)) => select_action(self.actor, &x, *eps, rng)?,
        };
        Ok(self.space.action_at(index)?)
    }
}

impl Policy for ActorPolicy<'_> {
    fn decide(&mut self, state: &MdpState) -> Action {
        self.choose(state)
            .expect("actor dimensions were checked against the action space")
    }

    fn name(&self) -> &str {
        "decent"
    }
}

/// Runs `policy` over `tasks` from an empty system.
pub fn evaluate_policy<P: Policy + ?Sized>(env: &mut OffloadEnv, policy: &mut P, tasks: &[Task]) -> Result<EvalStats, AgentError> {
    let records = env.sim.run(policy, tasks)?;
    Ok(EvalStats::from_records(records))
}

/// Rolls a trained actor over `tasks` with exploration switched off: each
/// action is drawn from the actor's distribution (ε = 0) using an RNG seeded
/// with `seed`, so repeated evaluations are identical.
pub fn evaluate(env: &mut OffloadEnv, actor: &Mlp, tasks: &[Task], seed: u64) -> Result<EvalStats, AgentError> {
    let mut policy = ActorPolicy::sampling(actor, env.norms, env.space().clone(), 0.0, seed);
    evaluate_policy(env, &mut policy, tasks)
}

/// Actor, critic and their optimizers.
pub struct Trainer {
    pub actor: Mlp,
    pub critic: Mlp,
    actor_opt: Optimizer<f64>,
    critic_opt: Optimizer<f64>,
    cfg: AgentConfig,
    rng: ChaCha8Rng,
    episodes_done: usize,
    replay: Vec<Transition>,
    replay_head: usize,
}

impl Trainer {
    pub fn new(cfg: AgentConfig, state_dim: usize, num_actions: usize) -> Result<Self, AgentError> {
        cfg.validate()?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1, 0));
        let actor = Mlp::new(state_dim, cfg.hidden_units, num_actions, Head::Softmax, &mut init_rng);
        let critic = Mlp::new(state_dim, cfg.hidden_units, 1, Head::Linear, &mut init_rng);
        Ok(Self::with_networks(cfg, actor, critic))
    }

    pub fn with_networks(cfg: AgentConfig, actor: Mlp, critic: Mlp) -> Self {
        Self {
            actor_opt: Optimizer::new(cfg.optimizer, &actor),
            critic_opt: Optimizer::new(cfg.optimizer, &critic),
            actor,
            critic,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 2, 0)),
            cfg,
            episodes_done: 0,
            replay: Vec::new(),
            replay_head: 0,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    /// Collects one episode with the ε-greedy actor and updates both networks.
    pub fn train_episode(&mut self, env: &mut OffloadEnv) -> Result<EpisodeStats, AgentError> {
        let episode = self.episodes_done;
        let count = self.cfg.episode_len + usize::from(self.cfg.bootstrap_truncation);
        let tasks = env.tasks(count, derive_seed(self.cfg.seed, 3, episode as u64))?;
        let (transitions, records) = self.collect(env, &tasks)?;

        let total_reward: f64 = transitions.iter().map(|t| t.reward).sum();
        let n = transitions.len().max(1) as f64;
        let mean_wr = records.iter().map(|r| r.weighted_response).sum::<f64>() / n;

        match self.cfg.update_mode {
            UpdateMode::OnPolicy => self.update(&transitions, &env.norms)?,
            UpdateMode::Replay { capacity, batch } => {
                for t in transitions {
                    if self.replay.len() < capacity {
                        self.replay.push(t);
                    } else {
                        self.replay[self.replay_head] = t;
                        self.replay_head = (self.replay_head + 1) % capacity;
                    }
                }
                let sample: Vec<Transition> = self
                    .replay
                    .choose_multiple(&mut self.rng, batch.min(self.replay.len()))
                    .cloned()
                    .collect();
                self.update(&sample, &env.norms)?;
            }
        }
        self.episodes_done += 1;
        Ok(EpisodeStats {
            episode,
            total_reward,
            mean_reward: total_reward / n,
            mean_weighted_response_s: mean_wr,
            epsilon: self.cfg.epsilon,
        })
    }

    /// Trains for `cfg.episodes` episodes, reporting each to `on_episode`.
    pub fn train<C: FnMut(&EpisodeStats)>(&mut self, env: &mut OffloadEnv, mut on_episode: C) -> Result<Vec<EpisodeStats>, AgentError> {
        let mut stats = Vec::with_capacity(self.cfg.episodes);
        for _ in 0..self.cfg.episodes {
            let s = self.train_episode(env)?;
            on_episode(&s);
            stats.push(s);
        }
        Ok(stats)
    }

    /// Rolls the ε-greedy actor over `tasks` and turns the completed run into
    /// chained transitions.
    fn collect(&mut self, env: &mut OffloadEnv, tasks: &[Task]) -> Result<(Vec<Transition>, Vec<TaskRecord>), AgentError> {
        env.sim.reset();
        env.sim.load(tasks)?;
        let mut decisions: Vec<(MdpState, usize, u64)> = Vec::with_capacity(tasks.len());
        while let Some(task_id) = env.sim.next_arrival()? {
            let state = env.sim.observe(task_id)?;
            let x: Vec<f64> = mdp::encode(&state, &env.norms);
            let index = select_action(&self.actor, &x, self.cfg.epsilon, &mut self.rng)?;
            env.sim.submit(task_id, env.space().action_at(index)?)?;
            decisions.push((state, index, task_id));
        }
        let mut lookahead = None;
        if decisions.len() > self.cfg.episode_len {
            // The extra arrival only supplies the bootstrap observation; being
            // later in every FIFO queue, it cannot delay the episode's tasks.
            lookahead = decisions.pop().map(|(s, _, _)| s);
        }
        let records = decisions
            .iter()
            .map(|(_, _, id)| env.sim.record(*id))
            .collect::<Result<Vec<_>, _>>()?;

        let mut transitions = Vec::with_capacity(decisions.len());
        let mut iter = decisions.into_iter().zip(&records).peekable();
        while let Some(((state, action_index, _), rec)) = iter.next() {
            let (t_net, t_comp) = match self.cfg.reward_mode {
                RewardMode::Measured => (rec.t_net_s, rec.t_comp_s),
                RewardMode::Analytic => (rec.estimated_net_s, rec.estimated_comp_s),
            };
            let next_state = match iter.peek() {
                Some(((s, _, _), _)) => Some(s.clone()),
                None => lookahead.take(),
            };
            transitions.push(Transition {
                state,
                action_index,
                reward: mdp::reward(rec.weight, t_net, t_comp, self.cfg.reward_scale),
                next_state,
            });
        }
        Ok((transitions, records))
    }

    /// One actor step on the mean policy-gradient loss, then one critic step
    /// on the mean squared TD error. Advantages use the critic as it was
    /// before this update.
    pub fn update(&mut self, transitions: &[Transition], norms: &NormalizationConfig) -> Result<(), AgentError> {
        if transitions.is_empty() {
            return Ok(());
        }
        let gamma = self.cfg.gamma;
        let mut actor_grad = Gradients::zeros_like(&self.actor);
        let mut critic_grad = Gradients::zeros_like(&self.critic);
        for t in transitions {
            let x: Vec<f64> = mdp::encode(&t.state, norms);
            let critic_fwd = self.critic.forward(&x)?;
            let v_cur = critic_fwd.output[0];
            let v_next = match &t.next_state {
                Some(next) => self.critic.forward_critic(&mdp::encode::<f64>(next, norms))?,
                None => 0.0,
            };
            let terminal = t.next_state.is_none();
            let adv = advantage(t.reward, v_next, v_cur, gamma, terminal);
            let actor_fwd = self.actor.forward(&x)?;
            let rho = if self.cfg.importance_correction {
                let pi = actor_fwd.probs[t.action_index];
                pi / ((1.0 - self.cfg.epsilon) * pi + self.cfg.epsilon / actor_fwd.probs.len() as f64)
            } else {
                1.0
            };
            actor_grad.add_assign(&self.actor.backward_policy(&actor_fwd, t.action_index, rho * adv)?);
            let target = adv + v_cur;
            let mut g = self.critic.backward_value(&critic_fwd, target)?;
            g.scale(rho);
            critic_grad.add_assign(&g);
        }
        let inv_n = 1.0 / transitions.len() as f64;
        actor_grad.scale(inv_n);
        critic_grad.scale(inv_n);
        self.actor_opt
            .step(&mut self.actor, &actor_grad, self.cfg.beta_actor, self.cfg.clip_norm)?;
        self.critic_opt
            .step(&mut self.critic, &critic_grad, self.cfg.beta_critic, self.cfg.clip_norm)?;
        Ok(())
    }

}
