use std::thread;
use std::time::Instant;

use serde::Serialize;

use super::config::{DelaySection, ExperimentConfig, SweepAxis};
use super::ExperimentError;
use crate::agent::{derive_seed, evaluate, evaluate_policy, EpisodeStats, EvalStats, OffloadEnv, Trainer};
use crate::baselines::{LargestServer, NearestServer};
use crate::sim::Simulator;
use crate::Mlp;

// Seed streams derived from a replica seed. Training episodes use stream 3
// inside the trainer.
const EVAL_TASKS_STREAM: u64 = 4;
const EVAL_SAMPLING_STREAM: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Decent,
    Nearest,
    Largest,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [Self::Decent, Self::Nearest, Self::Largest];

    pub fn name(self) -> &'static str {
        match self {
            Self::Decent => "decent",
            Self::Nearest => "nearest",
            Self::Largest => "largest",
        }
    }
}

/// System parameters at one sweep point. `value` is the swept quantity
/// (the arrival rate when nothing is swept).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub lambda: f64,
    pub delay: DelaySection,
}

impl SweepPoint {
    pub fn base(cfg: &ExperimentConfig) -> Self {
        Self {
            value: cfg.workload.arrival_rate_per_s,
            lambda: cfg.workload.arrival_rate_per_s,
            delay: cfg.delay,
        }
    }

    pub fn at(cfg: &ExperimentConfig, axis: SweepAxis, value: f64) -> Self {
        let mut p = Self::base(cfg);
        p.value = value;
        match axis {
            SweepAxis::None | SweepAxis::Lambda => p.lambda = value,
            SweepAxis::Mu => p.delay.mu_cycles_per_bit = value,
            SweepAxis::Alpha => p.delay.alpha_s_per_km = value,
        }
        p
    }

    /// One point per value, or the base point when `values` is empty.
    pub fn list(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Vec<Self> {
        if values.is_empty() || axis == SweepAxis::None {
            let mut base = Self::base(cfg);
            base.value = match axis {
                SweepAxis::Mu => cfg.delay.mu_cycles_per_bit,
                SweepAxis::Alpha => cfg.delay.alpha_s_per_km,
                SweepAxis::None | SweepAxis::Lambda => cfg.workload.arrival_rate_per_s,
            };
            return vec![base];
        }
        values.iter().map(|&v| Self::at(cfg, axis, v)).collect()
    }
}

pub fn build_env(cfg: &ExperimentConfig, lambda: f64, delay: &DelaySection) -> Result<OffloadEnv, ExperimentError> {
    let sim = Simulator::new(cfg.servers()?, cfg.delay_params(delay)?, cfg.action_space()?)?;
    Ok(OffloadEnv::new(sim, cfg.workload(lambda, 0), cfg.normalization)?)
}

/// A trained actor with its learning curve.
#[derive(Debug, Clone)]
pub struct TrainedReplica {
    pub replica: usize,
    pub seed: u64,
    pub actor: Mlp,
    pub curve: Vec<EpisodeStats>,
    /// Seconds since training started, per episode. Not part of any CSV.
    pub wallclock_s: Vec<f64>,
}

pub fn train_replica(
    cfg: &ExperimentConfig,
    replica: usize,
    seed: u64,
    episodes: usize,
    point: &SweepPoint,
) -> Result<TrainedReplica, ExperimentError> {
    let mut env = build_env(cfg, point.lambda, &point.delay)?;
    let mut trainer = Trainer::new(cfg.agent_config(seed, episodes), env.state_dim(), env.space().len())?;
    let start = Instant::now();
    let mut wallclock_s = Vec::with_capacity(episodes);
    let curve = trainer.train(&mut env, |_| wallclock_s.push(start.elapsed().as_secs_f64()))?;
    Ok(TrainedReplica {
        replica,
        seed,
        actor: trainer.actor,
        curve,
        wallclock_s,
    })
}

/// Runs independent jobs on scoped threads and returns results in input order.
fn par_map<T, R, F>(items: Vec<T>, f: F) -> Result<Vec<R>, ExperimentError>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R, ExperimentError> + Sync,
{
    let f = &f;
    thread::scope(|s| {
        let handles: Vec<_> = items.into_iter().map(|item| s.spawn(move || f(item))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment worker panicked"))
            .collect()
    })
}

/// Trains one actor per replica seed at the base configuration.
pub fn train_replicas(cfg: &ExperimentConfig, episodes: usize) -> Result<Vec<TrainedReplica>, ExperimentError> {
    let base = SweepPoint::base(cfg);
    let jobs: Vec<(usize, u64)> = cfg.seeds().into_iter().enumerate().collect();
    par_map(jobs, |(r, seed)| train_replica(cfg, r, seed, episodes, &base))
}

/// Evaluation of one policy at one sweep point for one replica.
#[derive(Debug, Clone)]
pub struct PointEval {
    pub replica: usize,
    pub seed: u64,
    pub point: usize,
    pub value: f64,
    pub lambda: f64,
    pub policy: PolicyKind,
    pub stats: EvalStats,
}

/// All three policies on one task stream drawn from the replica seed.
fn evaluate_point(
    cfg: &ExperimentConfig,
    actor: &Mlp,
    replica: usize,
    seed: u64,
    index: usize,
    point: &SweepPoint,
) -> Result<Vec<PointEval>, ExperimentError> {
    let mut env = build_env(cfg, point.lambda, &point.delay)?;
    let tasks = env.tasks(cfg.experiment.eval_tasks, derive_seed(seed, EVAL_TASKS_STREAM, 0))?;
    let space = env.space().clone();
    let mut out = Vec::with_capacity(PolicyKind::ALL.len());
    for policy in PolicyKind::ALL {
        let stats = match policy {
            PolicyKind::Decent => evaluate(&mut env, actor, &tasks, derive_seed(seed, EVAL_SAMPLING_STREAM, 0))?,
            PolicyKind::Nearest => {
                let mut p = NearestServer::new(&env.sim.server_configs(), env.sim.params(), &space)?;
                evaluate_policy(&mut env, &mut p, &tasks)?
            }
            PolicyKind::Largest => evaluate_policy(&mut env, &mut LargestServer::new(&space), &tasks)?,
        };
        out.push(PointEval {
            replica,
            seed,
            point: index,
            value: point.value,
            lambda: point.lambda,
            policy,
            stats,
        });
    }
    Ok(out)
}

/// Evaluates every replica at every point. With `retrain_per_point` set, or
/// without `trained` actors, a fresh actor is trained at each point;
/// otherwise each replica's actor is reused everywhere.
pub fn evaluate_grid(
    cfg: &ExperimentConfig,
    points: &[SweepPoint],
    trained: Option<&[TrainedReplica]>,
) -> Result<Vec<PointEval>, ExperimentError> {
    let reuse = trained.filter(|_| !cfg.experiment.retrain_per_point);
    let seeds = cfg.seeds();
    let mut jobs = Vec::with_capacity(seeds.len() * points.len());
    for (r, &seed) in seeds.iter().enumerate() {
        for (i, point) in points.iter().enumerate() {
            jobs.push((r, seed, i, *point));
        }
    }
    let per_job = par_map(jobs, |(r, seed, i, point)| {
        let fresh;
        let actor = match reuse {
            Some(t) => match t.iter().find(|t| t.replica == r) {
                Some(t) => &t.actor,
                None => return Err(ExperimentError::Config(format!("no trained actor for replica {r}"))),
            },
            None => {
                fresh = train_replica(cfg, r, seed, cfg.experiment.policy_train_episodes, &point)?.actor;
                &fresh
            }
        };
        evaluate_point(cfg, actor, r, seed, i, &point)
    })?;
    Ok(per_job.into_iter().flatten().collect())
}

/// Across-replica statistics of one policy at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub policy: PolicyKind,
    pub value: f64,
    pub lambda: f64,
    pub mean_weighted_response_s: f64,
    pub std_weighted_response_s: f64,
    pub per_replica: Vec<f64>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Ordered by policy, then sweep point.
pub fn aggregate(evals: &[PointEval]) -> Vec<Aggregate> {
    let mut keys: Vec<(PolicyKind, usize)> = evals.iter().map(|e| (e.policy, e.point)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(policy, point)| {
            let group: Vec<&PointEval> = evals.iter().filter(|e| e.policy == policy && e.point == point).collect();
            let per_replica: Vec<f64> = group.iter().map(|e| e.stats.mean_weighted_response).collect();
            let (mean, std) = mean_std(&per_replica);
            Aggregate {
                policy,
                value: group[0].value,
                lambda: group[0].lambda,
                mean_weighted_response_s: mean,
                std_weighted_response_s: std,
                per_replica,
            }
        })
        .collect()
}

/// Per weight class: replica means of the class-average delays.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassAggregate {
    pub policy: PolicyKind,
    pub lambda: f64,
    pub weight: f64,
    pub tasks: usize,
    pub mean_net_s: f64,
    pub mean_comp_s: f64,
    pub mean_response_s: f64,
    pub std_response_s: f64,
    pub per_replica_response_s: Vec<f64>,
}

/// Ordered by policy, sweep point, then weight as listed in the workload.
pub fn class_breakdown(evals: &[PointEval], weights: &[f64]) -> Vec<ClassAggregate> {
    let mut out = Vec::new();
    for agg in aggregate(evals) {
        let group: Vec<&PointEval> = evals
            .iter()
            .filter(|e| e.policy == agg.policy && e.value == agg.value && e.lambda == agg.lambda)
            .collect();
        for &w in weights {
            let classes: Vec<_> = group.iter().filter_map(|e| e.stats.class(w)).collect();
            if classes.is_empty() {
                continue;
            }
            let n = classes.len() as f64;
            let per_replica_response_s: Vec<f64> = classes.iter().map(|c| c.mean_response_s).collect();
            let (mean_response_s, std_response_s) = mean_std(&per_replica_response_s);
            out.push(ClassAggregate {
                policy: agg.policy,
                lambda: agg.lambda,
                weight: w,
                tasks: classes.iter().map(|c| c.count).sum(),
                mean_net_s: classes.iter().map(|c| c.mean_net_s).sum::<f64>() / n,
                mean_comp_s: classes.iter().map(|c| c.mean_comp_s).sum::<f64>() / n,
                mean_response_s,
                std_response_s,
                per_replica_response_s,
            });
        }
    }
    out
}

/// Learning curves for every replica, `agent.episodes` long.
pub fn run_training(cfg: &ExperimentConfig) -> Result<Vec<TrainedReplica>, ExperimentError> {
    cfg.validate()?;
    train_replicas(cfg, cfg.agent.episodes)
}

fn trained_for_grid(cfg: &ExperimentConfig) -> Result<Option<Vec<TrainedReplica>>, ExperimentError> {
    if cfg.experiment.retrain_per_point {
        Ok(None)
    } else {
        train_replicas(cfg, cfg.experiment.policy_train_episodes).map(Some)
    }
}

/// The arrival rates compared: the λ sweep when one is configured, else the
/// base rate.
fn lambda_points(cfg: &ExperimentConfig) -> Vec<SweepPoint> {
    match cfg.experiment.sweep_axis {
        SweepAxis::Lambda => SweepPoint::list(cfg, SweepAxis::Lambda, &cfg.experiment.sweep_values),
        _ => vec![SweepPoint::base(cfg)],
    }
}

/// DECENT and both baselines on shared task streams, per arrival rate.
pub fn run_comparison(cfg: &ExperimentConfig) -> Result<Vec<PointEval>, ExperimentError> {
    cfg.validate()?;
    let trained = trained_for_grid(cfg)?;
    evaluate_grid(cfg, &lambda_points(cfg), trained.as_deref())
}

/// Per-weight-class delays for every policy and arrival rate.
pub fn run_weight_breakdown(cfg: &ExperimentConfig) -> Result<Vec<ClassAggregate>, ExperimentError> {
    let evals = run_comparison(cfg)?;
    Ok(class_breakdown(&evals, &cfg.workload.weights))
}

/// All policies over the configured sweep axis.
pub fn run_sensitivity(cfg: &ExperimentConfig) -> Result<Vec<PointEval>, ExperimentError> {
    cfg.validate()?;
    let e = &cfg.experiment;
    if e.sweep_axis == SweepAxis::None || e.sweep_values.is_empty() {
        return Err(ExperimentError::Config(
            "a sweep needs experiment.sweep_axis and a non-empty experiment.sweep_values".into(),
        ));
    }
    let trained = trained_for_grid(cfg)?;
    evaluate_grid(cfg, &SweepPoint::list(cfg, e.sweep_axis, &e.sweep_values), trained.as_deref())
}

/// Moving-window view of a learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LearningSummary {
    pub window: usize,
    pub first_window_mean_reward: f64,
    pub last_window_mean_reward: f64,
    /// `|last − previous| / |previous|` over the last two disjoint windows.
    pub final_relative_change: f64,
}

impl LearningSummary {
    pub fn improved(&self) -> bool {
        self.last_window_mean_reward > self.first_window_mean_reward
    }

    pub fn plateaued(&self, tolerance: f64) -> bool {
        self.final_relative_change < tolerance
    }
}

/// `None` when the curve is shorter than two windows.
pub fn learning_summary(curve: &[EpisodeStats], window: usize) -> Option<LearningSummary> {
    let n = curve.len();
    if window == 0 || n < 2 * window {
        return None;
    }
    let mean = |s: &[EpisodeStats]| s.iter().map(|e| e.mean_reward).sum::<f64>() / s.len() as f64;
    let last = mean(&curve[n - window..]);
    let previous = mean(&curve[n - 2 * window..n - window]);
    Some(LearningSummary {
        window,
        first_window_mean_reward: mean(&curve[..window]),
        last_window_mean_reward: last,
        final_relative_change: (last - previous).abs() / previous.abs(),
    })
}
