use std::fs;
use std::path::{Path, PathBuf};

use mec_offload::experiments::{
    self, ExperimentConfig, PolicyKind, SweepAxis, BREAKDOWN_COLUMNS, COMPARISON_SUMMARY_COLUMNS,
    COMPARISON_TASK_COLUMNS, SWEEP_COLUMNS, TRAINING_COLUMNS,
};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// A configuration small enough to run in well under a second.
fn tiny() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.agent.episodes = 10;
    cfg.agent.episode_len = 16;
    cfg.agent.hidden_units = 16;
    cfg.experiment.policy_train_episodes = 10;
    cfg.experiment.eval_tasks = 64;
    cfg.experiment.replicas = 2;
    cfg
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn shipped_default_config_equals_builtin_defaults() {
    let cfg = ExperimentConfig::load(&configs_dir().join("default.toml")).unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
}

#[test]
fn shipped_sweep_configs_validate() {
    for (file, axis) in [
        ("lambda_sweep.toml", SweepAxis::Lambda),
        ("mu_sweep.toml", SweepAxis::Mu),
        ("alpha_sweep.toml", SweepAxis::Alpha),
    ] {
        let cfg = ExperimentConfig::load(&configs_dir().join(file)).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.experiment.sweep_axis, axis);
        assert_eq!(cfg.experiment.sweep_values.len(), 5);
    }
}

#[test]
fn toml_round_trip_and_stable_hash() {
    let cfg = ExperimentConfig::default();
    let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
    let mut other = cfg.clone();
    other.experiment.seed += 1;
    assert_ne!(other.hash(), cfg.hash());
    assert_eq!(cfg.seeds(), vec![1, 2, 3, 4, 5]);
}

#[test]
fn invalid_configurations_rejected() {
    let base = ExperimentConfig::default();
    let mut bad = Vec::new();
    let mut c = base.clone();
    c.servers.link_bps.pop();
    bad.push(c);
    let mut c = base.clone();
    c.workload.arrival_rate_per_s = 0.0;
    bad.push(c);
    let mut c = base.clone();
    c.experiment.replicas = 0;
    bad.push(c);
    let mut c = base.clone();
    c.experiment.sweep_values = vec![1.0];
    bad.push(c);
    let mut c = base.clone();
    c.experiment.sweep_axis = SweepAxis::Mu;
    c.experiment.sweep_values = vec![-0.1];
    bad.push(c);
    let mut c = base.clone();
    c.agent.gamma = 2.0;
    bad.push(c);
    for c in bad {
        assert!(c.validate().is_err(), "accepted {c:?}");
    }
    assert!(ExperimentConfig::from_toml_str("[servers]\nbogus = 1\n").is_err());
}

#[test]
fn training_produces_one_row_per_episode_and_is_reproducible() {
    let cfg = tiny();
    let a = experiments::run_training(&cfg).unwrap();
    assert_eq!(a.len(), 2);
    assert!(a.iter().all(|t| t.curve.len() == 10));
    let b = experiments::run_training(&cfg).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.curve, y.curve);
        assert_eq!(x.actor, y.actor);
    }
    assert_ne!(a[0].curve, a[1].curve);
}

#[test]
fn comparison_without_sweep_uses_base_rate() {
    let cfg = tiny();
    let evals = experiments::run_comparison(&cfg).unwrap();
    assert_eq!(evals.len(), 2 * PolicyKind::ALL.len());
    assert!(evals.iter().all(|e| e.lambda == 50.0 && e.stats.records.len() == 64));
    // Baselines see the same tasks as the agent.
    let ids = |p: PolicyKind| {
        evals.iter().filter(|e| e.replica == 0 && e.policy == p).flat_map(|e| e.stats.records.iter().map(|r| r.task_id)).collect::<Vec<_>>()
    };
    assert_eq!(ids(PolicyKind::Decent), ids(PolicyKind::Nearest));
    let aggregates = experiments::aggregate(&evals);
    assert_eq!(aggregates.len(), 3);
    assert!(aggregates.iter().all(|a| a.per_replica.len() == 2));
}

#[test]
fn nearest_baseline_uses_server_zero() {
    let evals = experiments::run_comparison(&tiny()).unwrap();
    for e in evals.iter().filter(|e| e.policy == PolicyKind::Nearest) {
        assert!(e.stats.records.iter().all(|r| r.server == 0));
    }
}

#[test]
fn breakdown_has_one_row_per_class() {
    let mut cfg = tiny();
    cfg.experiment.sweep_axis = SweepAxis::Lambda;
    cfg.experiment.sweep_values = vec![30.0, 60.0];
    let classes = experiments::run_weight_breakdown(&cfg).unwrap();
    assert_eq!(classes.len(), 3 * 2 * 4);
    for c in &classes {
        assert!(c.mean_response_s >= c.mean_net_s);
        assert!((c.mean_net_s + c.mean_comp_s - c.mean_response_s).abs() < 1e-9);
    }
}

#[test]
fn zero_work_per_bit_means_zero_computing_delay() {
    let mut cfg = tiny();
    cfg.experiment.sweep_axis = SweepAxis::Mu;
    cfg.experiment.sweep_values = vec![0.0];
    let evals = experiments::run_sensitivity(&cfg).unwrap();
    assert_eq!(evals.len(), 6);
    for e in &evals {
        assert!(e.stats.records.iter().all(|r| r.t_comp_s == 0.0), "{:?}", e.policy);
    }
}

#[test]
fn sensitivity_requires_a_sweep() {
    assert!(experiments::run_sensitivity(&tiny()).is_err());
}

#[test]
fn outputs_have_headers_and_are_byte_identical() {
    let mut cfg = tiny();
    cfg.experiment.sweep_axis = SweepAxis::Alpha;
    cfg.experiment.sweep_values = vec![0.01, 0.05];
    let write_all = |dir: &Path| -> Vec<PathBuf> {
        let mut paths = experiments::write_training(dir, &cfg, &experiments::run_training(&cfg).unwrap()).unwrap();
        paths.extend(experiments::write_comparison(dir, &cfg, &experiments::run_comparison(&cfg).unwrap()).unwrap());
        paths.extend(experiments::write_sensitivity(dir, &cfg, &experiments::run_sensitivity(&cfg).unwrap()).unwrap());
        paths.extend(experiments::write_breakdown(dir, &cfg, &experiments::run_weight_breakdown(&cfg).unwrap()).unwrap());
        paths
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (a, b) = (a.path(), b.path());
    let first = write_all(a);
    let second = write_all(b);
    for (x, y) in first.iter().zip(&second) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{} differs", x.display());
    }
    for (file, cols) in [
        ("training.csv", &TRAINING_COLUMNS[..]),
        ("comparison_tasks.csv", &COMPARISON_TASK_COLUMNS[..]),
        ("comparison_summary.csv", &COMPARISON_SUMMARY_COLUMNS[..]),
        ("sweep.csv", &SWEEP_COLUMNS[..]),
        ("breakdown.csv", &BREAKDOWN_COLUMNS[..]),
    ] {
        assert_eq!(header(&a.join(file)), cols.join(","));
    }
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(a.join("sweep_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config_hash"], cfg.hash());
    assert_eq!(summary["seeds"], serde_json::json!([1, 2]));
}
