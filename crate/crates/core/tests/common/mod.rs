//! Independent oracles shared by the integration tests and the acceptance
//! report. Nothing here calls into the code paths it checks.

#![allow(dead_code)]

use mec_offload::mdp::ActionSpace;
use mec_offload::model::{self, CompEntry, QueueSnapshot};
use mec_offload::neural::{Head, Mlp};
use mec_offload::sim::Simulator;
use mec_offload::{DelayParams, ServerConfig, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A hand-checked delay-model example: operation, computed value, expected value.
pub struct Example {
    pub name: &'static str,
    pub got: f64,
    pub want: f64,
}

impl Example {
    pub fn error(&self) -> f64 {
        (self.got - self.want).abs()
    }
}

fn ex(name: &'static str, got: Result<f64, model::ModelError>, want: f64) -> Example {
    Example {
        name,
        got: got.unwrap_or(f64::NAN),
        want,
    }
}

/// Every delay-model example, with expected values worked out by hand.
pub fn delay_examples() -> Vec<Example> {
    let p = DelayParams::new(0.03, 0.03, 0.15).unwrap();
    let zero = DelayParams::new(0.0, 0.0, 0.15).unwrap();
    // Built directly so the degenerate zero-size examples are expressible.
    let task = |l: f64| Task {
        id: 0,
        size_bits: l,
        weight: 1.0,
        arrival_time: 0.0,
        alloc_cycles_per_s: None,
    };
    let server = |d: f64| ServerConfig::new(0, 2e8, d, 2e9).unwrap();
    let backlog = |bits: f64| QueueSnapshot {
        comm_backlog_bits: bits,
        comp_backlog: Vec::new(),
    };
    let two_queued = QueueSnapshot {
        comm_backlog_bits: 0.0,
        comp_backlog: vec![
            CompEntry {
                size_bits: 3e7,
                alloc_cycles_per_s: 1e8,
            };
            2
        ],
    };
    vec![
        ex("transmission_time(3e7, 2e9)", model::transmission_time(3e7, 2e9), 0.015),
        ex("transmission_time(0, 2e9)", model::transmission_time(0.0, 2e9), 0.0),
        ex("transmission_time(2e9, 2e9)", model::transmission_time(2e9, 2e9), 1.0),
        ex("e2e_delay(0)", model::e2e_delay(0.0, &p), 0.03),
        ex("e2e_delay(3)", model::e2e_delay(3.0, &p), 0.12),
        ex("e2e_delay(5, alpha=zeta=0)", model::e2e_delay(5.0, &DelayParams::new(0.0, 0.0, 0.15).unwrap()), 0.0),
        ex("comm_wait(6e7, 2e9)", model::comm_wait(6e7, 2e9), 0.03),
        ex("comm_wait(0, 2e9)", model::comm_wait(0.0, 2e9), 0.0),
        ex("comm_wait(3e7, 2e9)", model::comm_wait(3e7, 2e9), 0.015),
        ex("network_delay(d=0, empty)", model::network_delay(&task(3e7), &server(0.0), &backlog(0.0), &p), 0.045),
        ex("network_delay(d=1, backlog 3e7)", model::network_delay(&task(3e7), &server(1.0), &backlog(3e7), &p), 0.09),
        ex("network_delay(l=0, alpha=zeta=0)", model::network_delay(&task(0.0), &server(0.0), &backlog(0.0), &zero), 0.0),
        ex("exec_time(3e7, 0.15, 2e8)", model::exec_time(3e7, 0.15, 2e8), 0.0225),
        ex("exec_time(3e7, 0.15, 1e7)", model::exec_time(3e7, 0.15, 1e7), 0.45),
        ex("exec_time(0, 0.15, 1e7)", model::exec_time(0.0, 0.15, 1e7), 0.0),
        ex(
            "computing_delay(r=2e8, two queued at 1e8)",
            model::computing_delay(&task(3e7).with_alloc(2e8), &two_queued, 0.15),
            0.0225 + 0.045 + 0.045,
        ),
        ex(
            "computing_delay(r=2e8, empty)",
            model::computing_delay(&task(3e7).with_alloc(2e8), &backlog(0.0), 0.15),
            0.0225,
        ),
        ex(
            "computing_delay(l=0, empty)",
            model::computing_delay(&task(0.0).with_alloc(1e7), &backlog(0.0), 0.15),
            0.0,
        ),
        ex("weighted_response(50, 0.045, 0.0225)", model::weighted_response(50.0, 0.045, 0.0225), 3.375),
        ex("weighted_response(1, 0.5, 0.5)", model::weighted_response(1.0, 0.5, 0.5), 1.0),
        ex("weighted_response(100, 0, 0)", model::weighted_response(100.0, 0.0, 0.0), 0.0),
    ]
}

/// Worst disagreement between simulator and hand schedule over one scenario.
#[derive(Debug, Default, Clone, Copy)]
pub struct OracleGap {
    /// Measured network and computing delays vs the hand schedule.
    pub measured: f64,
    /// Closed-form waits from the queue snapshots vs the hand schedule.
    pub analytic: f64,
}

/// Random scenario of at most six tasks on two servers where every task asks
/// for its server's full capacity, so execution is strictly sequential.
/// Returns the largest gap between the simulator and a hand-built FIFO
/// schedule.
pub fn queue_oracle_scenario(seed: u64) -> OracleGap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = 2;
    let capacity = 2e8;
    let link = [2e9, 1e9];
    let distance = [rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0)];
    let mu = rng.gen_range(0.05..0.3);
    let params = DelayParams::new(0.03, 0.03, mu).unwrap();
    let servers: Vec<ServerConfig> = (0..k)
        .map(|s| ServerConfig::new(s, capacity, distance[s], link[s]).unwrap())
        .collect();
    let space = ActionSpace::new(k, &[capacity]).unwrap();
    let n = rng.gen_range(1..=6);
    let mut clock = 0.0;
    let mut tasks = Vec::with_capacity(n);
    let mut target = Vec::with_capacity(n);
    for id in 0..n as u64 {
        // Frequent simultaneous arrivals exercise tie-breaking.
        if rng.gen_bool(0.7) {
            clock += rng.gen_range(0.0..0.03);
        }
        tasks.push(Task::new(id, rng.gen_range(1e6..6e7), 1.0, clock).unwrap());
        target.push(rng.gen_range(0..k));
    }

    let mut sim = Simulator::new(servers, params, space.clone()).unwrap();
    sim.load(&tasks).unwrap();
    while let Some(id) = sim.next_arrival().unwrap() {
        let action = space.action(target[id as usize], 0).unwrap();
        sim.submit(id, action).unwrap();
    }

    // Hand schedule: tasks in arrival order (ties by id); per server one
    // link and one processor, both first come first served.
    let mut link_free = [0.0f64; 2];
    let mut cpu_free = [0.0f64; 2];
    let mut gap = OracleGap::default();
    for (i, t) in tasks.iter().enumerate() {
        let s = target[i];
        let tx_start = t.arrival_time.max(link_free[s]);
        let tx_end = tx_start + t.size_bits / link[s];
        link_free[s] = tx_end;
        let at_server = tx_end + 0.03 * distance[s] + 0.03;
        let exec_start = at_server.max(cpu_free[s]);
        let exec_end = exec_start + mu * t.size_bits / capacity;
        cpu_free[s] = exec_end;

        let r = sim.record(t.id).unwrap();
        let measured = [
            (r.t_net_s - (at_server - t.arrival_time)).abs(),
            (r.t_comp_s - (exec_end - at_server)).abs(),
        ];
        let analytic = [
            (r.analytic_comm_wait_s - (tx_start - t.arrival_time)).abs(),
            (r.analytic_comp_wait_s - (exec_start - at_server)).abs(),
        ];
        gap.measured = measured.into_iter().fold(gap.measured, f64::max);
        gap.analytic = analytic.into_iter().fold(gap.analytic, f64::max);
    }
    gap
}

/// Outcome of a batch of finite-difference gradient checks.
#[derive(Debug, Default, Clone, Copy)]
pub struct GradCheck {
    pub checks: usize,
    pub parameters: usize,
    pub skipped_near_kink: usize,
    pub max_relative_error: f64,
}

const FD_STEP: f64 = 1e-5;

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Central differences of a scalar loss over every parameter, compared with
/// `analytic`. Hidden-layer parameters of a unit whose pre-activation could
/// cross zero under the perturbation are skipped.
fn compare_to_fd(
    net: &Mlp<f64>,
    x: &[f64],
    analytic: &[f64],
    loss: impl Fn(&Mlp<f64>) -> f64,
    out: &mut GradCheck,
) {
    let fwd = net.forward(x).unwrap();
    let (n_in, n_hidden) = (net.inputs(), net.hidden());
    let x_max = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let near_kink = |unit: usize| fwd.pre_activation[unit].abs() < 1e-6 + 2.0 * FD_STEP * x_max;
    for (i, &g) in analytic.iter().enumerate() {
        let unit = if i < n_hidden * n_in {
            Some(i / n_in)
        } else if i < n_hidden * n_in + n_hidden {
            Some(i - n_hidden * n_in)
        } else {
            None
        };
        if unit.is_some_and(near_kink) {
            out.skipped_near_kink += 1;
            continue;
        }
        let mut plus = net.clone();
        *plus.param_mut(i) += FD_STEP;
        let mut minus = net.clone();
        *minus.param_mut(i) -= FD_STEP;
        let numeric = (loss(&plus) - loss(&minus)) / (2.0 * FD_STEP);
        out.max_relative_error = out.max_relative_error.max(relative_error(g, numeric));
        out.parameters += 1;
    }
    out.checks += 1;
}

fn random_net(rng: &mut ChaCha8Rng, head: Head) -> (Mlp<f64>, Vec<f64>) {
    let inputs = rng.gen_range(2..7);
    let hidden = rng.gen_range(3..12);
    let outputs = if head == Head::Softmax { rng.gen_range(2..8) } else { 1 };
    let mut net = Mlp::<f64>::new(inputs, hidden, outputs, head, rng);
    // Nonzero biases so the bias paths are exercised too.
    for i in 0..net.param_count() {
        *net.param_mut(i) += rng.gen_range(-0.3..0.3);
    }
    let x = (0..inputs).map(|_| rng.gen_range(-2.0..2.0)).collect();
    (net, x)
}

/// `count` random checks of the policy-loss gradient `−A·log π(a|x)`.
pub fn actor_gradient_checks(count: usize, seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = GradCheck::default();
    for _ in 0..count {
        let (net, x) = random_net(&mut rng, Head::Softmax);
        let action = rng.gen_range(0..net.outputs());
        let adv = rng.gen_range(-3.0..3.0);
        let fwd = net.forward(&x).unwrap();
        let grads: Vec<f64> = net.backward_policy(&fwd, action, adv).unwrap().iter().collect();
        let loss = |n: &Mlp<f64>| -adv * n.forward_actor(&x).unwrap()[action].ln();
        compare_to_fd(&net, &x, &grads, loss, &mut out);
    }
    out
}

/// `count` random checks of the value-loss gradient `(target − V(x))²`.
pub fn critic_gradient_checks(count: usize, seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = GradCheck::default();
    for _ in 0..count {
        let (net, x) = random_net(&mut rng, Head::Linear);
        let target = rng.gen_range(-5.0..5.0);
        let fwd = net.forward(&x).unwrap();
        let grads: Vec<f64> = net.backward_value(&fwd, target).unwrap().iter().collect();
        let loss = |n: &Mlp<f64>| (target - n.forward_critic(&x).unwrap()).powi(2);
        compare_to_fd(&net, &x, &grads, loss, &mut out);
    }
    out
}
