use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::baselines::Policy;
use crate::mdp::{Action, ActionSpace, MdpState};
use crate::model::{self, CompEntry};
use crate::{DelayParams, QueueSnapshot, ServerConfig, Task};

/// Event kinds in tie-break order: at equal times completions are applied
/// before deliveries, deliveries before transfer ends, and arrivals last, so
/// an arriving task observes everything that finished at its instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ExecutionComplete,
    /// The task reaches the server after propagation and joins its computing queue.
    Delivery,
    TransferComplete,
    Arrival,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub task_id: u64,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.cmp(&other.kind))
            .then(self.task_id.cmp(&other.task_id))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One line of the optional event trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time_s: f64,
    pub kind: EventKind,
    pub task_id: u64,
    pub server_id: Option<usize>,
}

/// Per-server link: tasks waiting to be sent and the one being sent.
#[derive(Debug, Clone, Default)]
pub struct LinkState {
    pub queue: VecDeque<u64>,
    pub in_transfer: Option<u64>,
    pub busy_until: f64,
}

#[derive(Debug, Clone)]
pub struct ServerState {
    pub config: ServerConfig,
    pub free_cycles_per_s: f64,
    pub comp_queue: VecDeque<u64>,
    pub running: Vec<u64>,
}

/// Lifecycle of one completed task, with measured and closed-form delays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: u64,
    pub weight: f64,
    pub size_bits: f64,
    pub server: usize,
    pub alloc_cycles_per_s: f64,
    pub arrival_s: f64,
    pub transfer_start_s: f64,
    pub transfer_end_s: f64,
    pub server_arrival_s: f64,
    pub exec_start_s: f64,
    pub exec_end_s: f64,
    /// Arrival at the base station to arrival at the server.
    pub t_net_s: f64,
    /// Arrival at the server to completion.
    pub t_comp_s: f64,
    pub weighted_response: f64,
    /// Link backlog ahead of the task when it was submitted, in seconds.
    pub analytic_comm_wait_s: f64,
    /// Computing work ahead of the task when it reached the server, in seconds.
    pub analytic_comp_wait_s: f64,
    /// Closed-form network delay from the queues at decision time.
    pub estimated_net_s: f64,
    /// Closed-form computing delay from the server's queue at decision time.
    pub estimated_comp_s: f64,
}

impl TaskRecord {
    pub fn response_s(&self) -> f64 {
        self.t_net_s + self.t_comp_s
    }

    pub fn comm_wait_s(&self) -> f64 {
        self.transfer_start_s - self.arrival_s
    }

    pub fn comp_wait_s(&self) -> f64 {
        self.exec_start_s - self.server_arrival_s
    }
}

#[derive(Debug, Clone)]
struct Slot {
    task: Task,
    action: Option<Action>,
    transfer_start: Option<f64>,
    transfer_end: Option<f64>,
    server_arrival: Option<f64>,
    exec_start: Option<f64>,
    exec_end: Option<f64>,
    analytic_comm_wait: f64,
    analytic_comp_wait: f64,
    estimated_net: f64,
    estimated_comp: f64,
}

impl Slot {
    fn new(task: Task) -> Self {
        Self {
            task,
            action: None,
            transfer_start: None,
            transfer_end: None,
            server_arrival: None,
            exec_start: None,
            exec_end: None,
            analytic_comm_wait: 0.0,
            analytic_comp_wait: 0.0,
            estimated_net: 0.0,
            estimated_comp: 0.0,
        }
    }

    fn alloc(&self) -> f64 {
        self.action.expect("decided task").alloc_cycles_per_s
    }
}

pub struct Simulator {
    params: DelayParams,
    space: ActionSpace,
    now: f64,
    events: BinaryHeap<Reverse<Event>>,
    slots: Vec<Slot>,
    index: HashMap<u64, usize>,
    links: Vec<LinkState>,
    servers: Vec<ServerState>,
    pending: Option<usize>,
    trace: Option<Vec<TraceRecord>>,
}

impl Simulator {
    pub fn new(servers: Vec<ServerConfig>, params: DelayParams, space: ActionSpace) -> Result<Self, SimError> {
        if servers.is_empty() {
            return Err(SimError::Config("no servers".into()));
        }
        if space.num_servers() != servers.len() {
            return Err(SimError::Config(format!(
                "action space has {} servers, configuration has {}",
                space.num_servers(),
                servers.len()
            )));
        }
        let links = vec![LinkState::default(); servers.len()];
        let servers = servers
            .into_iter()
            .map(|config| ServerState {
                config,
                free_cycles_per_s: config.capacity_cycles_per_s,
                comp_queue: VecDeque::new(),
                running: Vec::new(),
            })
            .collect();
        Ok(Self {
            params,
            space,
            now: 0.0,
            events: BinaryHeap::new(),
            slots: Vec::new(),
            index: HashMap::new(),
            links,
            servers,
            pending: None,
            trace: None,
        })
    }

    /// Returns to an empty system at time zero. Trace recording, if enabled,
    /// starts over.
    pub fn reset(&mut self) {
        self.now = 0.0;
        self.events.clear();
        self.slots.clear();
        self.index.clear();
        self.pending = None;
        for link in &mut self.links {
            *link = LinkState::default();
        }
        for server in &mut self.servers {
            server.free_cycles_per_s = server.config.capacity_cycles_per_s;
            server.comp_queue.clear();
            server.running.clear();
        }
        if let Some(trace) = &mut self.trace {
            trace.clear();
        }
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> &[TraceRecord] {
        self.trace.as_deref().unwrap_or(&[])
    }

    /// Writes the trace as newline-delimited JSON.
    pub fn write_trace<W: Write>(&self, mut out: W) -> Result<(), SimError> {
        for rec in self.trace() {
            serde_json::to_writer(&mut out, rec).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn servers(&self) -> &[ServerState] {
        &self.servers
    }

    pub fn links(&self) -> &[LinkState] {
        &self.links
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn params(&self) -> &DelayParams {
        &self.params
    }

    pub fn server_configs(&self) -> Vec<ServerConfig> {
        self.servers.iter().map(|s| s.config).collect()
    }

    /// Schedules the arrivals of `tasks`.
    pub fn load(&mut self, tasks: &[Task]) -> Result<(), SimError> {
        for task in tasks {
            if self.index.contains_key(&task.id) {
                return Err(SimError::DuplicateTask(task.id));
            }
            if task.arrival_time < self.now {
                return Err(SimError::ArrivalInPast {
                    task_id: task.id,
                    arrival_s: task.arrival_time,
                    now_s: self.now,
                });
            }
            self.index.insert(task.id, self.slots.len());
            self.slots.push(Slot::new(task.clone()));
            self.push_event(task.arrival_time, EventKind::Arrival, task.id);
        }
        Ok(())
    }

    /// The task whose arrival has been processed but not yet decided.
    pub fn pending_task(&self) -> Option<&Task> {
        self.pending.map(|i| &self.slots[i].task)
    }

    /// Pops and applies the earliest event. An `Arrival` leaves its task
    /// pending until [`Simulator::submit`] is called for it.
    pub fn step(&mut self) -> Result<Option<Event>, SimError> {
        if let Some(i) = self.pending {
            return Err(SimError::DecisionPending {
                task_id: self.slots[i].task.id,
            });
        }
        let Some(Reverse(event)) = self.events.pop() else {
            return Ok(None);
        };
        debug_assert!(event.time >= self.now);
        self.now = event.time;
        let slot = self.index[&event.task_id];
        match event.kind {
            EventKind::Arrival => self.pending = Some(slot),
            EventKind::TransferComplete => self.on_transfer_complete(slot)?,
            EventKind::Delivery => self.on_delivery(slot)?,
            EventKind::ExecutionComplete => self.on_execution_complete(slot)?,
        }
        if event.kind != EventKind::Arrival {
            let server = self.slots[slot].action.map(|a| a.server);
            self.record_trace(event.kind, event.task_id, server);
        }
        Ok(Some(event))
    }

    /// Advances to the next arrival and returns its task id, or `None` once
    /// every loaded task has been decided and completed.
    pub fn next_arrival(&mut self) -> Result<Option<u64>, SimError> {
        while let Some(event) = self.step()? {
            if event.kind == EventKind::Arrival {
                return Ok(Some(event.task_id));
            }
        }
        Ok(None)
    }

    /// Processes every remaining event; fails if an arrival needs a decision.
    pub fn drain(&mut self) -> Result<(), SimError> {
        match self.next_arrival()? {
            None => Ok(()),
            Some(task_id) => Err(SimError::DecisionPending { task_id }),
        }
    }

    /// Observation at the current instant for the task `task_id`.
    pub fn observe(&self, task_id: u64) -> Result<MdpState, SimError> {
        let slot = self.slot_of(task_id)?;
        let task = &self.slots[slot].task;
        let mu = self.params.mu_cycles_per_bit;
        let queued_cycles = self
            .servers
            .iter()
            .map(|s| {
                s.comp_queue
                    .iter()
                    .map(|id| mu * self.slots[self.index[id]].task.size_bits)
                    .sum()
            })
            .collect();
        let comm_wait_s = (0..self.links.len()).map(|k| self.link_backlog_s(k)).collect();
        Ok(MdpState {
            weight: task.weight,
            size_bits: task.size_bits,
            free_cycles: self.servers.iter().map(|s| s.free_cycles_per_s).collect(),
            queued_cycles,
            comm_wait_s,
        })
    }

    /// Queue contents on server `k` at the current instant, in the form the
    /// closed-form delay model takes.
    pub fn snapshot(&self, k: usize) -> QueueSnapshot {
        let link = &self.links[k];
        let w = self.servers[k].config.link_bps;
        let mut comm_bits: f64 = link
            .queue
            .iter()
            .map(|id| self.slots[self.index[id]].task.size_bits)
            .sum();
        if link.in_transfer.is_some() {
            comm_bits += (link.busy_until - self.now).max(0.0) * w;
        }
        let mu = self.params.mu_cycles_per_bit;
        let server = &self.servers[k];
        let mut comp = Vec::with_capacity(server.running.len() + server.comp_queue.len());
        for id in &server.running {
            let slot = &self.slots[self.index[id]];
            let alloc = slot.alloc();
            let end = slot.exec_end_planned(mu);
            let remaining_bits = if mu > 0.0 {
                (end - self.now).max(0.0) * alloc / mu
            } else {
                0.0
            };
            comp.push(CompEntry {
                size_bits: remaining_bits,
                alloc_cycles_per_s: alloc,
            });
        }
        for id in &server.comp_queue {
            let slot = &self.slots[self.index[id]];
            comp.push(CompEntry {
                size_bits: slot.task.size_bits,
                alloc_cycles_per_s: slot.alloc(),
            });
        }
        QueueSnapshot {
            comm_backlog_bits: comm_bits,
            comp_backlog: comp,
        }
    }

    /// Commits the pending task to `action`'s server and CPU block.
    pub fn submit(&mut self, task_id: u64, action: Action) -> Result<(), SimError> {
        let slot = self.slot_of(task_id)?;
        if self.pending != Some(slot) {
            return Err(SimError::NotPending { task_id });
        }
        self.validate_action(task_id, &action)?;

        let k = action.server;
        let config = self.servers[k].config;
        let snap = self.snapshot(k);
        let decided = self.slots[slot].task.clone().with_alloc(action.alloc_cycles_per_s);
        let mu = self.params.mu_cycles_per_bit;
        let comm_wait = model::comm_wait(snap.comm_backlog_bits, config.link_bps)?;
        let est_net = model::network_delay(&decided, &config, &snap, &self.params)?;
        let est_comp = model::computing_delay(&decided, &snap, mu)?;

        let s = &mut self.slots[slot];
        s.task = decided;
        s.action = Some(action);
        s.analytic_comm_wait = comm_wait;
        s.estimated_net = est_net;
        s.estimated_comp = est_comp;
        self.pending = None;

        self.record_trace(EventKind::Arrival, task_id, Some(k));
        self.links[k].queue.push_back(task_id);
        if self.links[k].in_transfer.is_none() {
            self.start_transfer(k)?;
        }
        Ok(())
    }

    /// Simulates `tasks` from an empty system, asking `policy` for every decision.
    pub fn run<P: Policy + ?Sized>(&mut self, policy: &mut P, tasks: &[Task]) -> Result<Vec<TaskRecord>, SimError> {
        self.reset();
        self.load(tasks)?;
        while let Some(task_id) = self.next_arrival()? {
            let state = self.observe(task_id)?;
            let action = policy.decide(&state);
            self.submit(task_id, action)?;
        }
        self.records()
    }

    pub fn record(&self, task_id: u64) -> Result<TaskRecord, SimError> {
        let slot = &self.slots[self.slot_of(task_id)?];
        let incomplete = || SimError::Incomplete { task_id };
        let action = slot.action.ok_or_else(incomplete)?;
        let arrival = slot.task.arrival_time;
        let server_arrival = slot.server_arrival.ok_or_else(incomplete)?;
        let exec_end = slot.exec_end.ok_or_else(incomplete)?;
        let t_net = server_arrival - arrival;
        let t_comp = exec_end - server_arrival;
        Ok(TaskRecord {
            task_id,
            weight: slot.task.weight,
            size_bits: slot.task.size_bits,
            server: action.server,
            alloc_cycles_per_s: action.alloc_cycles_per_s,
            arrival_s: arrival,
            transfer_start_s: slot.transfer_start.ok_or_else(incomplete)?,
            transfer_end_s: slot.transfer_end.ok_or_else(incomplete)?,
            server_arrival_s: server_arrival,
            exec_start_s: slot.exec_start.ok_or_else(incomplete)?,
            exec_end_s: exec_end,
            t_net_s: t_net,
            t_comp_s: t_comp,
            weighted_response: model::weighted_response(slot.task.weight, t_net, t_comp)?,
            analytic_comm_wait_s: slot.analytic_comm_wait,
            analytic_comp_wait_s: slot.analytic_comp_wait,
            estimated_net_s: slot.estimated_net,
            estimated_comp_s: slot.estimated_comp,
        })
    }

    /// Records of every loaded task, in load order.
    pub fn records(&self) -> Result<Vec<TaskRecord>, SimError> {
        self.slots.iter().map(|s| self.record(s.task.id)).collect()
    }

    /// Largest violation of `free + Σ running alloc = capacity` over servers.
    pub fn conservation_error(&self) -> f64 {
        self.servers
            .iter()
            .map(|s| {
                let used: f64 = s.running.iter().map(|id| self.slots[self.index[id]].alloc()).sum();
                (s.free_cycles_per_s + used - s.config.capacity_cycles_per_s).abs()
            })
            .fold(0.0, f64::max)
    }

    fn slot_of(&self, task_id: u64) -> Result<usize, SimError> {
        self.index.get(&task_id).copied().ok_or(SimError::UnknownTask(task_id))
    }

    fn link_backlog_s(&self, k: usize) -> f64 {
        let link = &self.links[k];
        let w = self.servers[k].config.link_bps;
        let queued: f64 = link
            .queue
            .iter()
            .map(|id| self.slots[self.index[id]].task.size_bits / w)
            .sum();
        let residual = if link.in_transfer.is_some() {
            (link.busy_until - self.now).max(0.0)
        } else {
            0.0
        };
        residual + queued
    }

    fn validate_action(&self, task_id: u64, action: &Action) -> Result<(), SimError> {
        let reject = |reason: String| Err(SimError::InvalidAction { task_id, reason });
        if action.server >= self.servers.len() {
            return reject(format!("server {} out of range", action.server));
        }
        let blocks = self.space.blocks();
        match blocks.get(action.block_rank) {
            Some(b) if *b == action.alloc_cycles_per_s => {}
            Some(b) => {
                return reject(format!(
                    "allocation {} does not match block {} ({b})",
                    action.alloc_cycles_per_s, action.block_rank
                ))
            }
            None => return reject(format!("block rank {} out of range", action.block_rank)),
        }
        let capacity = self.servers[action.server].config.capacity_cycles_per_s;
        if action.alloc_cycles_per_s > capacity {
            return reject(format!(
                "allocation {} exceeds server capacity {capacity}",
                action.alloc_cycles_per_s
            ));
        }
        Ok(())
    }

    fn push_event(&mut self, time: f64, kind: EventKind, task_id: u64) {
        self.events.push(Reverse(Event { time, kind, task_id }));
    }

    fn record_trace(&mut self, kind: EventKind, task_id: u64, server_id: Option<usize>) {
        if let Some(trace) = &mut self.trace {
            trace.push(TraceRecord {
                time_s: self.now,
                kind,
                task_id,
                server_id,
            });
        }
    }

    fn start_transfer(&mut self, k: usize) -> Result<(), SimError> {
        let Some(task_id) = self.links[k].queue.pop_front() else {
            return Ok(());
        };
        let slot = self.index[&task_id];
        let size = self.slots[slot].task.size_bits;
        let end = self.now + model::transmission_time(size, self.servers[k].config.link_bps)?;
        self.slots[slot].transfer_start = Some(self.now);
        let link = &mut self.links[k];
        link.in_transfer = Some(task_id);
        link.busy_until = end;
        self.push_event(end, EventKind::TransferComplete, task_id);
        Ok(())
    }

    fn on_transfer_complete(&mut self, slot: usize) -> Result<(), SimError> {
        let task_id = self.slots[slot].task.id;
        let k = self.slots[slot].action.expect("submitted task").server;
        self.slots[slot].transfer_end = Some(self.now);
        self.links[k].in_transfer = None;
        let e2e = model::e2e_delay(self.servers[k].config.distance_km, &self.params)?;
        self.push_event(self.now + e2e, EventKind::Delivery, task_id);
        self.start_transfer(k)
    }

    fn on_delivery(&mut self, slot: usize) -> Result<(), SimError> {
        let task_id = self.slots[slot].task.id;
        let k = self.slots[slot].action.expect("submitted task").server;
        let snap = self.snapshot(k);
        self.slots[slot].analytic_comp_wait = model::comp_wait(&snap.comp_backlog, self.params.mu_cycles_per_bit)?;
        self.slots[slot].server_arrival = Some(self.now);
        self.servers[k].comp_queue.push_back(task_id);
        self.start_ready(k)
    }

    /// Starts computing-queue heads while their allocation fits.
    fn start_ready(&mut self, k: usize) -> Result<(), SimError> {
        let mu = self.params.mu_cycles_per_bit;
        while let Some(&head) = self.servers[k].comp_queue.front() {
            let slot = self.index[&head];
            let alloc = self.slots[slot].alloc();
            if self.servers[k].free_cycles_per_s < alloc {
                break;
            }
            let server = &mut self.servers[k];
            server.comp_queue.pop_front();
            server.free_cycles_per_s -= alloc;
            server.running.push(head);
            let duration = model::exec_time(self.slots[slot].task.size_bits, mu, alloc)?;
            self.slots[slot].exec_start = Some(self.now);
            self.push_event(self.now + duration, EventKind::ExecutionComplete, head);
        }
        Ok(())
    }

    fn on_execution_complete(&mut self, slot: usize) -> Result<(), SimError> {
        let task_id = self.slots[slot].task.id;
        let k = self.slots[slot].action.expect("submitted task").server;
        let alloc = self.slots[slot].alloc();
        self.slots[slot].exec_end = Some(self.now);
        let server = &mut self.servers[k];
        server.running.retain(|id| *id != task_id);
        server.free_cycles_per_s += alloc;
        if server.running.is_empty() {
            server.free_cycles_per_s = server.config.capacity_cycles_per_s;
        }
        self.start_ready(k)
    }
}

impl Slot {
    fn exec_end_planned(&self, mu: f64) -> f64 {
        let start = self.exec_start.expect("running task has started");
        start + mu * self.task.size_bits / self.alloc()
    }
}
