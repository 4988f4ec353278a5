//! Deterministic discrete-event execution of a scheduled DAG under failure
//! injection.
//!
//! One run executes a single application: tasks start with an input transfer
//! of their payload from the source device, execute on their assigned device
//! (one task per device at a time), and complete in dependency order. Devices
//! fail at pre-sampled Weibull times and come back after a repair delay; a
//! device whose availability window closes behaves as permanently failed.
//!
//! Per-task fault-tolerance policies shape what a failure costs:
//!
//! * no policy: all progress is lost and the task restarts from zero on the
//!   same device after repair, including the input transfer;
//! * checkpoint: after every interval of executed task progress the task
//!   pauses, emits a checkpoint-write message, and ships a snapshot back to
//!   the source; after a failure it resumes from the last completed
//!   checkpoint;
//! * replicate: a second copy races on another device, first completion
//!   wins, the loser is cancelled with a message.
//!
//! Failure schedules are drawn from per-device substreams of the run seed,
//! so the timeline of failures is identical no matter which strategy runs —
//! that is what makes paired strategy comparisons exact.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dag::{AppDag, TaskSpec};
use crate::device::{
    effective_link_speed, sample_failure_time, DeviceSpec, Interface, WeibullParams,
};
use crate::policy::{PolicyAssignment, SchedulePlan, TaskPolicy};
use crate::rng::{substream, DOMAIN_FAILURES};
use crate::{DeviceId, TaskId};

/// Safety valve against parameter sets where completion is implausible.
const EVENT_LIMIT: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("no common enabled interface between `{from}` and `{to}`")]
    NoRoute { from: DeviceId, to: DeviceId },
    #[error("deadlock: task `{task}` can no longer make progress")]
    Deadlock { task: TaskId },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("event budget exceeded after {0} events")]
    EventLimitExceeded(u64),
}

/// The four execution strategies under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Cluster-adaptive policy assignment.
    #[serde(rename = "ft_algo")]
    FtAlgo,
    /// Checkpoint every offloaded task (`C*`).
    #[serde(rename = "c_star")]
    CheckpointOnly,
    /// Replicate every offloaded task (`R*`).
    #[serde(rename = "r_star")]
    ReplicateOnly,
    /// No fault tolerance (`NoFT*`).
    #[serde(rename = "no_ft")]
    NoFt,
}

impl Strategy {
    pub const ALL: [Strategy; 4] =
        [Strategy::FtAlgo, Strategy::CheckpointOnly, Strategy::ReplicateOnly, Strategy::NoFt];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::FtAlgo => "ft_algo",
            Strategy::CheckpointOnly => "c_star",
            Strategy::ReplicateOnly => "r_star",
            Strategy::NoFt => "no_ft",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|st| st.label() == s)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Scenario-level simulation parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimParams {
    /// How long a failed device stays down, seconds.
    pub repair_delay_s: f64,
    /// Snapshot size as a fraction of the task's payload.
    pub snapshot_ratio: f64,
    /// Fixed checkpoint write cost; when unset it defaults to snapshot size
    /// divided by the link speed to the checkpoint store (the source).
    pub ckpt_cost_s: Option<f64>,
    /// Weibull shape shared by all devices; each device's scale is derived
    /// from its own MTBF.
    pub weibull_shape: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self { repair_delay_s: 10.0, snapshot_ratio: 1.0, ckpt_cost_s: None, weibull_shape: 1.21 }
    }
}

// ── Cost model ──────────────────────────────────────────────────────────────

/// Execution time in seconds: instructions over capability-scaled MIPS.
pub fn exec_time(task: &TaskSpec, dev: &DeviceSpec) -> f64 {
    task.instructions as f64 / (dev.cpu_speed_mips * dev.cpu_avail_fraction * 1e6)
}

/// Throughput of the best common enabled interface between two devices:
/// per interface the link runs at the slower endpoint.
pub fn link_speed_between(a: &DeviceSpec, b: &DeviceSpec) -> Result<f64, SimError> {
    let mut best = 0.0_f64;
    for iface in [Interface::Wifi, Interface::Ether] {
        best = best.max(effective_link_speed(a, iface).min(effective_link_speed(b, iface)));
    }
    if best > 0.0 {
        Ok(best)
    } else {
        Err(SimError::NoRoute { from: a.id.clone(), to: b.id.clone() })
    }
}

/// Transfer seconds: payload over the common link speed plus both endpoints'
/// latencies.
pub fn transfer_time(data_mb: f64, from: &DeviceSpec, to: &DeviceSpec) -> Result<f64, SimError> {
    Ok(data_mb / link_speed_between(from, to)? + from.latency_s + to.latency_s)
}

/// Checkpoint write cost `T_s`: the configured value, or snapshot size over
/// the link speed to the checkpoint store.
pub fn checkpoint_cost(
    task: &TaskSpec,
    dev: &DeviceSpec,
    source: &DeviceSpec,
    params: &SimParams,
) -> Result<f64, SimError> {
    if let Some(ts) = params.ckpt_cost_s {
        return Ok(ts);
    }
    if dev.id == source.id {
        return Ok(0.0);
    }
    Ok(params.snapshot_ratio * task.data_size_mb / link_speed_between(dev, source)?)
}

// ── Trace ───────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    TaskStart,
    TaskComplete,
    DeviceFail,
    DeviceRepair,
    CheckpointWrite,
    ReplicaDispatch,
    ReplicaCancel,
    RestartRequest,
}

impl TraceKind {
    pub fn name(self) -> &'static str {
        match self {
            TraceKind::TaskStart => "TaskStart",
            TraceKind::TaskComplete => "TaskComplete",
            TraceKind::DeviceFail => "DeviceFail",
            TraceKind::DeviceRepair => "DeviceRepair",
            TraceKind::CheckpointWrite => "CheckpointWrite",
            TraceKind::ReplicaDispatch => "ReplicaDispatch",
            TraceKind::ReplicaCancel => "ReplicaCancel",
            TraceKind::RestartRequest => "RestartRequest",
        }
    }

    /// Kinds that count as fault-tolerance control messages.
    pub fn is_ft_message(self) -> bool {
        matches!(
            self,
            TraceKind::CheckpointWrite | TraceKind::ReplicaDispatch | TraceKind::ReplicaCancel
        )
    }
}

#[derive(Debug, Clone)]
pub struct TraceEvent {
    pub time: f64,
    pub kind: TraceKind,
    pub task: Option<TaskId>,
    pub device: Option<DeviceId>,
}

/// A half-open span during which a device was occupied by task work.
#[derive(Debug, Clone)]
pub struct BusySegment {
    pub device: DeviceId,
    pub from: f64,
    pub to: f64,
}

/// Event trace of one run, suitable for diffing.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
    pub busy: Vec<BusySegment>,
    /// Failure times observed per population device, in order.
    pub device_failures: Vec<(DeviceId, Vec<f64>)>,
}

impl Trace {
    /// Line-oriented text form, one event per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&format!("{:.9} {}", e.time, e.kind.name()));
            if let Some(t) = &e.task {
                out.push_str(&format!(" task={t}"));
            }
            if let Some(d) = &e.device {
                out.push_str(&format!(" dev={d}"));
            }
            out.push('\n');
        }
        out
    }

    /// Recounts control messages from the events alone.
    pub fn ft_message_count(&self) -> u64 {
        self.events.iter().filter(|e| e.kind.is_ft_message()).count() as u64
    }
}

// ── Metrics ─────────────────────────────────────────────────────────────────

/// Metrics of a single application run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Time of the last task completion, seconds.
    pub completion_time_s: f64,
    /// Seconds of fault-tolerance work: checkpoint writes and snapshot
    /// transfers, replica input transfers, and the losing replica's consumed
    /// compute. Re-execution after failures is not overhead; it shows up in
    /// completion time.
    pub overhead_s: f64,
    /// Checkpoint-write, replica-dispatch, and replica-cancel messages.
    pub ft_messages: u64,
}

/// Per-strategy metrics over the runs of one scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyMetrics {
    pub strategy: Strategy,
    pub runs: Vec<RunMetrics>,
}

impl StrategyMetrics {
    pub fn mean_completion(&self) -> f64 {
        mean(self.runs.iter().map(|r| r.completion_time_s))
    }

    pub fn mean_overhead(&self) -> f64 {
        mean(self.runs.iter().map(|r| r.overhead_s))
    }

    pub fn mean_messages(&self) -> f64 {
        mean(self.runs.iter().map(|r| r.ft_messages as f64))
    }
}

/// Per-strategy and per-run metric breakdowns of one scenario execution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_strategy: Vec<StrategyMetrics>,
}

impl MetricsReport {
    pub fn strategy(&self, s: Strategy) -> Option<&StrategyMetrics> {
        self.per_strategy.iter().find(|m| m.strategy == s)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

// ── Engine ──────────────────────────────────────────────────────────────────

/// Inputs of one simulation run.
#[derive(Debug, Clone, Copy)]
pub struct SimSetup<'a> {
    pub dag: &'a AppDag,
    pub devices: &'a [DeviceSpec],
    pub source: &'a DeviceSpec,
    pub plan: &'a SchedulePlan,
    pub policy: &'a PolicyAssignment,
    pub params: &'a SimParams,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub trace: Trace,
}

/// Executes one application under the given plan and policy.
pub fn run(setup: &SimSetup) -> Result<RunOutput, SimError> {
    Engine::new(setup)?.run_to_completion()
}

#[derive(Debug, Clone, Copy)]
enum Ev {
    DeviceFail { dev: usize },
    CopyComplete { copy: usize, epoch: u64 },
    CkptReached { copy: usize, epoch: u64, progress: f64 },
    CkptWritten { copy: usize, epoch: u64, progress: f64 },
    SnapshotDone { copy: usize, epoch: u64, progress: f64 },
    DeviceRepair { dev: usize },
    TransferDone { copy: usize, epoch: u64 },
}

/// Queued event; equal-time events dequeue by kind rank (fail < complete <
/// checkpoint < others), then ascending ids, then insertion order. Failing
/// before completing at the same instant is the conservative choice.
struct QEvent {
    time: f64,
    rank: u8,
    key: (u32, u32),
    seq: u64,
    ev: Ev,
}

impl PartialEq for QEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for QEvent {}
impl PartialOrd for QEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.rank.cmp(&other.rank))
            .then(self.key.cmp(&other.key))
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    WaitingDeps,
    Queued,
    Transferring { started: f64 },
    Executing { seg_start: f64, seg_base: f64 },
    CkptWriting { started: f64 },
    CkptTransferring { started: f64 },
    WaitingRepair,
    Done,
}

struct CopyState {
    task: usize,
    dev: usize,
    is_replica: bool,
    epoch: u64,
    phase: Phase,
    /// Checkpointed progress in executed seconds.
    committed: f64,
    /// Compute seconds actually consumed, including lost attempts.
    executed: f64,
    started_once: bool,
    cancelled: bool,
    stuck: bool,
}

/// Per-copy constants resolved before the event loop.
struct CopyConsts {
    input_time: f64,
    exec_total: f64,
    ckpt_cost: f64,
    snapshot_time: f64,
    ckpt_interval: Option<f64>,
}

struct TaskState {
    pending_deps: usize,
    done: bool,
    dispatched: bool,
    primary: usize,
    replica: Option<usize>,
}

struct DevState {
    up: bool,
    closed: bool,
    avail_close: f64,
    weibull: Option<WeibullParams>,
    rng: Option<ChaCha8Rng>,
    occupant: Option<usize>,
    /// Waiting copies as (enqueue time, task, copy).
    queue: Vec<(f64, usize, usize)>,
}

struct Engine<'a> {
    dag: &'a AppDag,
    params: &'a SimParams,
    device_ids: Vec<DeviceId>,
    heap: BinaryHeap<Reverse<QEvent>>,
    seq: u64,
    popped: u64,
    copies: Vec<CopyState>,
    consts: Vec<CopyConsts>,
    tasks: Vec<TaskState>,
    devs: Vec<DevState>,
    done_count: usize,
    last_complete: f64,
    overhead: f64,
    messages: u64,
    events: Vec<TraceEvent>,
    busy: Vec<(usize, f64, f64)>,
    fail_times: Vec<Vec<f64>>,
}

impl<'a> Engine<'a> {
    fn new(setup: &SimSetup<'a>) -> Result<Self, SimError> {
        let dag = setup.dag;
        let n_dev = setup.devices.len();
        let source_idx = n_dev;

        let mut device_ids: Vec<DeviceId> = setup.devices.iter().map(|d| d.id.clone()).collect();
        device_ids.push(setup.source.id.clone());
        {
            let mut sorted = device_ids.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != device_ids.len() {
                return Err(SimError::InvalidPlan("duplicate device ids".into()));
            }
        }
        let dev_index = |id: &str| -> Result<usize, SimError> {
            setup
                .devices
                .iter()
                .position(|d| d.id == id)
                .ok_or_else(|| SimError::InvalidPlan(format!("unknown device `{id}`")))
        };
        let spec = |idx: usize| -> &DeviceSpec {
            if idx == source_idx {
                setup.source
            } else {
                &setup.devices[idx]
            }
        };

        // Resolve the host of each task: its planned device when offloaded,
        // the source otherwise.
        let mut assign = vec![source_idx; dag.len()];
        for (i, task) in dag.tasks().iter().enumerate() {
            if setup.plan.offload_set.contains(&task.id) {
                let dev_id = setup.plan.assignments.get(&task.id).ok_or_else(|| {
                    SimError::InvalidPlan(format!("offloaded task `{}` has no assignment", task.id))
                })?;
                assign[i] = dev_index(dev_id)?;
            }
        }

        let mut copies = Vec::new();
        let mut consts = Vec::new();
        let mut tasks = Vec::with_capacity(dag.len());
        for (i, task) in dag.tasks().iter().enumerate() {
            let policy = setup.policy.get(&task.id);
            if !matches!(policy, TaskPolicy::NoPolicy)
                && !setup.plan.offload_set.contains(&task.id)
            {
                return Err(SimError::InvalidPlan(format!(
                    "task `{}` has a fault-tolerance policy but is not offloaded",
                    task.id
                )));
            }
            let primary_dev = assign[i];
            let mut mk_copy = |dev: usize, is_replica: bool, ckpt_interval: Option<f64>|
             -> Result<usize, SimError> {
                let dev_spec = spec(dev);
                let input_time = if dev == source_idx {
                    0.0
                } else {
                    transfer_time(task.data_size_mb, setup.source, dev_spec)?
                };
                let snapshot_time = if ckpt_interval.is_some() && dev != source_idx {
                    transfer_time(setup.params.snapshot_ratio * task.data_size_mb, dev_spec, setup.source)?
                } else {
                    0.0
                };
                let ckpt_cost = if ckpt_interval.is_some() {
                    checkpoint_cost(task, dev_spec, setup.source, setup.params)?
                } else {
                    0.0
                };
                copies.push(CopyState {
                    task: i,
                    dev,
                    is_replica,
                    epoch: 0,
                    phase: Phase::WaitingDeps,
                    committed: 0.0,
                    executed: 0.0,
                    started_once: false,
                    cancelled: false,
                    stuck: false,
                });
                consts.push(CopyConsts {
                    input_time,
                    exec_total: exec_time(task, dev_spec),
                    ckpt_cost,
                    snapshot_time,
                    ckpt_interval,
                });
                Ok(copies.len() - 1)
            };
            let (primary, replica) = match policy {
                TaskPolicy::NoPolicy => (mk_copy(primary_dev, false, None)?, None),
                TaskPolicy::Checkpoint { interval_s } => {
                    if !(*interval_s > 0.0) {
                        return Err(SimError::InvalidPlan(format!(
                            "checkpoint interval for `{}` must be positive",
                            task.id
                        )));
                    }
                    (mk_copy(primary_dev, false, Some(*interval_s))?, None)
                }
                TaskPolicy::Replicate { replica_device } => {
                    let rdev = dev_index(replica_device)?;
                    if rdev == primary_dev {
                        return Err(SimError::InvalidPlan(format!(
                            "replica of `{}` targets its primary device",
                            task.id
                        )));
                    }
                    let p = mk_copy(primary_dev, false, None)?;
                    let r = mk_copy(rdev, true, None)?;
                    (p, Some(r))
                }
            };
            tasks.push(TaskState {
                pending_deps: dag.preds(i).len(),
                done: false,
                dispatched: false,
                primary,
                replica,
            });
        }

        let mut devs: Vec<DevState> = setup
            .devices
            .iter()
            .enumerate()
            .map(|(i, d)| DevState {
                up: true,
                closed: false,
                avail_close: d.avail_time_s,
                weibull: Some(WeibullParams::from_mean(setup.params.weibull_shape, d.mtbf_s)),
                rng: Some(substream(setup.seed, DOMAIN_FAILURES, i as u64)),
                occupant: None,
                queue: Vec::new(),
            })
            .collect();
        // The source never fails and has no availability window.
        devs.push(DevState {
            up: true,
            closed: false,
            avail_close: f64::INFINITY,
            weibull: None,
            rng: None,
            occupant: None,
            queue: Vec::new(),
        });

        let n_tasks = dag.len();
        let mut engine = Engine {
            dag,
            params: setup.params,
            device_ids,
            heap: BinaryHeap::new(),
            seq: 0,
            popped: 0,
            copies,
            consts,
            tasks,
            devs,
            done_count: 0,
            last_complete: 0.0,
            overhead: 0.0,
            messages: 0,
            events: Vec::new(),
            busy: Vec::new(),
            fail_times: vec![Vec::new(); n_dev],
        };

        for dev in 0..n_dev {
            engine.schedule_next_failure(dev, 0.0);
        }
        for t in 0..n_tasks {
            if engine.tasks[t].pending_deps == 0 {
                engine.dispatch_task(t, 0.0)?;
            }
        }
        Ok(engine)
    }

    fn run_to_completion(mut self) -> Result<RunOutput, SimError> {
        while self.done_count < self.dag.len() {
            let Reverse(qe) = match self.heap.pop() {
                Some(e) => e,
                None => {
                    let task = self.first_incomplete_task();
                    return Err(SimError::Deadlock { task });
                }
            };
            self.popped += 1;
            if self.popped > EVENT_LIMIT {
                return Err(SimError::EventLimitExceeded(self.popped));
            }
            let t = qe.time;
            match qe.ev {
                Ev::DeviceFail { dev } => self.on_device_fail(dev, t)?,
                Ev::DeviceRepair { dev } => self.on_device_repair(dev, t)?,
                Ev::TransferDone { copy, epoch } => self.on_transfer_done(copy, epoch, t),
                Ev::CkptReached { copy, epoch, progress } => {
                    self.on_ckpt_reached(copy, epoch, progress, t)
                }
                Ev::CkptWritten { copy, epoch, progress } => {
                    self.on_ckpt_written(copy, epoch, progress, t)
                }
                Ev::SnapshotDone { copy, epoch, progress } => {
                    self.on_snapshot_done(copy, epoch, progress, t)
                }
                Ev::CopyComplete { copy, epoch } => self.on_copy_complete(copy, epoch, t)?,
            }
        }

        let metrics = RunMetrics {
            completion_time_s: self.last_complete,
            overhead_s: self.overhead,
            ft_messages: self.messages,
        };
        let device_ids = self.device_ids;
        let busy = self
            .busy
            .into_iter()
            .map(|(d, from, to)| BusySegment { device: device_ids[d].clone(), from, to })
            .collect();
        let device_failures = self
            .fail_times
            .into_iter()
            .enumerate()
            .map(|(i, times)| (device_ids[i].clone(), times))
            .collect();
        let trace = Trace { events: self.events, busy, device_failures };
        Ok(RunOutput { metrics, trace })
    }

    fn first_incomplete_task(&self) -> TaskId {
        self.tasks
            .iter()
            .enumerate()
            .find(|(_, t)| !t.done)
            .map(|(i, _)| self.dag.task(i).id.clone())
            .expect("called only while incomplete tasks remain")
    }

    // ── scheduling helpers ──

    fn schedule(&mut self, time: f64, rank: u8, key: (u32, u32), ev: Ev) {
        self.seq += 1;
        self.heap.push(Reverse(QEvent { time, rank, key, seq: self.seq, ev }));
    }

    fn schedule_copy(&mut self, time: f64, rank: u8, copy: usize, ev: Ev) {
        let key = (self.copies[copy].task as u32, copy as u32);
        self.schedule(time, rank, key, ev);
    }

    fn schedule_next_failure(&mut self, dev: usize, now: f64) {
        let d = &mut self.devs[dev];
        let (Some(w), Some(rng)) = (d.weibull, d.rng.as_mut()) else { return };
        let at = (now + sample_failure_time(w, rng)).min(d.avail_close);
        self.schedule(at, 0, (dev as u32, u32::MAX), Ev::DeviceFail { dev });
    }

    fn trace_event(&mut self, time: f64, kind: TraceKind, task: Option<usize>, dev: Option<usize>) {
        self.events.push(TraceEvent {
            time,
            kind,
            task: task.map(|t| self.dag.task(t).id.clone()),
            device: dev.map(|d| self.device_ids[d].clone()),
        });
    }

    fn stale(&self, copy: usize, epoch: u64) -> bool {
        self.copies[copy].cancelled || self.copies[copy].epoch != epoch
    }

    // ── task dispatch and device occupancy ──

    fn dispatch_task(&mut self, task: usize, now: f64) -> Result<(), SimError> {
        self.tasks[task].dispatched = true;
        let primary = self.tasks[task].primary;
        let replica = self.tasks[task].replica;
        if let Some(r) = replica {
            self.messages += 1;
            let rdev = self.copies[r].dev;
            self.trace_event(now, TraceKind::ReplicaDispatch, Some(task), Some(rdev));
        }
        let mut touched = Vec::new();
        for copy in [Some(primary), replica].into_iter().flatten() {
            let dev = self.copies[copy].dev;
            self.copies[copy].phase = Phase::Queued;
            self.devs[dev].queue.push((now, task, copy));
            if self.devs[dev].closed {
                self.copies[copy].stuck = true;
            }
            touched.push(dev);
        }
        self.check_viability(task)?;
        for dev in touched {
            self.try_start_next(dev, now);
        }
        Ok(())
    }

    fn try_start_next(&mut self, dev: usize, now: f64) {
        loop {
            {
                let d = &self.devs[dev];
                if !d.up || d.closed || d.occupant.is_some() || d.queue.is_empty() {
                    return;
                }
            }
            let best = self.devs[dev]
                .queue
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
                })
                .map(|(i, _)| i)
                .expect("queue not empty");
            let (_, task, copy) = self.devs[dev].queue.remove(best);
            if self.copies[copy].cancelled {
                continue;
            }
            self.devs[dev].occupant = Some(copy);
            if !self.copies[copy].started_once {
                self.copies[copy].started_once = true;
                self.trace_event(now, TraceKind::TaskStart, Some(task), Some(dev));
            }
            self.begin_transfer(copy, now);
            return;
        }
    }

    fn begin_transfer(&mut self, copy: usize, now: f64) {
        self.copies[copy].phase = Phase::Transferring { started: now };
        let epoch = self.copies[copy].epoch;
        let at = now + self.consts[copy].input_time;
        self.schedule_copy(at, 4, copy, Ev::TransferDone { copy, epoch });
    }

    fn begin_exec(&mut self, copy: usize, now: f64, from: f64) {
        let total = self.consts[copy].exec_total;
        let epoch = self.copies[copy].epoch;
        self.copies[copy].phase = Phase::Executing { seg_start: now, seg_base: from };
        if let Some(tc) = self.consts[copy].ckpt_interval {
            // Next checkpoint strictly beyond current progress and strictly
            // before completion; a checkpoint at the finish line is useless.
            let next_p = ((from / tc + 1e-9).floor() + 1.0) * tc;
            if next_p < total - 1e-12 {
                self.schedule_copy(
                    now + (next_p - from),
                    2,
                    copy,
                    Ev::CkptReached { copy, epoch, progress: next_p },
                );
                return;
            }
        }
        self.schedule_copy(now + (total - from), 1, copy, Ev::CopyComplete { copy, epoch });
    }

    // ── event handlers ──

    fn on_device_fail(&mut self, dev: usize, now: f64) -> Result<(), SimError> {
        if self.devs[dev].closed {
            return Ok(());
        }
        self.fail_times[dev].push(now);
        self.trace_event(now, TraceKind::DeviceFail, None, Some(dev));
        let permanent = now >= self.devs[dev].avail_close;
        self.devs[dev].up = false;
        if let Some(copy) = self.devs[dev].occupant {
            self.interrupt_copy(copy, now);
        }
        if permanent {
            self.close_device(dev)?;
        } else {
            let at = now + self.params.repair_delay_s;
            self.schedule(at, 3, (dev as u32, u32::MAX), Ev::DeviceRepair { dev });
        }
        Ok(())
    }

    fn on_device_repair(&mut self, dev: usize, now: f64) -> Result<(), SimError> {
        if self.devs[dev].closed {
            return Ok(());
        }
        if now >= self.devs[dev].avail_close {
            // The window closed while the device was down; it never returns.
            return self.close_device(dev);
        }
        self.devs[dev].up = true;
        self.trace_event(now, TraceKind::DeviceRepair, None, Some(dev));
        self.schedule_next_failure(dev, now);
        if let Some(copy) = self.devs[dev].occupant {
            debug_assert_eq!(self.copies[copy].phase, Phase::WaitingRepair);
            let task = self.copies[copy].task;
            self.trace_event(now, TraceKind::RestartRequest, Some(task), Some(dev));
            let committed = self.copies[copy].committed;
            if committed > 0.0 {
                self.begin_exec(copy, now, committed);
            } else {
                self.begin_transfer(copy, now);
            }
        } else {
            self.try_start_next(dev, now);
        }
        Ok(())
    }

    fn close_device(&mut self, dev: usize) -> Result<(), SimError> {
        self.devs[dev].closed = true;
        self.devs[dev].up = false;
        let mut affected = Vec::new();
        if let Some(copy) = self.devs[dev].occupant {
            self.copies[copy].stuck = true;
            affected.push(self.copies[copy].task);
        }
        for &(_, task, copy) in &self.devs[dev].queue {
            self.copies[copy].stuck = true;
            affected.push(task);
        }
        for task in affected {
            self.check_viability(task)?;
        }
        Ok(())
    }

    fn check_viability(&self, task: usize) -> Result<(), SimError> {
        let t = &self.tasks[task];
        if t.done {
            return Ok(());
        }
        let alive = [Some(t.primary), t.replica]
            .into_iter()
            .flatten()
            .any(|c| !self.copies[c].cancelled && !self.copies[c].stuck);
        if alive {
            Ok(())
        } else {
            Err(SimError::Deadlock { task: self.dag.task(task).id.clone() })
        }
    }

    fn interrupt_copy(&mut self, copy: usize, now: f64) {
        let dev = self.copies[copy].dev;
        match self.copies[copy].phase {
            Phase::Transferring { started }
            | Phase::CkptWriting { started }
            | Phase::CkptTransferring { started } => {
                self.busy.push((dev, started, now));
            }
            Phase::Executing { seg_start, .. } => {
                self.busy.push((dev, seg_start, now));
                self.copies[copy].executed += now - seg_start;
            }
            _ => {}
        }
        self.copies[copy].phase = Phase::WaitingRepair;
        self.copies[copy].epoch += 1;
    }

    fn on_transfer_done(&mut self, copy: usize, epoch: u64, now: f64) {
        if self.stale(copy, epoch) {
            return;
        }
        let Phase::Transferring { started } = self.copies[copy].phase else {
            unreachable!("transfer completion in phase {:?}", self.copies[copy].phase)
        };
        let dev = self.copies[copy].dev;
        self.busy.push((dev, started, now));
        if self.copies[copy].is_replica {
            self.overhead += self.consts[copy].input_time;
        }
        let committed = self.copies[copy].committed;
        self.begin_exec(copy, now, committed);
    }

    fn on_ckpt_reached(&mut self, copy: usize, epoch: u64, progress: f64, now: f64) {
        if self.stale(copy, epoch) {
            return;
        }
        let Phase::Executing { seg_start, seg_base } = self.copies[copy].phase else {
            unreachable!("checkpoint trigger in phase {:?}", self.copies[copy].phase)
        };
        let dev = self.copies[copy].dev;
        self.busy.push((dev, seg_start, now));
        self.copies[copy].executed += progress - seg_base;
        self.copies[copy].phase = Phase::CkptWriting { started: now };
        self.messages += 1;
        let task = self.copies[copy].task;
        self.trace_event(now, TraceKind::CheckpointWrite, Some(task), Some(dev));
        let at = now + self.consts[copy].ckpt_cost;
        self.schedule_copy(at, 2, copy, Ev::CkptWritten { copy, epoch, progress });
    }

    fn on_ckpt_written(&mut self, copy: usize, epoch: u64, progress: f64, now: f64) {
        if self.stale(copy, epoch) {
            return;
        }
        let Phase::CkptWriting { started } = self.copies[copy].phase else {
            unreachable!("checkpoint write completion in phase {:?}", self.copies[copy].phase)
        };
        let dev = self.copies[copy].dev;
        self.busy.push((dev, started, now));
        self.overhead += self.consts[copy].ckpt_cost;
        self.copies[copy].phase = Phase::CkptTransferring { started: now };
        let at = now + self.consts[copy].snapshot_time;
        self.schedule_copy(at, 2, copy, Ev::SnapshotDone { copy, epoch, progress });
    }

    fn on_snapshot_done(&mut self, copy: usize, epoch: u64, progress: f64, now: f64) {
        if self.stale(copy, epoch) {
            return;
        }
        let Phase::CkptTransferring { started } = self.copies[copy].phase else {
            unreachable!("snapshot completion in phase {:?}", self.copies[copy].phase)
        };
        let dev = self.copies[copy].dev;
        self.busy.push((dev, started, now));
        self.overhead += self.consts[copy].snapshot_time;
        self.copies[copy].committed = progress;
        self.begin_exec(copy, now, progress);
    }

    fn on_copy_complete(&mut self, copy: usize, epoch: u64, now: f64) -> Result<(), SimError> {
        if self.stale(copy, epoch) {
            return Ok(());
        }
        let Phase::Executing { seg_start, seg_base } = self.copies[copy].phase else {
            unreachable!("completion in phase {:?}", self.copies[copy].phase)
        };
        let dev = self.copies[copy].dev;
        let task = self.copies[copy].task;
        self.busy.push((dev, seg_start, now));
        self.copies[copy].executed += self.consts[copy].exec_total - seg_base;
        self.copies[copy].phase = Phase::Done;

        self.tasks[task].done = true;
        self.done_count += 1;
        self.last_complete = self.last_complete.max(now);
        self.trace_event(now, TraceKind::TaskComplete, Some(task), Some(dev));
        self.devs[dev].occupant = None;

        // First completion wins; stop the losing replica.
        let sibling = [Some(self.tasks[task].primary), self.tasks[task].replica]
            .into_iter()
            .flatten()
            .find(|&c| c != copy);
        if let Some(loser) = sibling {
            if !self.copies[loser].cancelled && self.copies[loser].phase != Phase::Done {
                self.cancel_copy(loser, now);
            }
        }

        // Unlock dependents, then backfill freed devices.
        let succs: Vec<usize> = self.dag.succs(task).to_vec();
        for s in succs {
            self.tasks[s].pending_deps -= 1;
            if self.tasks[s].pending_deps == 0 && !self.tasks[s].dispatched {
                self.dispatch_task(s, now)?;
            }
        }
        self.try_start_next(dev, now);
        Ok(())
    }

    fn cancel_copy(&mut self, copy: usize, now: f64) {
        let dev = self.copies[copy].dev;
        let task = self.copies[copy].task;
        self.messages += 1;
        self.trace_event(now, TraceKind::ReplicaCancel, Some(task), Some(dev));
        match self.copies[copy].phase {
            Phase::Executing { seg_start, .. } => {
                self.busy.push((dev, seg_start, now));
                self.copies[copy].executed += now - seg_start;
            }
            Phase::Transferring { started } => {
                self.busy.push((dev, started, now));
            }
            _ => {}
        }
        self.copies[copy].cancelled = true;
        self.copies[copy].epoch += 1;
        self.copies[copy].phase = Phase::Done;
        // The loser's consumed compute is fault-tolerance overhead.
        self.overhead += self.copies[copy].executed;
        if self.devs[dev].occupant == Some(copy) {
            self.devs[dev].occupant = None;
            self.try_start_next(dev, now);
        } else {
            self.devs[dev].queue.retain(|&(_, _, c)| c != copy);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::TaskSpec;
    use crate::policy::{PolicyAssignment, SchedulePlan, TaskPolicy};

    fn device(id: &str, mtbf: f64) -> DeviceSpec {
        DeviceSpec {
            id: id.into(),
            cpu_speed_mips: 1000.0,
            cpu_avail_fraction: 1.0,
            battery: 1.0,
            has_wifi: true,
            has_ether: false,
            bandwidth_wifi_mbps: 1.0,
            bandwidth_ether_mbps: 0.0,
            latency_s: 0.0,
            avail_time_s: 1e9,
            mtbf_s: mtbf,
            per_conn_rate_mbps: 0.1,
            conn_count: 0,
            tasks_failed: 0,
            tasks_total: 0,
            peers_connected: 0,
        }
    }

    /// MTBF large enough that no failure lands within any test horizon.
    const NO_FAILURES: f64 = 1e12;

    fn params() -> SimParams {
        SimParams { repair_delay_s: 10.0, snapshot_ratio: 1.0, ckpt_cost_s: None, weibull_shape: 1.21 }
    }

    fn plan_all(dag: &AppDag, dev: &str) -> SchedulePlan {
        let mut plan = SchedulePlan::default();
        for t in dag.tasks() {
            plan.assignments.insert(t.id.clone(), dev.into());
            plan.offload_set.insert(t.id.clone());
        }
        plan
    }

    #[test]
    fn exec_time_unit_arithmetic() {
        let mut d = device("d", 100.0);
        let t = TaskSpec::new("t", 100_000, 1.0);
        assert!((exec_time(&t, &d) - 1e-4).abs() < 1e-18);
        d.cpu_avail_fraction = 0.5;
        assert!((exec_time(&t, &d) - 2e-4).abs() < 1e-18);
        // Purity: repeated calls agree exactly.
        assert_eq!(exec_time(&t, &d), exec_time(&t, &d));
    }

    #[test]
    fn transfer_time_values() {
        let mut a = device("a", 100.0);
        let mut b = device("b", 100.0);
        assert!((transfer_time(1.0, &a, &b).unwrap() - 1.0).abs() < 1e-12);
        a.latency_s = 0.05;
        b.latency_s = 0.05;
        assert!((transfer_time(0.0, &a, &b).unwrap() - 0.1).abs() < 1e-12);
        a.bandwidth_wifi_mbps = 0.9;
        b.bandwidth_wifi_mbps = 1.2;
        let t = transfer_time(10.0, &a, &b).unwrap();
        assert!((t - (10.0 / 0.9 + 0.1)).abs() < 1e-9);
        assert!((t - 11.211).abs() < 1e-3);
    }

    #[test]
    fn transfer_no_common_interface() {
        let a = device("a", 100.0);
        let mut b = device("b", 100.0);
        b.has_wifi = false;
        b.has_ether = true;
        b.bandwidth_ether_mbps = 10.0;
        assert!(matches!(transfer_time(1.0, &a, &b), Err(SimError::NoRoute { .. })));
    }

    #[test]
    fn chain_without_failures() {
        // B carries no payload, so completion = transfer(A) + exec(A) + exec(B).
        let tasks = vec![
            TaskSpec::new("A", 2_000_000_000, 3.0),
            TaskSpec::new("B", 1_000_000_000, 0.0).with_deps(["A"]),
        ];
        let dag = AppDag::new(tasks).unwrap();
        let devices = vec![device("d0", NO_FAILURES)];
        let source = device("src", NO_FAILURES);
        let plan = plan_all(&dag, "d0");
        let policy = PolicyAssignment::default();
        let p = params();
        let out = run(&SimSetup {
            dag: &dag,
            devices: &devices,
            source: &source,
            plan: &plan,
            policy: &policy,
            params: &p,
            seed: 1,
        })
        .unwrap();
        // transfer(A) = 3 MB / 1 MBps = 3 s; exec(A) = 2 s; exec(B) = 1 s.
        assert!((out.metrics.completion_time_s - 6.0).abs() < 1e-9);
        assert_eq!(out.metrics.ft_messages, 0);
        assert_eq!(out.metrics.overhead_s, 0.0);
        assert_eq!(out.trace.ft_message_count(), 0);
    }

    #[test]
    fn checkpoint_overhead_identity_without_failures() {
        let tasks = vec![TaskSpec::new("A", 10_000_000_000, 2.0)]; // exec 10 s
        let dag = AppDag::new(tasks).unwrap();
        let devices = vec![device("d0", NO_FAILURES)];
        let source = device("src", NO_FAILURES);
        let plan = plan_all(&dag, "d0");
        let p = params();

        let base = run(&SimSetup {
            dag: &dag,
            devices: &devices,
            source: &source,
            plan: &plan,
            policy: &PolicyAssignment::default(),
            params: &p,
            seed: 1,
        })
        .unwrap();

        let mut ckpt = PolicyAssignment::default();
        ckpt.insert("A".into(), TaskPolicy::Checkpoint { interval_s: 3.0 });
        let out = run(&SimSetup {
            dag: &dag,
            devices: &devices,
            source: &source,
            plan: &plan,
            policy: &ckpt,
            params: &p,
            seed: 1,
        })
        .unwrap();

        // Checkpoints at progress 3, 6, 9. Each costs T_s (2 MB / 1 MBps = 2 s
        // by the default cost rule) plus the snapshot transfer (2 s).
        let per_ckpt = 2.0 + 2.0;
        assert_eq!(out.metrics.ft_messages, 3);
        assert!((out.metrics.overhead_s - 3.0 * per_ckpt).abs() < 1e-9);
        assert!(
            (out.metrics.completion_time_s - (base.metrics.completion_time_s + 3.0 * per_ckpt))
                .abs()
                < 1e-9
        );
    }

    #[test]
    fn replication_first_completion_wins() {
        let tasks = vec![TaskSpec::new("A", 4_000_000_000, 1.0)];
        let dag = AppDag::new(tasks).unwrap();
        let mut fast = device("d0", NO_FAILURES);
        fast.cpu_speed_mips = 4000.0; // exec 1 s
        let slow = device("d1", NO_FAILURES); // exec 4 s
        let source = device("src", NO_FAILURES);
        // Primary on the slow device, replica on the fast one.
        let mut plan = SchedulePlan::default();
        plan.assignments.insert("A".into(), "d1".into());
        plan.offload_set.insert("A".into());
        let mut policy = PolicyAssignment::default();
        policy.insert("A".into(), TaskPolicy::Replicate { replica_device: "d0".into() });
        let p = params();
        let out = run(&SimSetup {
            dag: &dag,
            devices: &[fast, slow],
            source: &source,
            plan: &plan,
            policy: &policy,
            params: &p,
            seed: 1,
        })
        .unwrap();
        // Replica: 1 s transfer + 1 s exec = 2 s; primary would take 5 s.
        assert!((out.metrics.completion_time_s - 2.0).abs() < 1e-9);
        // Dispatch + cancel.
        assert_eq!(out.metrics.ft_messages, 2);
        // Overhead: replica transfer (1 s) + loser's consumed compute (1 s
        // of the primary's 4 s, cancelled at t=2 after its 1 s transfer).
        assert!((out.metrics.overhead_s - 2.0).abs() < 1e-9, "overhead {}", out.metrics.overhead_s);
        let kinds: Vec<TraceKind> = out.trace.events.iter().map(|e| e.kind).collect();
        assert!(kinds.contains(&TraceKind::ReplicaDispatch));
        assert!(kinds.contains(&TraceKind::ReplicaCancel));
    }

    #[test]
    fn non_offloaded_tasks_run_on_source() {
        let tasks = vec![TaskSpec::new("A", 1_000_000_000, 5.0)];
        let dag = AppDag::new(tasks).unwrap();
        let devices = vec![device("d0", NO_FAILURES)];
        let source = device("src", NO_FAILURES);
        let plan = SchedulePlan::default(); // nothing offloaded
        let p = params();
        let out = run(&SimSetup {
            dag: &dag,
            devices: &devices,
            source: &source,
            plan: &plan,
            policy: &PolicyAssignment::default(),
            params: &p,
            seed: 1,
        })
        .unwrap();
        // Local execution: no input transfer, just exec = 1 s.
        assert!((out.metrics.completion_time_s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn closed_window_is_deadlock() {
        let tasks = vec![TaskSpec::new("A", 20_000_000_000, 1.0)]; // exec 20 s
        let dag = AppDag::new(tasks).unwrap();
        let mut d = device("d0", NO_FAILURES);
        d.avail_time_s = 5.0; // closes before the task can finish
        let source = device("src", NO_FAILURES);
        let plan = plan_all(&dag, "d0");
        let p = params();
        let err = run(&SimSetup {
            dag: &dag,
            devices: &[d],
            source: &source,
            plan: &plan,
            policy: &PolicyAssignment::default(),
            params: &p,
            seed: 1,
        })
        .unwrap_err();
        assert!(matches!(err, SimError::Deadlock { task } if task == "A"));
    }

    #[test]
    fn replica_survives_primary_window_close() {
        let tasks = vec![TaskSpec::new("A", 8_000_000_000, 1.0)]; // exec 8 s
        let dag = AppDag::new(tasks).unwrap();
        let mut doomed = device("d0", NO_FAILURES);
        doomed.avail_time_s = 4.0;
        let healthy = device("d1", NO_FAILURES);
        let source = device("src", NO_FAILURES);
        let mut plan = SchedulePlan::default();
        plan.assignments.insert("A".into(), "d0".into());
        plan.offload_set.insert("A".into());
        let mut policy = PolicyAssignment::default();
        policy.insert("A".into(), TaskPolicy::Replicate { replica_device: "d1".into() });
        let p = params();
        let out = run(&SimSetup {
            dag: &dag,
            devices: &[doomed, healthy],
            source: &source,
            plan: &plan,
            policy: &policy,
            params: &p,
            seed: 1,
        })
        .unwrap();
        // The replica on d1 finishes: 1 s transfer + 8 s exec.
        assert!((out.metrics.completion_time_s - 9.0).abs() < 1e-9);
    }

    #[test]
    fn restarts_recover_under_failures() {
        let tasks = vec![
            TaskSpec::new("A", 3_000_000_000, 2.0),
            TaskSpec::new("B", 3_000_000_000, 2.0).with_deps(["A"]),
        ];
        let dag = AppDag::new(tasks).unwrap();
        let source = device("src", NO_FAILURES);
        let plan = plan_all(&dag, "d0");
        let p = params();
        let mut saw_restart = false;
        for seed in 0..6 {
            let devices = vec![device("d0", 4.0)]; // fails roughly every 4 s
            let out = run(&SimSetup {
                dag: &dag,
                devices: &devices,
                source: &source,
                plan: &plan,
                policy: &PolicyAssignment::default(),
                params: &p,
                seed,
            })
            .unwrap();
            // Without failures this takes 10 s; restarts can only delay it.
            assert!(out.metrics.completion_time_s >= 10.0 - 1e-9);
            assert_eq!(out.metrics.ft_messages, 0, "restarts are not control messages");
            let kinds: Vec<TraceKind> = out.trace.events.iter().map(|e| e.kind).collect();
            if kinds.contains(&TraceKind::RestartRequest) {
                saw_restart = true;
                assert!(out.metrics.completion_time_s > 10.0);
            }
        }
        assert!(saw_restart, "no seed produced a mid-task failure");
    }

    #[test]
    fn same_seed_identical_traces() {
        let tasks = vec![
            TaskSpec::new("A", 5_000_000_000, 2.0),
            TaskSpec::new("B", 2_000_000_000, 1.0).with_deps(["A"]),
            TaskSpec::new("C", 2_000_000_000, 1.0).with_deps(["A"]),
        ];
        let dag = AppDag::new(tasks).unwrap();
        let devices = vec![device("d0", 15.0), device("d1", 15.0)];
        let source = device("src", NO_FAILURES);
        let mut plan = SchedulePlan::default();
        plan.assignments.insert("A".into(), "d0".into());
        plan.assignments.insert("B".into(), "d1".into());
        plan.assignments.insert("C".into(), "d0".into());
        plan.offload_set = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        let mut policy = PolicyAssignment::default();
        policy.insert("A".into(), TaskPolicy::Checkpoint { interval_s: 2.0 });
        policy.insert("B".into(), TaskPolicy::Replicate { replica_device: "d0".into() });
        policy.insert("C".into(), TaskPolicy::NoPolicy);
        let p = params();
        let setup = SimSetup {
            dag: &dag,
            devices: &devices,
            source: &source,
            plan: &plan,
            policy: &policy,
            params: &p,
            seed: 42,
        };
        let a = run(&setup).unwrap();
        let b = run(&setup).unwrap();
        assert_eq!(a.trace.to_text(), b.trace.to_text());
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.metrics.ft_messages, a.trace.ft_message_count());
    }

    #[test]
    fn failure_schedule_ignores_strategy() {
        // Same seed, different policies: device failure timelines must match
        // on the common prefix (runs end at different times).
        let tasks = vec![TaskSpec::new("A", 6_000_000_000, 2.0)];
        let dag = AppDag::new(tasks).unwrap();
        let devices = vec![device("d0", 10.0), device("d1", 10.0)];
        let source = device("src", NO_FAILURES);
        let mut plan = SchedulePlan::default();
        plan.assignments.insert("A".into(), "d0".into());
        plan.offload_set.insert("A".into());
        let p = params();

        let no_ft = run(&SimSetup {
            dag: &dag,
            devices: &devices,
            source: &source,
            plan: &plan,
            policy: &PolicyAssignment::default(),
            params: &p,
            seed: 7,
        })
        .unwrap();
        let mut ckpt = PolicyAssignment::default();
        ckpt.insert("A".into(), TaskPolicy::Checkpoint { interval_s: 1.5 });
        let with_ckpt = run(&SimSetup {
            dag: &dag,
            devices: &devices,
            source: &source,
            plan: &plan,
            policy: &ckpt,
            params: &p,
            seed: 7,
        })
        .unwrap();

        for ((id_a, fa), (id_b, fb)) in
            no_ft.trace.device_failures.iter().zip(with_ckpt.trace.device_failures.iter())
        {
            assert_eq!(id_a, id_b);
            let common = fa.len().min(fb.len());
            assert_eq!(&fa[..common], &fb[..common], "failure schedules diverged on {id_a}");
        }
    }

    #[test]
    fn busy_intervals_never_overlap() {
        let tasks = vec![
            TaskSpec::new("A", 2_000_000_000, 1.0),
            TaskSpec::new("B", 3_000_000_000, 1.0),
            TaskSpec::new("C", 1_000_000_000, 1.0).with_deps(["A", "B"]),
        ];
        let dag = AppDag::new(tasks).unwrap();
        let devices = vec![device("d0", 12.0)];
        let source = device("src", NO_FAILURES);
        let plan = plan_all(&dag, "d0");
        let p = params();
        let out = run(&SimSetup {
            dag: &dag,
            devices: &devices,
            source: &source,
            plan: &plan,
            policy: &PolicyAssignment::default(),
            params: &p,
            seed: 9,
        })
        .unwrap();
        let mut segs: Vec<(f64, f64)> =
            out.trace.busy.iter().map(|b| (b.from, b.to)).collect();
        segs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in segs.windows(2) {
            assert!(w[0].1 <= w[1].0 + 1e-9, "overlap: {:?}", w);
        }
    }

    #[test]
    fn policy_on_non_offloaded_task_rejected() {
        let tasks = vec![TaskSpec::new("A", 1_000_000, 1.0)];
        let dag = AppDag::new(tasks).unwrap();
        let devices = vec![device("d0", NO_FAILURES)];
        let source = device("src", NO_FAILURES);
        let plan = SchedulePlan::default();
        let mut policy = PolicyAssignment::default();
        policy.insert("A".into(), TaskPolicy::Checkpoint { interval_s: 1.0 });
        let p = params();
        let err = run(&SimSetup {
            dag: &dag,
            devices: &devices,
            source: &source,
            plan: &plan,
            policy: &policy,
            params: &p,
            seed: 1,
        })
        .unwrap_err();
        assert!(matches!(err, SimError::InvalidPlan(_)));
    }

    #[test]
    fn empty_dag_completes_at_zero() {
        let dag = AppDag::new(Vec::new()).unwrap();
        let devices = vec![device("d0", NO_FAILURES)];
        let source = device("src", NO_FAILURES);
        let plan = SchedulePlan::default();
        let p = params();
        let out = run(&SimSetup {
            dag: &dag,
            devices: &devices,
            source: &source,
            plan: &plan,
            policy: &PolicyAssignment::default(),
            params: &p,
            seed: 1,
        })
        .unwrap();
        assert_eq!(out.metrics.completion_time_s, 0.0);
    }
}
