//! Fault-tolerance policy layer: replica scoring, checkpoint intervals, and
//! the cluster-adaptive policy assignment over a task offloading scheduling
//! plan (TOSP).
//!
//! For every offloaded task on the critical path, the assignment picks a
//! policy by the reliability cluster of its host: replication to the
//! lowest-score device of the low-reliability cluster, or checkpointing with
//! Young's interval `sqrt(2 * T_s * T_f)` on the high-reliability cluster.
//! Tasks off the critical path get no policy.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::split_by_reliability;
use crate::dag::{compute_schedule_times, critical_path, AppDag, DagError, TaskSpec};
use crate::device::{reliability, DeviceSpec, WeightsConfig};
use crate::sim::{checkpoint_cost, exec_time, transfer_time, SimError, SimParams, Strategy};
use crate::{DeviceId, TaskId};

/// Lower bound on checkpoint intervals; a zero checkpoint cost would
/// otherwise request continuous checkpointing.
pub const MIN_CHECKPOINT_INTERVAL_S: f64 = 1.0;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("offloaded task `{0}` has no device assignment in the plan")]
    UnassignedTask(TaskId),
    #[error("plan references unknown task `{0}`")]
    UnknownTask(TaskId),
    #[error("plan references unknown device `{0}`")]
    UnknownDevice(DeviceId),
    #[error("no replica candidate besides the primary device `{0}`")]
    NoCandidate(DeviceId),
    #[error(transparent)]
    Dag(#[from] DagError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Task-to-device assignments plus the set of tasks designated for
/// offloading. Tasks outside the offload set run locally on the source
/// device and never receive a fault-tolerance policy.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SchedulePlan {
    pub assignments: BTreeMap<TaskId, DeviceId>,
    pub offload_set: BTreeSet<TaskId>,
}

impl SchedulePlan {
    pub fn validate(&self, dag: &AppDag, devices: &[DeviceSpec]) -> Result<(), PolicyError> {
        let device_ids: BTreeSet<&str> = devices.iter().map(|d| d.id.as_str()).collect();
        for task in self.assignments.keys().chain(self.offload_set.iter()) {
            if dag.task_index(task).is_none() {
                return Err(PolicyError::UnknownTask(task.clone()));
            }
        }
        for task in &self.offload_set {
            let dev = self.assignments.get(task).ok_or_else(|| PolicyError::UnassignedTask(task.clone()))?;
            if !device_ids.contains(dev.as_str()) {
                return Err(PolicyError::UnknownDevice(dev.clone()));
            }
        }
        Ok(())
    }
}

/// Per-task fault-tolerance decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskPolicy {
    NoPolicy,
    Replicate { replica_device: DeviceId },
    Checkpoint { interval_s: f64 },
}

/// Fault-tolerance decisions for every offloaded task.
#[derive(Debug, Clone, Default)]
pub struct PolicyAssignment {
    per_task: BTreeMap<TaskId, TaskPolicy>,
}

impl PolicyAssignment {
    pub fn get(&self, task: &str) -> &TaskPolicy {
        self.per_task.get(task).unwrap_or(&TaskPolicy::NoPolicy)
    }

    pub fn insert(&mut self, task: TaskId, policy: TaskPolicy) {
        self.per_task.insert(task, policy);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TaskId, &TaskPolicy)> {
        self.per_task.iter()
    }

    pub fn len(&self) -> usize {
        self.per_task.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_task.is_empty()
    }
}

/// Operation counters from one policy assignment, for checking the
/// O(m + m*n) cost bound.
#[derive(Debug, Clone, Copy, Default)]
pub struct PolicyStats {
    /// Reliability evaluations performed (one per device).
    pub reliability_evals: usize,
    /// Replica-score evaluations performed in total.
    pub score_evals_total: usize,
    /// Largest number of score evaluations spent on a single critical task.
    pub max_score_evals_per_task: usize,
    /// Number of offloaded tasks found on the critical path.
    pub critical_offloaded_tasks: usize,
}

/// Replica score of one candidate device: the weighted product of estimated
/// task completion time, historical failure ratio, and connectivity ratio.
/// The lowest score marks the most attractive replica host. A device with no
/// execution history contributes failure ratio 0.
pub fn replication_score(
    dev: &DeviceSpec,
    task_time_s: f64,
    cluster_size: usize,
    w: &WeightsConfig,
) -> f64 {
    let failure_ratio = if dev.tasks_total == 0 {
        0.0
    } else {
        dev.tasks_failed as f64 / dev.tasks_total as f64
    };
    let conn_ratio = dev.peers_connected as f64 / cluster_size as f64;
    (w.score_y * task_time_s) * (w.score_z * failure_ratio) * (w.score_lambda * conn_ratio)
}

/// Winning replica candidate plus the number of score evaluations spent.
#[derive(Debug, Clone)]
pub struct ReplicaChoice {
    pub device: DeviceId,
    pub score: f64,
    pub score_evals: usize,
}

/// Picks the lowest-score device of a cluster as replica host, excluding the
/// task's primary device. The estimated completion time on a candidate is its
/// execution time plus the replica input transfer from the source. Ties break
/// to the lowest device id.
pub fn select_replica_device(
    cluster: &[&DeviceSpec],
    task: &TaskSpec,
    source: &DeviceSpec,
    primary: &str,
    w: &WeightsConfig,
) -> Result<ReplicaChoice, PolicyError> {
    let cluster_size = cluster.len();
    let mut best: Option<(f64, &DeviceSpec)> = None;
    let mut evals = 0;
    for dev in cluster {
        if dev.id == primary {
            continue;
        }
        let task_time = exec_time(task, dev) + transfer_time(task.data_size_mb, source, dev)?;
        let score = replication_score(dev, task_time, cluster_size, w);
        evals += 1;
        best = match best {
            None => Some((score, dev)),
            Some((s, d)) if score < s || (score == s && dev.id < d.id) => Some((score, dev)),
            keep => keep,
        };
    }
    match best {
        Some((score, dev)) => {
            Ok(ReplicaChoice { device: dev.id.clone(), score, score_evals: evals })
        }
        None => Err(PolicyError::NoCandidate(primary.to_string())),
    }
}

/// Young's first-order checkpoint interval: `sqrt(2 * T_s * T_f)`.
pub fn checkpoint_interval(ckpt_cost_s: f64, time_between_failures_s: f64) -> f64 {
    (2.0 * ckpt_cost_s * time_between_failures_s).sqrt()
}

fn clamped_interval(ts: f64, tf: f64) -> f64 {
    checkpoint_interval(ts, tf).max(MIN_CHECKPOINT_INTERVAL_S)
}

/// Estimated execution times on the devices assigned by the plan; tasks
/// outside the offload set execute on the source.
pub fn planned_exec_times(
    dag: &AppDag,
    plan: &SchedulePlan,
    devices: &[DeviceSpec],
    source: &DeviceSpec,
) -> Result<BTreeMap<TaskId, f64>, PolicyError> {
    let by_id: BTreeMap<&str, &DeviceSpec> = devices.iter().map(|d| (d.id.as_str(), d)).collect();
    let mut exec = BTreeMap::new();
    for task in dag.tasks() {
        let dev = if plan.offload_set.contains(&task.id) {
            let id = plan
                .assignments
                .get(&task.id)
                .ok_or_else(|| PolicyError::UnassignedTask(task.id.clone()))?;
            *by_id.get(id.as_str()).ok_or_else(|| PolicyError::UnknownDevice(id.clone()))?
        } else {
            source
        };
        exec.insert(task.id.clone(), exec_time(task, dev));
    }
    Ok(exec)
}

/// The cluster-adaptive fault-tolerance assignment: score every device,
/// split into reliability clusters, and protect each critical offloaded task
/// with replication (low cluster) or checkpointing (high cluster). If the low
/// cluster offers no candidate besides the primary, the task falls back to a
/// checkpoint on the primary device.
pub fn assign_policies(
    devices: &[DeviceSpec],
    source: &DeviceSpec,
    dag: &AppDag,
    plan: &SchedulePlan,
    w: &WeightsConfig,
    params: &SimParams,
    seed: u64,
) -> Result<(PolicyAssignment, PolicyStats), PolicyError> {
    plan.validate(dag, devices)?;
    let mut stats = PolicyStats::default();

    let scored: Vec<(DeviceId, f64)> = devices
        .iter()
        .map(|d| {
            stats.reliability_evals += 1;
            (d.id.clone(), reliability(d, w).reliability)
        })
        .collect();
    let split = split_by_reliability(&scored, seed);

    let exec = planned_exec_times(dag, plan, devices, source)?;
    let times = compute_schedule_times(dag, &exec)?;
    let critical = critical_path(dag, &times);

    let by_id: BTreeMap<&str, &DeviceSpec> = devices.iter().map(|d| (d.id.as_str(), d)).collect();
    let low_cluster: Vec<&DeviceSpec> =
        devices.iter().filter(|d| split.low.contains(&d.id)).collect();

    let mut assignment = PolicyAssignment::default();
    for task_id in &plan.offload_set {
        if !critical.contains(task_id) {
            assignment.insert(task_id.clone(), TaskPolicy::NoPolicy);
            continue;
        }
        stats.critical_offloaded_tasks += 1;
        let dev_id = &plan.assignments[task_id];
        let dev = by_id[dev_id.as_str()];
        let task = dag.task(dag.task_index(task_id).expect("validated"));
        let ckpt = || -> Result<TaskPolicy, PolicyError> {
            let ts = checkpoint_cost(task, dev, source, params)?;
            Ok(TaskPolicy::Checkpoint { interval_s: clamped_interval(ts, dev.mtbf_s) })
        };
        let policy = if split.is_high(dev_id) {
            ckpt()?
        } else {
            match select_replica_device(&low_cluster, task, source, dev_id, w) {
                Ok(choice) => {
                    stats.score_evals_total += choice.score_evals;
                    stats.max_score_evals_per_task =
                        stats.max_score_evals_per_task.max(choice.score_evals);
                    TaskPolicy::Replicate { replica_device: choice.device }
                }
                Err(PolicyError::NoCandidate(_)) => ckpt()?,
                Err(e) => return Err(e),
            }
        };
        assignment.insert(task_id.clone(), policy);
    }
    Ok((assignment, stats))
}

/// Builds the effective policy for a strategy. The baselines apply one
/// mechanism to every offloaded task: `c_star` checkpoints each on its
/// assigned device, `r_star` replicates each to the lowest-score device of
/// the whole population, and `no_ft` leaves everything unprotected.
pub fn build_policy(
    strategy: Strategy,
    devices: &[DeviceSpec],
    source: &DeviceSpec,
    dag: &AppDag,
    plan: &SchedulePlan,
    w: &WeightsConfig,
    params: &SimParams,
    seed: u64,
) -> Result<PolicyAssignment, PolicyError> {
    plan.validate(dag, devices)?;
    let by_id: BTreeMap<&str, &DeviceSpec> = devices.iter().map(|d| (d.id.as_str(), d)).collect();
    match strategy {
        Strategy::FtAlgo => Ok(assign_policies(devices, source, dag, plan, w, params, seed)?.0),
        Strategy::NoFt => {
            let mut assignment = PolicyAssignment::default();
            for task_id in &plan.offload_set {
                assignment.insert(task_id.clone(), TaskPolicy::NoPolicy);
            }
            Ok(assignment)
        }
        Strategy::CheckpointOnly => {
            let mut assignment = PolicyAssignment::default();
            for task_id in &plan.offload_set {
                let dev = by_id[plan.assignments[task_id].as_str()];
                let task = dag.task(dag.task_index(task_id).expect("validated"));
                let ts = checkpoint_cost(task, dev, source, params)?;
                assignment.insert(
                    task_id.clone(),
                    TaskPolicy::Checkpoint { interval_s: clamped_interval(ts, dev.mtbf_s) },
                );
            }
            Ok(assignment)
        }
        Strategy::ReplicateOnly => {
            let everyone: Vec<&DeviceSpec> = devices.iter().collect();
            let mut assignment = PolicyAssignment::default();
            for task_id in &plan.offload_set {
                let dev_id = &plan.assignments[task_id];
                let dev = by_id[dev_id.as_str()];
                let task = dag.task(dag.task_index(task_id).expect("validated"));
                let policy = match select_replica_device(&everyone, task, source, dev_id, w) {
                    Ok(choice) => TaskPolicy::Replicate { replica_device: choice.device },
                    Err(PolicyError::NoCandidate(_)) => {
                        let ts = checkpoint_cost(task, dev, source, params)?;
                        TaskPolicy::Checkpoint { interval_s: clamped_interval(ts, dev.mtbf_s) }
                    }
                    Err(e) => return Err(e),
                };
                assignment.insert(task_id.clone(), policy);
            }
            Ok(assignment)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::TaskSpec;

    fn device(id: &str, mtbf: f64, battery: f64, speed: f64) -> DeviceSpec {
        DeviceSpec {
            id: id.into(),
            cpu_speed_mips: speed,
            cpu_avail_fraction: 1.0,
            battery,
            has_wifi: true,
            has_ether: false,
            bandwidth_wifi_mbps: 1.0,
            bandwidth_ether_mbps: 0.0,
            latency_s: 0.0,
            avail_time_s: 1e8,
            mtbf_s: mtbf,
            per_conn_rate_mbps: 0.1,
            conn_count: 0,
            tasks_failed: 2,
            tasks_total: 10,
            peers_connected: 1,
        }
    }

    fn params() -> SimParams {
        SimParams {
            repair_delay_s: 10.0,
            snapshot_ratio: 1.0,
            ckpt_cost_s: Some(2.0),
            weibull_shape: 1.21,
        }
    }

    #[test]
    fn score_product_form() {
        let mut w = WeightsConfig::default(); // score weights 0.2 / 0.6 / 0.2
        w.score_y = 0.2;
        w.score_z = 0.6;
        w.score_lambda = 0.2;
        let mut d = device("d0", 100.0, 1.0, 1000.0);
        d.tasks_failed = 5;
        d.tasks_total = 10;
        d.peers_connected = 4;
        // (0.2*10) * (0.6*0.5) * (0.2*1) = 0.12
        let s = replication_score(&d, 10.0, 4, &w);
        assert!((s - 0.12).abs() < 1e-12);

        d.tasks_total = 0;
        d.tasks_failed = 0;
        assert_eq!(replication_score(&d, 10.0, 4, &w), 0.0);

        d.tasks_total = 10;
        d.tasks_failed = 0;
        assert_eq!(replication_score(&d, 10.0, 4, &w), 0.0);
    }

    #[test]
    fn replica_selection_argmin_and_ties() {
        let w = WeightsConfig::default();
        let source = device("src", 100.0, 1.0, 1000.0);
        let task = TaskSpec::new("t", 1_000_000, 1.0);
        let mut a = device("a", 100.0, 1.0, 1000.0);
        let mut b = device("b", 100.0, 1.0, 1000.0);
        a.tasks_failed = 1; // lower failure ratio -> lower score
        b.tasks_failed = 5;
        let cluster = [&a, &b];
        let choice = select_replica_device(&cluster, &task, &source, "zzz", &w).unwrap();
        assert_eq!(choice.device, "a");
        assert_eq!(choice.score_evals, 2);

        // All candidates tie -> lowest id.
        b.tasks_failed = 1;
        let cluster = [&b, &a];
        let choice = select_replica_device(&cluster, &task, &source, "zzz", &w).unwrap();
        assert_eq!(choice.device, "a");

        // Only the primary in the cluster -> no candidate.
        let only = [&a];
        assert!(matches!(
            select_replica_device(&only, &task, &source, "a", &w),
            Err(PolicyError::NoCandidate(_))
        ));
    }

    #[test]
    fn replica_selection_invariant_under_weight_scaling() {
        // The score is a pure product, so scaling all three weights by one
        // positive factor rescales every candidate equally.
        let mut w1 = WeightsConfig::default();
        w1.score_y = 0.2;
        w1.score_z = 0.6;
        w1.score_lambda = 0.2;
        let mut w2 = w1;
        // Not normalized on purpose; selection must not care.
        w2.score_y *= 3.0;
        w2.score_z *= 3.0;
        w2.score_lambda *= 3.0;
        let source = device("src", 100.0, 1.0, 1000.0);
        let task = TaskSpec::new("t", 5_000_000, 2.0);
        let devs: Vec<DeviceSpec> = (0..6)
            .map(|i| {
                let mut d = device(&format!("d{i}"), 100.0, 1.0, 500.0 + 300.0 * i as f64);
                d.tasks_failed = i as u32;
                d.tasks_total = 10;
                d.peers_connected = (5 - i) as u32;
                d
            })
            .collect();
        let cluster: Vec<&DeviceSpec> = devs.iter().collect();
        let c1 = select_replica_device(&cluster, &task, &source, "d0", &w1).unwrap();
        let c2 = select_replica_device(&cluster, &task, &source, "d0", &w2).unwrap();
        assert_eq!(c1.device, c2.device);
    }

    #[test]
    fn interval_values() {
        assert_eq!(checkpoint_interval(2.0, 100.0), 20.0);
        assert_eq!(checkpoint_interval(0.0, 50.0), 0.0);
        let t = checkpoint_interval(4.5, 94.08);
        assert!((t - 846.72_f64.sqrt()).abs() < 1e-12);
        assert!((t - 29.098).abs() < 1e-3);
        // Degenerate cost clamps at the interval floor when assigned.
        assert_eq!(clamped_interval(0.0, 50.0), MIN_CHECKPOINT_INTERVAL_S);
    }

    fn two_device_setup() -> (Vec<DeviceSpec>, DeviceSpec, AppDag, SchedulePlan) {
        // "hi" is clearly more reliable than "lo".
        let hi = device("hi", 120.0, 1.0, 2000.0);
        let mut lo = device("lo", 10.0, 0.2, 1000.0);
        lo.conn_count = 3;
        // A second low device so replication has a candidate.
        let mut lo2 = device("lo2", 12.0, 0.25, 900.0);
        lo2.conn_count = 3;
        let source = device("src", 100.0, 1.0, 1000.0);
        let tasks = vec![
            TaskSpec::new("t0", 2_000_000_000, 1.0),
            TaskSpec::new("t1", 2_000_000_000, 1.0).with_deps(["t0"]),
            TaskSpec::new("t2", 1_000, 1.0).with_deps(["t0"]),
        ];
        let dag = AppDag::new(tasks).unwrap();
        let mut plan = SchedulePlan::default();
        plan.assignments.insert("t0".into(), "hi".into());
        plan.assignments.insert("t1".into(), "lo".into());
        plan.assignments.insert("t2".into(), "lo2".into());
        plan.offload_set = ["t0", "t1", "t2"].iter().map(|s| s.to_string()).collect();
        (vec![hi, lo, lo2], source, dag, plan)
    }

    #[test]
    fn routing_by_cluster_membership() {
        let (devices, source, dag, plan) = two_device_setup();
        let w = WeightsConfig::default();
        let (policy, stats) =
            assign_policies(&devices, &source, &dag, &plan, &w, &params(), 0).unwrap();
        // t0 runs on the high-reliability device: checkpoint with Young's interval.
        match policy.get("t0") {
            TaskPolicy::Checkpoint { interval_s } => {
                let expect = checkpoint_interval(2.0, 120.0).max(MIN_CHECKPOINT_INTERVAL_S);
                assert!((interval_s - expect).abs() < 1e-12);
            }
            other => panic!("expected checkpoint for t0, got {other:?}"),
        }
        // t1 runs on a low-reliability device: replicate within the low cluster.
        match policy.get("t1") {
            TaskPolicy::Replicate { replica_device } => {
                assert_eq!(replica_device, "lo2");
            }
            other => panic!("expected replicate for t1, got {other:?}"),
        }
        // t2 is off the critical path: no policy.
        assert_eq!(policy.get("t2"), &TaskPolicy::NoPolicy);
        assert_eq!(stats.reliability_evals, devices.len());
        assert!(stats.max_score_evals_per_task <= devices.len());
    }

    #[test]
    fn lone_low_device_falls_back_to_checkpoint() {
        let (mut devices, source, dag, mut plan) = two_device_setup();
        devices.retain(|d| d.id != "lo2"); // only one low-reliability device left
        plan.assignments.insert("t2".into(), "lo".into());
        let w = WeightsConfig::default();
        let (policy, _) = assign_policies(&devices, &source, &dag, &plan, &w, &params(), 0).unwrap();
        assert!(matches!(policy.get("t1"), TaskPolicy::Checkpoint { .. }));
    }

    #[test]
    fn empty_offload_set_empty_assignment() {
        let (devices, source, dag, mut plan) = two_device_setup();
        plan.offload_set.clear();
        let w = WeightsConfig::default();
        let (policy, stats) =
            assign_policies(&devices, &source, &dag, &plan, &w, &params(), 0).unwrap();
        assert!(policy.is_empty());
        assert_eq!(stats.critical_offloaded_tasks, 0);
        // Clustering still ran over the whole population.
        assert_eq!(stats.reliability_evals, devices.len());
    }

    #[test]
    fn baseline_policies_cover_offload_set() {
        let (devices, source, dag, plan) = two_device_setup();
        let w = WeightsConfig::default();
        let p = params();
        for strategy in [Strategy::NoFt, Strategy::CheckpointOnly, Strategy::ReplicateOnly] {
            let policy =
                build_policy(strategy, &devices, &source, &dag, &plan, &w, &p, 0).unwrap();
            assert_eq!(policy.len(), plan.offload_set.len());
            for (task, tp) in policy.iter() {
                match strategy {
                    Strategy::NoFt => assert_eq!(tp, &TaskPolicy::NoPolicy),
                    Strategy::CheckpointOnly => {
                        assert!(matches!(tp, TaskPolicy::Checkpoint { interval_s } if *interval_s > 0.0))
                    }
                    Strategy::ReplicateOnly => match tp {
                        TaskPolicy::Replicate { replica_device } => {
                            assert_ne!(replica_device, &plan.assignments[task]);
                        }
                        other => panic!("expected replicate, got {other:?}"),
                    },
                    Strategy::FtAlgo => unreachable!(),
                }
            }
        }
    }

    #[test]
    fn plan_validation_errors() {
        let (devices, _source, dag, mut plan) = two_device_setup();
        plan.assignments.insert("t0".into(), "ghost".into());
        assert!(matches!(plan.validate(&dag, &devices), Err(PolicyError::UnknownDevice(_))));

        let (devices, _source, dag, mut plan) = two_device_setup();
        plan.offload_set.insert("tX".into());
        assert!(matches!(plan.validate(&dag, &devices), Err(PolicyError::UnknownTask(_))));

        let (devices, _source, dag, mut plan) = two_device_setup();
        plan.assignments.remove("t1");
        assert!(matches!(plan.validate(&dag, &devices), Err(PolicyError::UnassignedTask(_))));
    }
}
