//! Workload generation: random application DAGs and device populations
//! within configured parameter ranges, plus a greedy baseline scheduler that
//! produces the task offloading scheduling plan consumed by the
//! fault-tolerance layer.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dag::{AppDag, TaskSpec};
use crate::device::{weibull_mean, DeviceSpec, WeibullParams, WeightsConfig};
use crate::policy::SchedulePlan;
use crate::rng::{substream, DOMAIN_DAGS, DOMAIN_DEVICES};
use crate::sim::{exec_time, transfer_time, SimError, SimParams, Strategy};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Scenario configuration: generation ranges, fault-tolerance parameters,
/// and the strategies to compare. Defaults follow the published task and
/// device parameter tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Number of applications per scenario run.
    pub app_count: usize,
    /// Tasks per application DAG.
    pub task_count_range: (usize, usize),
    /// Probability of a forward dependency edge between any task pair.
    pub edge_prob: f64,
    /// Length of computation per task, instructions.
    pub instruction_range: (u64, u64),
    /// Multiplier applied to every sampled instruction count.
    pub computation_scale: f64,
    /// Task payload size, MB.
    pub data_range_mb: (f64, f64),

    pub device_count: usize,
    /// CPU speed, MIPS.
    pub cpu_range_mips: (f64, f64),
    /// Fraction of the CPU available to offloaded work.
    pub cpu_avail_range: (f64, f64),
    /// Remaining battery fraction.
    pub battery_range: (f64, f64),
    /// Device participation window, seconds.
    pub avail_time_range_s: (f64, f64),
    /// Weibull shape shared by all devices.
    pub weibull_shape: f64,
    /// Weibull scale, seconds; sets the default device MTBF.
    pub weibull_scale_s: f64,
    /// Per-device MTBF range; unset means every device uses the mean implied
    /// by the configured shape and scale.
    pub mtbf_range_s: Option<(f64, f64)>,
    /// WIFI bandwidth, MBps.
    pub bandwidth_wifi_range_mbps: (f64, f64),
    /// Probability that a device also has an ethernet port.
    pub ether_prob: f64,
    /// Ethernet bandwidth, MBps.
    pub bandwidth_ether_range_mbps: (f64, f64),
    /// Network latency, seconds.
    pub latency_range_s: (f64, f64),
    /// Data rate consumed per existing connection, MBps.
    pub per_conn_rate_range_mbps: (f64, f64),
    /// Existing connections per device.
    pub conn_count_range: (u32, u32),
    /// Tasks previously executed per device.
    pub history_total_range: (u32, u32),
    /// Fraction of those that failed.
    pub history_fail_ratio_range: (f64, f64),

    pub weights: WeightsConfig,
    /// How long a failed device stays down, seconds.
    pub repair_delay_s: f64,
    /// Snapshot size as a fraction of task payload.
    pub snapshot_ratio: f64,
    /// Fixed checkpoint write cost; unset derives it from snapshot size and
    /// link speed.
    pub ckpt_cost_s: Option<f64>,

    pub seed: u64,
    pub strategies: Vec<Strategy>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            app_count: 50,
            task_count_range: (5, 15),
            edge_prob: 0.3,
            instruction_range: (20_000, 100_000),
            computation_scale: 1.0,
            data_range_mb: (0.5, 10.0),
            device_count: 20,
            cpu_range_mips: (1_000.0, 100_000.0),
            cpu_avail_range: (0.1, 1.0),
            battery_range: (0.05, 1.0),
            avail_time_range_s: (1_000.0, 30_000.0),
            weibull_shape: 1.21,
            weibull_scale_s: 94.08,
            mtbf_range_s: None,
            bandwidth_wifi_range_mbps: (0.9, 1.2),
            ether_prob: 0.0,
            bandwidth_ether_range_mbps: (5.0, 10.0),
            latency_range_s: (0.005, 0.05),
            per_conn_rate_range_mbps: (0.05, 0.2),
            conn_count_range: (0, 5),
            history_total_range: (0, 50),
            history_fail_ratio_range: (0.0, 0.6),
            weights: WeightsConfig::default(),
            repair_delay_s: 10.0,
            snapshot_ratio: 1.0,
            ckpt_cost_s: None,
            seed: 1,
            strategies: Strategy::ALL.to_vec(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |msg: String| Err(WorkloadError::InvalidConfig(msg));
        if self.app_count == 0 {
            return bad("app_count must be >= 1".into());
        }
        if self.device_count == 0 {
            return bad("device_count must be >= 1".into());
        }
        if self.task_count_range.0 == 0 || self.task_count_range.0 > self.task_count_range.1 {
            return bad(format!("bad task_count_range {:?}", self.task_count_range));
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return bad(format!("edge_prob {} outside [0, 1]", self.edge_prob));
        }
        if !(0.0..=1.0).contains(&self.ether_prob) {
            return bad(format!("ether_prob {} outside [0, 1]", self.ether_prob));
        }
        if self.instruction_range.0 == 0 || self.instruction_range.0 > self.instruction_range.1 {
            return bad(format!("bad instruction_range {:?}", self.instruction_range));
        }
        if !(self.computation_scale > 0.0) {
            return bad(format!("computation_scale {} must be > 0", self.computation_scale));
        }
        macro_rules! range_ok {
            ($r:expr, $name:literal) => {
                if !($r.0 <= $r.1) {
                    return bad(format!("bad {} {:?}", $name, $r));
                }
            };
        }
        range_ok!(self.data_range_mb, "data_range_mb");
        range_ok!(self.cpu_range_mips, "cpu_range_mips");
        range_ok!(self.cpu_avail_range, "cpu_avail_range");
        range_ok!(self.battery_range, "battery_range");
        range_ok!(self.avail_time_range_s, "avail_time_range_s");
        range_ok!(self.bandwidth_wifi_range_mbps, "bandwidth_wifi_range_mbps");
        range_ok!(self.bandwidth_ether_range_mbps, "bandwidth_ether_range_mbps");
        range_ok!(self.latency_range_s, "latency_range_s");
        range_ok!(self.per_conn_rate_range_mbps, "per_conn_rate_range_mbps");
        range_ok!(self.conn_count_range, "conn_count_range");
        range_ok!(self.history_total_range, "history_total_range");
        range_ok!(self.history_fail_ratio_range, "history_fail_ratio_range");
        if !(self.data_range_mb.0 >= 0.0) {
            return bad("data_range_mb must be non-negative".into());
        }
        if !(self.cpu_range_mips.0 > 0.0) {
            return bad("cpu_range_mips must be positive".into());
        }
        if !(self.cpu_avail_range.0 > 0.0 && self.cpu_avail_range.1 <= 1.0) {
            return bad(format!("cpu_avail_range {:?} outside (0, 1]", self.cpu_avail_range));
        }
        if !(self.battery_range.0 >= 0.0 && self.battery_range.1 <= 1.0) {
            return bad(format!("battery_range {:?} outside [0, 1]", self.battery_range));
        }
        if !(self.weibull_shape > 0.0 && self.weibull_scale_s > 0.0) {
            return bad("weibull shape and scale must be positive".into());
        }
        if let Some((lo, hi)) = self.mtbf_range_s {
            if !(lo > 0.0 && lo <= hi) {
                return bad(format!("bad mtbf_range_s {:?}", (lo, hi)));
            }
        }
        if !(self.history_fail_ratio_range.0 >= 0.0 && self.history_fail_ratio_range.1 <= 1.0) {
            return bad("history_fail_ratio_range must lie in [0, 1]".into());
        }
        if self.strategies.is_empty() {
            return bad("at least one strategy required".into());
        }
        self.weights.validate().map_err(|e| WorkloadError::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    /// Simulation parameters implied by this scenario.
    pub fn sim_params(&self) -> SimParams {
        SimParams {
            repair_delay_s: self.repair_delay_s,
            snapshot_ratio: self.snapshot_ratio,
            ckpt_cost_s: self.ckpt_cost_s,
            weibull_shape: self.weibull_shape,
        }
    }
}

fn sample_f64(rng: &mut impl Rng, range: (f64, f64)) -> f64 {
    if range.0 == range.1 {
        // Consume a draw anyway so streams stay aligned across configs that
        // differ only in this range.
        let _ = rng.gen::<f64>();
        return range.0;
    }
    rng.gen_range(range.0..=range.1)
}

fn sample_u32(rng: &mut impl Rng, range: (u32, u32)) -> u32 {
    if range.0 == range.1 {
        let _ = rng.gen::<f64>();
        return range.0;
    }
    rng.gen_range(range.0..=range.1)
}

/// Generates one application DAG: task count, instruction counts, and data
/// sizes sampled uniformly; forward edges added independently with the
/// configured probability. The result always validates.
pub fn gen_dag(cfg: &ScenarioConfig, rng: &mut impl Rng) -> AppDag {
    let n = rng.gen_range(cfg.task_count_range.0..=cfg.task_count_range.1);
    let mut tasks = Vec::with_capacity(n);
    for i in 0..n {
        let raw = rng.gen_range(cfg.instruction_range.0..=cfg.instruction_range.1);
        let instructions = ((raw as f64 * cfg.computation_scale).round() as u64).max(1);
        let data = sample_f64(rng, cfg.data_range_mb);
        let mut task = TaskSpec::new(format!("t{i:03}"), instructions, data);
        for j in 0..i {
            if rng.gen_bool(cfg.edge_prob) {
                task.deps.insert(format!("t{j:03}"));
            }
        }
        tasks.push(task);
    }
    AppDag::new(tasks).expect("forward edges cannot form a cycle")
}

fn gen_device_fields(
    cfg: &ScenarioConfig,
    rng: &mut impl Rng,
    id: String,
    peers_max: u32,
) -> DeviceSpec {
    let cpu_speed_mips = sample_f64(rng, cfg.cpu_range_mips);
    let cpu_avail_fraction = sample_f64(rng, cfg.cpu_avail_range);
    let battery = sample_f64(rng, cfg.battery_range);
    let bandwidth_wifi_mbps = sample_f64(rng, cfg.bandwidth_wifi_range_mbps);
    let has_ether = rng.gen_bool(cfg.ether_prob);
    let bandwidth_ether_mbps = sample_f64(rng, cfg.bandwidth_ether_range_mbps);
    let latency_s = sample_f64(rng, cfg.latency_range_s);
    let avail_time_s = sample_f64(rng, cfg.avail_time_range_s);
    let default_mtbf = weibull_mean(WeibullParams::new(cfg.weibull_shape, cfg.weibull_scale_s));
    let mtbf_s = sample_f64(rng, cfg.mtbf_range_s.unwrap_or((default_mtbf, default_mtbf)));
    let per_conn_rate_mbps = sample_f64(rng, cfg.per_conn_rate_range_mbps);
    let conn_count = sample_u32(rng, cfg.conn_count_range);
    let tasks_total = sample_u32(rng, cfg.history_total_range);
    let fail_ratio = sample_f64(rng, cfg.history_fail_ratio_range);
    let tasks_failed = (tasks_total as f64 * fail_ratio).round() as u32;
    let peers_connected = if peers_max == 0 { 0 } else { rng.gen_range(0..=peers_max) };
    DeviceSpec {
        id,
        cpu_speed_mips,
        cpu_avail_fraction,
        battery,
        has_wifi: true,
        has_ether,
        bandwidth_wifi_mbps,
        bandwidth_ether_mbps,
        latency_s,
        avail_time_s,
        mtbf_s,
        per_conn_rate_mbps,
        conn_count,
        tasks_failed,
        tasks_total,
        peers_connected,
    }
}

/// Generates the participating device population.
pub fn gen_devices(cfg: &ScenarioConfig, rng: &mut impl Rng) -> Vec<DeviceSpec> {
    let n = cfg.device_count;
    (0..n)
        .map(|i| gen_device_fields(cfg, rng, format!("d{i:03}"), n.saturating_sub(1) as u32))
        .collect()
}

/// Generates the source device: the application owner that holds task
/// inputs and stores checkpoints. It participates in transfers but hosts no
/// offloaded tasks and never fails.
pub fn gen_source(cfg: &ScenarioConfig, rng: &mut impl Rng) -> DeviceSpec {
    let mut source = gen_device_fields(cfg, rng, "source".into(), 0);
    source.battery = 1.0;
    source
}

/// Greedy earliest-finish-time scheduler: tasks in topological order, each
/// assigned to the device minimizing ready time + input transfer + execution;
/// ties break to the lowest device id. Every task is marked for offloading.
pub fn baseline_schedule(
    dag: &AppDag,
    devices: &[DeviceSpec],
    source: &DeviceSpec,
) -> Result<SchedulePlan, WorkloadError> {
    let mut dev_ready = vec![0.0_f64; devices.len()];
    let mut task_finish = vec![0.0_f64; dag.len()];
    let mut plan = SchedulePlan::default();
    for &t in dag.topo_order() {
        let task = dag.task(t);
        let deps_ready = dag.preds(t).iter().map(|&p| task_finish[p]).fold(0.0, f64::max);
        let mut best: Option<(f64, usize)> = None;
        for (d, dev) in devices.iter().enumerate() {
            let transfer = match transfer_time(task.data_size_mb, source, dev) {
                Ok(t) => t,
                Err(SimError::NoRoute { .. }) => continue,
                Err(e) => return Err(e.into()),
            };
            let finish = dev_ready[d].max(deps_ready) + transfer + exec_time(task, dev);
            // Strict `<` keeps the lowest-index (lowest-id) device on ties.
            if best.map_or(true, |(bf, _)| finish < bf) {
                best = Some((finish, d));
            }
        }
        let (finish, d) = best.ok_or_else(|| {
            WorkloadError::Sim(SimError::NoRoute {
                from: source.id.clone(),
                to: "any device".into(),
            })
        })?;
        dev_ready[d] = finish;
        task_finish[t] = finish;
        plan.assignments.insert(task.id.clone(), devices[d].id.clone());
        plan.offload_set.insert(task.id.clone());
    }
    Ok(plan)
}

/// A generated scenario: the shared device population, the source device,
/// and one (DAG, plan) pair per application.
#[derive(Debug, Clone)]
pub struct Workload {
    pub devices: Vec<DeviceSpec>,
    pub source: DeviceSpec,
    pub apps: Vec<(AppDag, SchedulePlan)>,
}

impl Workload {
    /// Deterministic generation from the scenario's seed: devices, the
    /// source, and `app_count` applications with baseline plans.
    pub fn generate(cfg: &ScenarioConfig) -> Result<Self, WorkloadError> {
        cfg.validate()?;
        let mut dev_rng = substream(cfg.seed, DOMAIN_DEVICES, 0);
        let devices = gen_devices(cfg, &mut dev_rng);
        let mut src_rng = substream(cfg.seed, DOMAIN_DEVICES, 1);
        let source = gen_source(cfg, &mut src_rng);
        let mut apps = Vec::with_capacity(cfg.app_count);
        for a in 0..cfg.app_count {
            let mut rng = substream(cfg.seed, DOMAIN_DAGS, a as u64);
            let dag = gen_dag(cfg, &mut rng);
            let plan = baseline_schedule(&dag, &devices, &source)?;
            apps.push((dag, plan));
        }
        Ok(Self { devices, source, apps })
    }
}
