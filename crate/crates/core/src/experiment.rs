//! Experiment harness: runs scenario sweeps with paired seeds, aggregates
//! metrics across applications and seeds, and emits machine-readable CSV.
//!
//! Within one (sweep value, seed) cell every strategy observes the same
//! device population, the same applications, and the same per-device failure
//! schedules, so strategy differences are never generation noise. Cells are
//! independent and may run concurrently; output order is fixed regardless.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::{build_policy, PolicyError};
use crate::rng::derive_seed;
use crate::sim::{run, MetricsReport, SimError, SimSetup, Strategy, StrategyMetrics};
use crate::workload::{ScenarioConfig, Workload, WorkloadError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

/// The variable an experiment sweeps over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Device mean time between failures, seconds; applied to every device.
    Mtbf,
    /// Computation-scale multiplier applied on top of the base scenario's.
    ComputationScale,
}

/// A sweep: one variable, a value list, paired seeds per point, and a base
/// scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub sweep: SweepVariable,
    pub values: Vec<f64>,
    /// Seeds per sweep point.
    pub seeds: u32,
    pub base_seed: u64,
    pub strategies: Vec<Strategy>,
    pub base: ScenarioConfig,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.values.is_empty() {
            return Err(ExperimentError::InvalidSpec("value list is empty".into()));
        }
        if self.seeds == 0 {
            return Err(ExperimentError::InvalidSpec("seeds must be >= 1".into()));
        }
        if self.values.iter().any(|v| !(*v > 0.0)) {
            return Err(ExperimentError::InvalidSpec("sweep values must be positive".into()));
        }
        if self.strategies.is_empty() {
            return Err(ExperimentError::InvalidSpec("no strategies selected".into()));
        }
        self.base.validate()?;
        Ok(())
    }

    /// The scenario for one sweep value (seed not yet applied).
    pub fn scenario_for(&self, value: f64) -> ScenarioConfig {
        let mut cfg = self.base.clone();
        match self.sweep {
            SweepVariable::Mtbf => cfg.mtbf_range_s = Some((value, value)),
            SweepVariable::ComputationScale => {
                cfg.computation_scale = self.base.computation_scale * value
            }
        }
        cfg
    }

    /// Device-availability sweep: completion, overhead, and message count
    /// against MTBF from 10 s to 120 s.
    pub fn experiment1() -> Self {
        Self {
            name: "exp1".into(),
            sweep: SweepVariable::Mtbf,
            values: (1..=12).map(|k| 10.0 * k as f64).collect(),
            seeds: 20,
            base_seed: 1,
            strategies: Strategy::ALL.to_vec(),
            base: experiment_base(),
        }
    }

    /// Task-computation sweep: scale multiplier 1x to 4x with heterogeneous
    /// device MTBF between 90 s and 120 s.
    pub fn experiment2() -> Self {
        let mut base = experiment_base();
        base.mtbf_range_s = Some((90.0, 120.0));
        Self {
            name: "exp2".into(),
            sweep: SweepVariable::ComputationScale,
            values: vec![1.0, 2.0, 3.0, 4.0],
            seeds: 20,
            base_seed: 1,
            strategies: Strategy::ALL.to_vec(),
            base,
        }
    }
}

/// Base scenario for the two default experiments: published task/device
/// ranges where the evaluation pins them (20 devices, 50 applications,
/// instruction and CPU ranges, WIFI bandwidth, Weibull shape), with the
/// remaining free parameters chosen so per-task work sits in the seconds
/// range where the fault-tolerance mechanisms are exercised.
pub fn experiment_base() -> ScenarioConfig {
    ScenarioConfig {
        app_count: 50,
        device_count: 20,
        task_count_range: (5, 10),
        edge_prob: 1.0,
        instruction_range: (20_000, 100_000),
        computation_scale: 4.0e6,
        data_range_mb: (0.5, 2.0),
        avail_time_range_s: (10_000.0, 30_000.0),
        latency_range_s: (0.002, 0.02),
        repair_delay_s: 8.0,
        snapshot_ratio: 0.1,
        ..ScenarioConfig::default()
    }
}

/// One CSV row: per-application means of one (value, seed, strategy) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario_id: String,
    pub strategy: String,
    pub sweep_value: f64,
    pub seed: u64,
    pub completion_time_s: f64,
    pub overhead_s: f64,
    pub ft_messages: f64,
}

/// A failed cell, reported without aborting the sweep.
#[derive(Debug, Clone)]
pub struct CellError {
    pub scenario_id: String,
    pub sweep_value: f64,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub errors: Vec<CellError>,
}

/// Runs one scenario: every strategy over every application, with failure
/// schedules that depend only on the scenario seed and application index.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<MetricsReport, ExperimentError> {
    let workload = Workload::generate(cfg)?;
    run_scenario_on(cfg, &workload)
}

/// As [`run_scenario`], reusing an already generated workload.
pub fn run_scenario_on(
    cfg: &ScenarioConfig,
    workload: &Workload,
) -> Result<MetricsReport, ExperimentError> {
    let params = cfg.sim_params();
    let mut per_strategy = Vec::with_capacity(cfg.strategies.len());
    for &strategy in &cfg.strategies {
        let mut runs = Vec::with_capacity(workload.apps.len());
        for (app_idx, (dag, plan)) in workload.apps.iter().enumerate() {
            let policy = build_policy(
                strategy,
                &workload.devices,
                &workload.source,
                dag,
                plan,
                &cfg.weights,
                &params,
                cfg.seed,
            )?;
            let output = run(&SimSetup {
                dag,
                devices: &workload.devices,
                source: &workload.source,
                plan,
                policy: &policy,
                params: &params,
                seed: derive_seed(cfg.seed, app_idx as u64),
            })?;
            runs.push(output.metrics);
        }
        per_strategy.push(StrategyMetrics { strategy, runs });
    }
    Ok(MetricsReport { per_strategy })
}

fn cell_rows(
    spec: &ExperimentSpec,
    value: f64,
    seed_idx: u32,
) -> Result<Vec<ResultRow>, ExperimentError> {
    let mut cfg = spec.scenario_for(value);
    cfg.seed = spec.base_seed.wrapping_add(seed_idx as u64);
    cfg.strategies = spec.strategies.clone();
    let report = run_scenario(&cfg)?;
    Ok(report
        .per_strategy
        .iter()
        .map(|m| ResultRow {
            scenario_id: spec.name.clone(),
            strategy: m.strategy.label().to_string(),
            sweep_value: value,
            seed: cfg.seed,
            completion_time_s: m.mean_completion(),
            overhead_s: m.mean_overhead(),
            ft_messages: m.mean_messages(),
        })
        .collect())
}

/// Runs the full sweep. Cells execute concurrently; rows come out in
/// deterministic (value, seed, strategy) order. Failed cells land in
/// `errors` and the sweep continues.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult, ExperimentError> {
    spec.validate()?;
    let cells: Vec<(f64, u32)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.seeds).map(move |s| (v, s)))
        .collect();
    let outcomes: Vec<Result<Vec<ResultRow>, CellError>> = cells
        .par_iter()
        .map(|&(value, seed_idx)| {
            cell_rows(spec, value, seed_idx).map_err(|e| CellError {
                scenario_id: spec.name.clone(),
                sweep_value: value,
                seed: spec.base_seed.wrapping_add(seed_idx as u64),
                message: e.to_string(),
            })
        })
        .collect();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(mut r) => rows.append(&mut r),
            Err(e) => errors.push(e),
        }
    }
    Ok(ExperimentResult { rows, errors })
}

pub const CSV_HEADER: [&str; 7] = [
    "scenario_id",
    "strategy",
    "sweep_value",
    "seed",
    "completion_time_s",
    "overhead_s",
    "ft_messages",
];

/// Writes raw result rows with the fixed header.
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<(), ExperimentError> {
    let mk_err =
        |message: String| ExperimentError::Csv { path: path.to_path_buf(), message };
    let mut w = csv::Writer::from_path(path).map_err(|e| mk_err(e.to_string()))?;
    w.write_record(CSV_HEADER).map_err(|e| mk_err(e.to_string()))?;
    for r in rows {
        w.write_record([
            r.scenario_id.as_str(),
            r.strategy.as_str(),
            &r.sweep_value.to_string(),
            &r.seed.to_string(),
            &r.completion_time_s.to_string(),
            &r.overhead_s.to_string(),
            &r.ft_messages.to_string(),
        ])
        .map_err(|e| mk_err(e.to_string()))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Reads rows previously written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>, ExperimentError> {
    let mk_err =
        |message: String| ExperimentError::Csv { path: path.to_path_buf(), message };
    let mut r = csv::Reader::from_path(path).map_err(|e| mk_err(e.to_string()))?;
    let mut rows = Vec::new();
    for record in r.deserialize() {
        rows.push(record.map_err(|e| mk_err(e.to_string()))?);
    }
    Ok(rows)
}

/// Mean and standard deviation of the per-seed rows of one
/// (scenario, strategy, sweep value) group.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub scenario_id: String,
    pub strategy: String,
    pub sweep_value: f64,
    pub n_seeds: usize,
    pub completion_mean_s: f64,
    pub completion_std_s: f64,
    pub overhead_mean_s: f64,
    pub overhead_std_s: f64,
    pub ft_messages_mean: f64,
    pub ft_messages_std: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Aggregates raw rows over seeds. The summary is always derivable from the
/// raw rows; it is never authoritative on its own.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String, String), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        // Key sweep_value by its exact textual form so grouping never
        // depends on float comparisons.
        groups
            .entry((r.scenario_id.clone(), r.strategy.clone(), r.sweep_value.to_string()))
            .or_default()
            .push(r);
    }
    let mut out: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((scenario_id, strategy, _), rs)| {
            let completion: Vec<f64> = rs.iter().map(|r| r.completion_time_s).collect();
            let overhead: Vec<f64> = rs.iter().map(|r| r.overhead_s).collect();
            let messages: Vec<f64> = rs.iter().map(|r| r.ft_messages).collect();
            let (cm, cs) = mean_std(&completion);
            let (om, os) = mean_std(&overhead);
            let (mm, ms) = mean_std(&messages);
            SummaryRow {
                scenario_id,
                strategy,
                sweep_value: rs[0].sweep_value,
                n_seeds: rs.len(),
                completion_mean_s: cm,
                completion_std_s: cs,
                overhead_mean_s: om,
                overhead_std_s: os,
                ft_messages_mean: mm,
                ft_messages_std: ms,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        a.scenario_id
            .cmp(&b.scenario_id)
            .then(a.sweep_value.total_cmp(&b.sweep_value))
            .then(a.strategy.cmp(&b.strategy))
    });
    out
}

/// Writes the per-group summary CSV.
pub fn emit_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<(), ExperimentError> {
    let mk_err =
        |message: String| ExperimentError::Csv { path: path.to_path_buf(), message };
    let mut w = csv::Writer::from_path(path).map_err(|e| mk_err(e.to_string()))?;
    w.write_record([
        "scenario_id",
        "strategy",
        "sweep_value",
        "n_seeds",
        "completion_mean_s",
        "completion_std_s",
        "overhead_mean_s",
        "overhead_std_s",
        "ft_messages_mean",
        "ft_messages_std",
    ])
    .map_err(|e| mk_err(e.to_string()))?;
    for r in rows {
        w.write_record([
            r.scenario_id.as_str(),
            r.strategy.as_str(),
            &r.sweep_value.to_string(),
            &r.n_seeds.to_string(),
            &r.completion_mean_s.to_string(),
            &r.completion_std_s.to_string(),
            &r.overhead_mean_s.to_string(),
            &r.overhead_std_s.to_string(),
            &r.ft_messages_mean.to_string(),
            &r.ft_messages_std.to_string(),
        ])
        .map_err(|e| mk_err(e.to_string()))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Writes `raw.csv` and `summary.csv` into a directory and reports any cell
/// errors on stderr. Returns the number of failed cells.
pub fn write_experiment_output(
    result: &ExperimentResult,
    dir: &Path,
) -> Result<usize, ExperimentError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    emit_csv(&result.rows, &dir.join("raw.csv"))?;
    emit_summary_csv(&summarize(&result.rows), &dir.join("summary.csv"))?;
    for e in &result.errors {
        let mut stderr = std::io::stderr().lock();
        let _ = writeln!(
            stderr,
            "cell failed: scenario={} value={} seed={}: {}",
            e.scenario_id, e.sweep_value, e.seed, e.message
        );
    }
    Ok(result.errors.len())
}
