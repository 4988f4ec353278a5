//! Discrete-event simulation of fault-tolerant task offloading.
//!
//! Applications are directed acyclic task graphs executed on a population of
//! heterogeneous simulated devices under Weibull failure injection. Devices
//! are scored for reliability, split into high/low reliability clusters with
//! 1-D k-means, and each critical offloaded task is protected either by
//! replication (low-reliability hosts) or periodic checkpointing
//! (high-reliability hosts). The engine compares this cluster-adaptive policy
//! against checkpoint-only, replicate-only, and no-fault-tolerance baselines
//! and reports completion time, fault-tolerance overhead, and control-message
//! counts.

pub mod cluster;
pub mod dag;
pub mod device;
pub mod experiment;
pub mod fileio;
pub mod policy;
pub mod rng;
pub mod sim;
pub mod workload;

pub use cluster::{split_by_reliability, ClusterSplit};
pub use dag::{AppDag, DagError, ScheduleTimes, TaskSpec};
pub use device::{DeviceSpec, ReliabilityScores, WeibullParams, WeightsConfig};
pub use policy::{PolicyAssignment, SchedulePlan, TaskPolicy};
pub use sim::{MetricsReport, RunMetrics, SimParams, Strategy};
pub use workload::{ScenarioConfig, Workload};

/// Opaque task identifier.
pub type TaskId = String;
/// Opaque device identifier.
pub type DeviceId = String;
