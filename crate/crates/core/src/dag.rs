//! Application model: weighted task DAGs with schedule-time annotations.
//!
//! An application is a set of tasks with dependency edges. Given per-task
//! execution times, a forward/backward pass yields earliest/latest start and
//! finish times, the total float of each task, and the critical path (the set
//! of tasks with zero float, which bounds the application's earliest finish).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::TaskId;

/// Tolerance for zero-float tests; sums of floats are never exactly zero.
pub const FLOAT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DagError {
    #[error("dependency cycle detected involving task `{0}`")]
    CycleDetected(TaskId),
    #[error("task `{task}` depends on unknown task `{dep}`")]
    UnknownDependency { task: TaskId, dep: TaskId },
    #[error("duplicate task id `{0}`")]
    DuplicateTaskId(TaskId),
    #[error("task `{task}` is invalid: {reason}")]
    InvalidTask { task: TaskId, reason: String },
    #[error("no execution time given for task `{0}`")]
    MissingExecTime(TaskId),
}

/// A single non-divisible task: an instruction count, an input payload, and
/// the set of tasks that must finish before it starts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: TaskId,
    /// Length of computation in machine instructions.
    pub instructions: u64,
    /// Input payload size in megabytes.
    pub data_size_mb: f64,
    /// Ids of tasks this task depends on.
    #[serde(default)]
    pub deps: BTreeSet<TaskId>,
}

impl TaskSpec {
    pub fn new(id: impl Into<TaskId>, instructions: u64, data_size_mb: f64) -> Self {
        Self { id: id.into(), instructions, data_size_mb, deps: BTreeSet::new() }
    }

    pub fn with_deps<I, S>(mut self, deps: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<TaskId>,
    {
        self.deps = deps.into_iter().map(Into::into).collect();
        self
    }
}

/// A validated application DAG with a cached topological order.
#[derive(Debug, Clone)]
pub struct AppDag {
    tasks: Vec<TaskSpec>,
    index: BTreeMap<TaskId, usize>,
    topo: Vec<usize>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
}

impl AppDag {
    /// Validates a task collection and builds the DAG.
    pub fn new(tasks: Vec<TaskSpec>) -> Result<Self, DagError> {
        let mut index = BTreeMap::new();
        for (i, t) in tasks.iter().enumerate() {
            if t.instructions == 0 {
                return Err(DagError::InvalidTask {
                    task: t.id.clone(),
                    reason: "instructions must be > 0".into(),
                });
            }
            if !(t.data_size_mb >= 0.0) {
                return Err(DagError::InvalidTask {
                    task: t.id.clone(),
                    reason: "data_size_mb must be >= 0".into(),
                });
            }
            if index.insert(t.id.clone(), i).is_some() {
                return Err(DagError::DuplicateTaskId(t.id.clone()));
            }
        }
        let n = tasks.len();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for (i, t) in tasks.iter().enumerate() {
            for dep in &t.deps {
                if dep == &t.id {
                    return Err(DagError::CycleDetected(t.id.clone()));
                }
                let j = *index
                    .get(dep)
                    .ok_or_else(|| DagError::UnknownDependency { task: t.id.clone(), dep: dep.clone() })?;
                preds[i].push(j);
                succs[j].push(i);
            }
        }
        for p in preds.iter_mut().chain(succs.iter_mut()) {
            p.sort_unstable();
        }

        // Kahn's algorithm, lowest index first among ready tasks; anything
        // left over sits on or behind a cycle.
        let mut indeg: Vec<usize> = preds.iter().map(Vec::len).collect();
        let mut ready: std::collections::BinaryHeap<std::cmp::Reverse<usize>> =
            (0..n).filter(|&i| indeg[i] == 0).map(std::cmp::Reverse).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(std::cmp::Reverse(i)) = ready.pop() {
            topo.push(i);
            for &s in &succs[i] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    ready.push(std::cmp::Reverse(s));
                }
            }
        }
        if topo.len() != n {
            let on_cycle = Self::find_cycle_member(&preds, &topo, n);
            return Err(DagError::CycleDetected(tasks[on_cycle].id.clone()));
        }
        Ok(Self { tasks, index, topo, preds, succs })
    }

    /// Walks predecessor links among unresolved tasks until a node repeats;
    /// that node is on a cycle (not merely downstream of one).
    fn find_cycle_member(preds: &[Vec<usize>], topo: &[usize], n: usize) -> usize {
        let resolved: BTreeSet<usize> = topo.iter().copied().collect();
        let start = (0..n).find(|i| !resolved.contains(i)).expect("cycle exists");
        let mut seen = BTreeSet::new();
        let mut cur = start;
        loop {
            if !seen.insert(cur) {
                return cur;
            }
            cur = *preds[cur]
                .iter()
                .find(|p| !resolved.contains(p))
                .expect("unresolved task has an unresolved predecessor");
        }
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Task indices in topological order.
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn task_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn task(&self, idx: usize) -> &TaskSpec {
        &self.tasks[idx]
    }

    pub fn preds(&self, idx: usize) -> &[usize] {
        &self.preds[idx]
    }

    pub fn succs(&self, idx: usize) -> &[usize] {
        &self.succs[idx]
    }
}

/// Per-task schedule times from the forward/backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskTimes {
    pub earliest_start: f64,
    pub earliest_finish: f64,
    pub latest_start: f64,
    pub latest_finish: f64,
    pub total_float: f64,
    pub on_critical_path: bool,
}

/// Schedule times for every task of a DAG, plus the makespan.
#[derive(Debug, Clone)]
pub struct ScheduleTimes {
    entries: Vec<TaskTimes>,
    makespan: f64,
}

impl ScheduleTimes {
    /// Maximum earliest finish over all tasks.
    pub fn makespan(&self) -> f64 {
        self.makespan
    }

    /// Times for the task at DAG index `idx`.
    pub fn times(&self, idx: usize) -> &TaskTimes {
        &self.entries[idx]
    }

    pub fn entries(&self) -> &[TaskTimes] {
        &self.entries
    }
}

/// Forward pass for earliest times, backward pass from the makespan for
/// latest times; `total_float = latest_finish - earliest_finish`.
pub fn compute_schedule_times(
    dag: &AppDag,
    exec_time: &BTreeMap<TaskId, f64>,
) -> Result<ScheduleTimes, DagError> {
    let n = dag.len();
    let mut exec = vec![0.0_f64; n];
    for (i, t) in dag.tasks().iter().enumerate() {
        let e = *exec_time.get(&t.id).ok_or_else(|| DagError::MissingExecTime(t.id.clone()))?;
        if !(e > 0.0) {
            return Err(DagError::InvalidTask {
                task: t.id.clone(),
                reason: format!("execution time must be positive, got {e}"),
            });
        }
        exec[i] = e;
    }

    let mut es = vec![0.0_f64; n];
    let mut ef = vec![0.0_f64; n];
    for &i in dag.topo_order() {
        es[i] = dag.preds(i).iter().map(|&p| ef[p]).fold(0.0, f64::max);
        ef[i] = es[i] + exec[i];
    }
    let makespan = ef.iter().copied().fold(0.0, f64::max);

    let mut lf = vec![makespan; n];
    let mut ls = vec![0.0_f64; n];
    for &i in dag.topo_order().iter().rev() {
        lf[i] = dag
            .succs(i)
            .iter()
            .map(|&s| ls[s])
            .fold(makespan, f64::min);
        ls[i] = lf[i] - exec[i];
    }

    let entries = (0..n)
        .map(|i| {
            let total_float = lf[i] - ef[i];
            TaskTimes {
                earliest_start: es[i],
                earliest_finish: ef[i],
                latest_start: ls[i],
                latest_finish: lf[i],
                total_float,
                on_critical_path: total_float.abs() <= FLOAT_TOLERANCE,
            }
        })
        .collect();
    Ok(ScheduleTimes { entries, makespan })
}

/// The critical path as a task set: exactly the tasks with zero total float.
/// When several maximum-weight paths tie, all of their tasks are included.
pub fn critical_path(dag: &AppDag, times: &ScheduleTimes) -> BTreeSet<TaskId> {
    dag.tasks()
        .iter()
        .enumerate()
        .filter(|(i, _)| times.times(*i).on_critical_path)
        .map(|(_, t)| t.id.clone())
        .collect()
}
