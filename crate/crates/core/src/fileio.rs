//! On-disk formats: application DAGs, device populations, schedule plans
//! (TOSP), scenario configs, and experiment specs, all as TOML documents.
//! Field names are fixed in `docs/FORMATS.md`; externally produced plans can
//! be injected through the TOSP format.

use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use crate::dag::{AppDag, DagError, TaskSpec};
use crate::device::DeviceSpec;
use crate::experiment::ExperimentSpec;
use crate::policy::SchedulePlan;
use crate::workload::ScenarioConfig;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    InvalidDag {
        path: PathBuf,
        #[source]
        source: DagError,
    },
}

fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T, FileError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| FileError::Io { path: path.to_path_buf(), source })?;
    toml::from_str(&text)
        .map_err(|e| FileError::Parse { path: path.to_path_buf(), message: e.to_string() })
}

fn write_toml<T: Serialize>(value: &T, path: &Path) -> Result<(), FileError> {
    let text = toml::to_string_pretty(value)
        .map_err(|e| FileError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    std::fs::write(path, text).map_err(|source| FileError::Io { path: path.to_path_buf(), source })
}

/// DAG document: one record per task.
#[derive(Debug, Serialize, Deserialize)]
struct DagFile {
    tasks: Vec<TaskSpec>,
}

pub fn load_dag(path: &Path) -> Result<AppDag, FileError> {
    let file: DagFile = read_toml(path)?;
    AppDag::new(file.tasks).map_err(|source| FileError::InvalidDag { path: path.to_path_buf(), source })
}

pub fn save_dag(dag: &AppDag, path: &Path) -> Result<(), FileError> {
    write_toml(&DagFile { tasks: dag.tasks().to_vec() }, path)
}

/// Device population document: the participating devices plus the source.
#[derive(Debug, Serialize, Deserialize)]
pub struct DeviceFile {
    pub devices: Vec<DeviceSpec>,
    pub source: DeviceSpec,
}

pub fn load_devices(path: &Path) -> Result<DeviceFile, FileError> {
    read_toml(path)
}

pub fn save_devices(file: &DeviceFile, path: &Path) -> Result<(), FileError> {
    write_toml(file, path)
}

/// TOSP document: task-to-device assignments plus the offload set.
pub fn load_plan(path: &Path) -> Result<SchedulePlan, FileError> {
    read_toml(path)
}

pub fn save_plan(plan: &SchedulePlan, path: &Path) -> Result<(), FileError> {
    write_toml(plan, path)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, FileError> {
    read_toml(path)
}

pub fn save_scenario(cfg: &ScenarioConfig, path: &Path) -> Result<(), FileError> {
    write_toml(cfg, path)
}

pub fn load_experiment(path: &Path) -> Result<ExperimentSpec, FileError> {
    read_toml(path)
}

pub fn save_experiment(spec: &ExperimentSpec, path: &Path) -> Result<(), FileError> {
    write_toml(spec, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::Workload;

    #[test]
    fn dag_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let tasks = vec![
            TaskSpec::new("t0", 50_000, 1.5),
            TaskSpec::new("t1", 80_000, 3.0).with_deps(["t0"]),
        ];
        let dag = AppDag::new(tasks).unwrap();
        let path = dir.path().join("app.toml");
        save_dag(&dag, &path).unwrap();
        let back = load_dag(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.task(1).deps.len(), 1);
        assert_eq!(back.task(0).instructions, 50_000);
    }

    #[test]
    fn invalid_dag_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(
            &path,
            r#"
[[tasks]]
id = "a"
instructions = 10
data_size_mb = 1.0
deps = ["b"]

[[tasks]]
id = "b"
instructions = 10
data_size_mb = 1.0
deps = ["a"]
"#,
        )
        .unwrap();
        assert!(matches!(load_dag(&path), Err(FileError::InvalidDag { .. })));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_dag(Path::new("/no/such/file.toml")).unwrap_err();
        assert!(err.to_string().contains("/no/such/file.toml"));
    }

    #[test]
    fn devices_and_plan_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ScenarioConfig::default();
        cfg.app_count = 1;
        let wl = Workload::generate(&cfg).unwrap();

        let dev_path = dir.path().join("devices.toml");
        save_devices(
            &DeviceFile { devices: wl.devices.clone(), source: wl.source.clone() },
            &dev_path,
        )
        .unwrap();
        let dev_back = load_devices(&dev_path).unwrap();
        assert_eq!(dev_back.devices.len(), wl.devices.len());
        assert_eq!(dev_back.source.id, "source");
        for (a, b) in dev_back.devices.iter().zip(wl.devices.iter()) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.cpu_speed_mips, b.cpu_speed_mips);
            assert_eq!(a.mtbf_s, b.mtbf_s);
        }

        let plan_path = dir.path().join("plan.toml");
        save_plan(&wl.apps[0].1, &plan_path).unwrap();
        let plan_back = load_plan(&plan_path).unwrap();
        assert_eq!(plan_back.assignments, wl.apps[0].1.assignments);
        assert_eq!(plan_back.offload_set, wl.apps[0].1.offload_set);
    }

    #[test]
    fn scenario_round_trip_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ScenarioConfig::default();
        let path = dir.path().join("scenario.toml");
        save_scenario(&cfg, &path).unwrap();
        let back = load_scenario(&path).unwrap();
        assert_eq!(back.app_count, cfg.app_count);
        assert_eq!(back.instruction_range, cfg.instruction_range);
        back.validate().unwrap();

        // A sparse file relies on defaults for everything else.
        let sparse = dir.path().join("sparse.toml");
        std::fs::write(&sparse, "device_count = 30\nseed = 9\n").unwrap();
        let cfg = load_scenario(&sparse).unwrap();
        assert_eq!(cfg.device_count, 30);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.app_count, 50);
    }

    #[test]
    fn experiment_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec::experiment1();
        let path = dir.path().join("exp1.toml");
        save_experiment(&spec, &path).unwrap();
        let back = load_experiment(&path).unwrap();
        assert_eq!(back.name, "exp1");
        assert_eq!(back.values.len(), 12);
        back.validate().unwrap();
    }
}
