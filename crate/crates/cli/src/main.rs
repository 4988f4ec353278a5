//! Command-line harness: generate workloads, run single scenarios, sweep the
//! two default experiments, and aggregate result CSVs.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ftsim_core::experiment::{
    emit_csv, emit_summary_csv, read_csv, run_experiment, run_scenario_on, summarize,
    write_experiment_output, ExperimentSpec, ResultRow,
};
use ftsim_core::fileio;
use ftsim_core::policy::build_policy;
use ftsim_core::rng::derive_seed;
use ftsim_core::sim::{self, SimSetup, Strategy};
use ftsim_core::workload::{ScenarioConfig, Workload};

#[derive(Parser)]
#[command(
    name = "ftsim",
    version,
    about = "Discrete-event simulator for fault-tolerant task offloading"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate workload files (devices, DAGs, schedule plans) from a scenario.
    Generate(GenerateArgs),
    /// Run one scenario and report per-strategy metrics.
    Run(RunArgs),
    /// Run an experiment sweep and write raw + summary CSVs.
    Sweep(SweepArgs),
    /// Aggregate existing raw CSVs into a summary CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Scenario config (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Restrict to these strategies (ft_algo, c_star, r_star, no_ft).
    #[arg(long = "strategy")]
    strategies: Vec<String>,
    /// Write per-strategy metric rows to this CSV file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-application event traces into this directory.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment spec (TOML).
    #[arg(long, conflicts_with = "preset")]
    spec: Option<PathBuf>,
    /// Built-in experiment: exp1 (MTBF sweep) or exp2 (computation sweep).
    #[arg(long)]
    preset: Option<String>,
    /// Output directory for raw.csv and summary.csv.
    #[arg(long)]
    out: PathBuf,
    /// Override seeds per sweep point.
    #[arg(long)]
    seeds: Option<u32>,
    /// Override sweep values, comma separated.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Restrict to these strategies.
    #[arg(long = "strategy")]
    strategies: Vec<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Raw CSV files produced by `run` or `sweep`.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Summary CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn parse_strategies(names: &[String]) -> Result<Vec<Strategy>> {
    if names.is_empty() {
        return Ok(Strategy::ALL.to_vec());
    }
    names
        .iter()
        .map(|n| {
            Strategy::parse(n)
                .with_context(|| format!("unknown strategy `{n}` (expected ft_algo, c_star, r_star, no_ft)"))
        })
        .collect()
}

fn load_scenario(path: &Option<PathBuf>, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut cfg = match path {
        Some(p) => fileio::load_scenario(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn generate(args: GenerateArgs) -> Result<()> {
    let cfg = load_scenario(&args.config, args.seed)?;
    let workload = Workload::generate(&cfg)?;
    std::fs::create_dir_all(&args.out)?;
    let apps_dir = args.out.join("apps");
    let plans_dir = args.out.join("plans");
    std::fs::create_dir_all(&apps_dir)?;
    std::fs::create_dir_all(&plans_dir)?;

    fileio::save_scenario(&cfg, &args.out.join("scenario.toml"))?;
    fileio::save_devices(
        &fileio::DeviceFile { devices: workload.devices.clone(), source: workload.source.clone() },
        &args.out.join("devices.toml"),
    )?;
    for (i, (dag, plan)) in workload.apps.iter().enumerate() {
        fileio::save_dag(dag, &apps_dir.join(format!("app{i:03}.toml")))?;
        fileio::save_plan(plan, &plans_dir.join(format!("app{i:03}.toml")))?;
    }
    println!(
        "generated {} devices and {} applications under {}",
        workload.devices.len(),
        workload.apps.len(),
        args.out.display()
    );
    Ok(())
}

fn run_one(args: RunArgs) -> Result<()> {
    let mut cfg = load_scenario(&args.config, args.seed)?;
    cfg.strategies = parse_strategies(&args.strategies)?;
    let workload = Workload::generate(&cfg)?;

    if let Some(trace_dir) = &args.trace {
        std::fs::create_dir_all(trace_dir)?;
        let params = cfg.sim_params();
        for &strategy in &cfg.strategies {
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
                let output = sim::run(&SimSetup {
                    dag,
                    devices: &workload.devices,
                    source: &workload.source,
                    plan,
                    policy: &policy,
                    params: &params,
                    seed: derive_seed(cfg.seed, app_idx as u64),
                })?;
                let file = trace_dir.join(format!("app{app_idx:03}_{strategy}.trace"));
                std::fs::write(&file, output.trace.to_text())
                    .with_context(|| format!("writing {}", file.display()))?;
            }
        }
    }

    let report = run_scenario_on(&cfg, &workload)?;
    let scenario_id = args
        .config
        .as_ref()
        .and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    let default_mtbf = workload.devices.iter().map(|d| d.mtbf_s).sum::<f64>()
        / workload.devices.len() as f64;

    println!(
        "{:<10} {:>16} {:>14} {:>14}",
        "strategy", "completion_s", "overhead_s", "ft_messages"
    );
    let mut rows = Vec::new();
    for m in &report.per_strategy {
        println!(
            "{:<10} {:>16.3} {:>14.3} {:>14.3}",
            m.strategy.label(),
            m.mean_completion(),
            m.mean_overhead(),
            m.mean_messages()
        );
        rows.push(ResultRow {
            scenario_id: scenario_id.clone(),
            strategy: m.strategy.label().to_string(),
            sweep_value: default_mtbf,
            seed: cfg.seed,
            completion_time_s: m.mean_completion(),
            overhead_s: m.mean_overhead(),
            ft_messages: m.mean_messages(),
        });
    }
    if let Some(out) = &args.out {
        emit_csv(&rows, out)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut spec = match (&args.spec, args.preset.as_deref()) {
        (Some(path), None) => fileio::load_experiment(path)?,
        (None, Some("exp1")) | (None, None) => ExperimentSpec::experiment1(),
        (None, Some("exp2")) => ExperimentSpec::experiment2(),
        (None, Some(other)) => bail!("unknown preset `{other}` (expected exp1 or exp2)"),
        (Some(_), Some(_)) => unreachable!("clap forbids this combination"),
    };
    if let Some(seeds) = args.seeds {
        spec.seeds = seeds;
    }
    if let Some(values) = args.values {
        spec.values = values;
    }
    if !args.strategies.is_empty() {
        spec.strategies = parse_strategies(&args.strategies)?;
    }
    spec.validate()?;

    let result = run_experiment(&spec)?;
    let failed = write_experiment_output(&result, &args.out)?;
    println!(
        "sweep `{}`: {} rows, {} failed cells -> {}",
        spec.name,
        result.rows.len(),
        failed,
        args.out.display()
    );
    if failed > 0 {
        bail!("{failed} cells failed");
    }
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let mut rows = Vec::new();
    for input in &args.inputs {
        rows.extend(read_csv(input)?);
    }
    if rows.is_empty() {
        bail!("no rows found in the input files");
    }
    emit_summary_csv(&summarize(&rows), &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(args) => generate(args),
        Command::Run(args) => run_one(args),
        Command::Sweep(args) => sweep(args),
        Command::Report(args) => report(args),
    }
}
