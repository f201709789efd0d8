use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hems_core::battery::BatteryModel;
use hems_core::forecast::forecaster_registry;
use hems_core::harness::{
    compute_metrics, load_data, random_profile, run_experiment, sweep_ensemble_size,
    synth_generator, validate_model, write_decisions_csv, write_json, write_steps_csv,
    write_sweep_csv, write_table_csv, ExperimentConfig, RunSummary,
};
use hems_core::{Error, ErrorCategory};

/// Ensemble NMPC economic dispatch for a residential PV-battery system.
#[derive(Parser, Debug)]
#[command(name = "hems", version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML experiment configuration; defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Random seed (ensemble sampling, synthetic data, profiles).
    #[arg(long)]
    seed: Option<u64>,

    /// Simulated days.
    #[arg(long)]
    days: Option<f64>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one closed-loop simulation.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Ensemble size.
        #[arg(long)]
        m: Option<usize>,
    },
    /// Run the simulation for several ensemble sizes on shared data.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Ensemble sizes, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        m: Vec<usize>,
    },
    /// Write a synthetic disturbance table.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Run the battery-model invariant suite on random power profiles.
    ValidateModel {
        #[command(flatten)]
        common: Common,
        /// Number of profiles.
        #[arg(long, default_value_t = 1000)]
        m: usize,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.ensemble.seed = seed;
    }
    if let Some(days) = common.days {
        cfg.simulation.days = days;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(common: &Common, m: Option<usize>) -> Result<(), Error> {
    let mut cfg = load_config(common)?;
    if let Some(m) = m {
        cfg.ensemble.members = m;
    }
    cfg.validate()?;
    let table = load_data(&cfg)?;
    let log = run_experiment(&cfg, &table)?;
    let metrics = compute_metrics(&log)?;
    let out = &common.out;
    write_steps_csv(&out.join("steps.csv"), &log)?;
    write_decisions_csv(&out.join("decisions.csv"), &out.join("runtime.csv"), &log)?;
    let forecaster = forecaster_registry().build(&cfg.ensemble.forecaster, &())?;
    write_table_csv(&out.join("history.csv"), &table, Some(forecaster.as_ref()))?;
    write_json(&out.join("runtime.json"), &metrics.runtime)?;
    let summary = RunSummary::new(&log, metrics);
    write_json(&out.join("summary.json"), &summary)?;
    let r = &summary.metrics;
    println!(
        "m = {}: {:.2} days, average daily cost {:.4} $, violation rate {:.4}, {} decisions ({} degraded)",
        log.members, r.days, r.average_daily_cost, r.violation_rate, r.decisions, r.degraded_decisions
    );
    Ok(())
}

fn sweep(common: &Common, sizes: &[usize]) -> Result<(), Error> {
    let cfg = load_config(common)?;
    let runs = sweep_ensemble_size(&cfg, sizes, cfg.ensemble.seed)?;
    let out = &common.out;
    for (i, (row, report, log)) in runs.iter().enumerate() {
        // duplicate sizes get their own directory
        let dir = out.join(format!("run{i:02}_m{}", row.m));
        write_steps_csv(&dir.join("steps.csv"), log)?;
        write_decisions_csv(&dir.join("decisions.csv"), &dir.join("runtime.csv"), log)?;
        write_json(&dir.join("runtime.json"), &report.runtime)?;
        write_json(&dir.join("summary.json"), &RunSummary::new(log, report.clone()))?;
        println!(
            "m = {:>3}: average daily cost {:.4} $, violation rate {:.4}, mean solve {:.3} s",
            row.m, row.average_daily_cost, row.violation_rate, row.runtime_mean
        );
    }
    let rows: Vec<_> = runs.iter().map(|r| r.0.clone()).collect();
    write_sweep_csv(&out.join("sweep.csv"), &rows)?;
    write_json(&out.join("sweep.json"), &rows)?;
    Ok(())
}

fn synth(common: &Common) -> Result<(), Error> {
    let cfg = load_config(common)?;
    let days = common.days.map(|d| d.ceil() as usize).unwrap_or(cfg.required_days());
    let seed = common.seed.unwrap_or(cfg.data.synth_seed);
    let table = synth_generator(days, seed);
    let forecaster = forecaster_registry().build(&cfg.ensemble.forecaster, &())?;
    let path = common.out.join("synth.csv");
    write_table_csv(&path, &table, Some(forecaster.as_ref()))?;
    println!("{} rows written to {}", table.len(), path.display());
    Ok(())
}

fn validate(common: &Common, profiles: usize) -> Result<bool, Error> {
    let cfg = load_config(common)?;
    let model = BatteryModel::new(cfg.battery.clone())?;
    let dt = cfg.horizon.dt;
    let steps = (common.days.unwrap_or(1.0) * 24.0 / dt).round() as usize;
    let seed = common.seed.unwrap_or(0);
    let set: Vec<_> = (0..profiles as u64)
        .map(|j| random_profile(seed.wrapping_add(j), steps, dt, cfg.limits.p_b_max))
        .collect();
    let initial = model.fresh_state(cfg.simulation.initial_soc, cfg.simulation.initial_temperature);
    let report = validate_model(&model, &initial, &set, cfg.simulation.initial_temperature, dt);
    write_json(&common.out.join("validation.json"), &report)?;
    let ok = report.passed(1e-12, 1e-9);
    println!(
        "{} profiles, {} steps: bookkeeping {:.2e} Ah, power residual {:.2e} kW, {}",
        report.profiles,
        report.steps,
        report.max_bookkeeping_error,
        report.max_power_residual,
        if ok { "passed" } else { "FAILED" }
    );
    for f in report.failures.iter().take(10) {
        eprintln!("  {f}");
    }
    Ok(ok)
}

fn exit_code(category: ErrorCategory) -> ExitCode {
    ExitCode::from(category.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common, m } => simulate(common, *m).map(|_| true),
        Command::Sweep { common, m } => sweep(common, m).map(|_| true),
        Command::Synth { common } => synth(common).map(|_| true),
        Command::ValidateModel { common, m } => validate(common, *m),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => exit_code(ErrorCategory::Model),
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.category())
        }
    }
}
