use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::forecast::DisturbanceTable;
use crate::scheduler::{run_receding_horizon, SimulationLog};

use super::{compute_metrics, load_timeseries, synth_generator, ExperimentConfig, HarnessError, MetricsReport, SeriesPaths};

/// One line of the ensemble-size table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    pub average_daily_cost: f64,
    pub violation_rate: f64,
    pub runtime_mean: f64,
    pub runtime_variance: f64,
    pub total_cost: f64,
    pub steps: usize,
    pub degraded_decisions: usize,
}

impl SweepRow {
    pub fn new(m: usize, r: &MetricsReport) -> Self {
        Self {
            m,
            average_daily_cost: r.average_daily_cost,
            violation_rate: r.violation_rate,
            runtime_mean: r.runtime.mean,
            runtime_variance: r.runtime.variance,
            total_cost: r.total_cost,
            steps: r.steps,
            degraded_decisions: r.degraded_decisions,
        }
    }
}

/// Disturbance data for `config`: an aligned table, four series files, or
/// the synthetic generator when no path is given.
pub fn load_data(config: &ExperimentConfig) -> crate::Result<DisturbanceTable> {
    let d = &config.data;
    if let Some(path) = &d.table {
        return Ok(DisturbanceTable::read_csv_file(path)?);
    }
    match (&d.pv, &d.load, &d.price, &d.t_amb) {
        (Some(pv), Some(load), Some(price), Some(t_amb)) => {
            let paths = SeriesPaths {
                pv: pv.clone(),
                load: load.clone(),
                price: price.clone(),
                t_amb: t_amb.clone(),
            };
            Ok(load_timeseries(&paths, config.horizon.dt, d.price_scale)?)
        }
        (None, None, None, None) => Ok(synth_generator(config.required_days(), d.synth_seed)),
        _ => Err(HarnessError::Config("data needs either `table` or all of pv, load, price, t_amb".into()).into()),
    }
}

/// Runs one closed-loop simulation of `config` on `table`.
pub fn run_experiment(config: &ExperimentConfig, table: &DisturbanceTable) -> crate::Result<SimulationLog> {
    config.validate()?;
    run_receding_horizon(config.initial_state()?, table, &config.loop_config(), config.ensemble.seed)
}

/// Runs the full simulation once per ensemble size on shared data and a
/// shared seed. Runs are independent and execute in parallel.
pub fn sweep_ensemble_size(
    config: &ExperimentConfig,
    sizes: &[usize],
    seed: u64,
) -> crate::Result<Vec<(SweepRow, MetricsReport, SimulationLog)>> {
    if sizes.is_empty() {
        return Err(HarnessError::Config("ensemble-size list is empty".into()).into());
    }
    let table = load_data(config)?;
    sizes
        .par_iter()
        .map(|&m| {
            let mut cfg = config.clone();
            cfg.ensemble.members = m;
            cfg.ensemble.seed = seed;
            let tag = |e: &dyn std::fmt::Display| HarnessError::Sweep { m, message: e.to_string() };
            let log = run_experiment(&cfg, &table).map_err(|e| tag(&e))?;
            let report = compute_metrics(&log)?;
            Ok((SweepRow::new(m, &report), report, log))
        })
        .collect()
}
