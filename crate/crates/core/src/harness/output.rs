use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::battery::BatteryState;
use crate::forecast::{DisturbanceTable, Forecaster};
use crate::scheduler::{audit_commitments, CommitmentAudit, SimulationLog};

use super::{HarnessError, MetricsReport, SweepRow};

/// JSON summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub members: usize,
    pub seed: u64,
    pub metrics: MetricsReport,
    pub audit: CommitmentAudit,
    pub final_state: BatteryState,
}

impl RunSummary {
    pub fn new(log: &SimulationLog, metrics: MetricsReport) -> Self {
        Self {
            members: log.members,
            seed: log.seed,
            metrics,
            audit: audit_commitments(log),
            final_state: log.final_state,
        }
    }
}

fn create(path: &Path) -> Result<csv::Writer<std::fs::File>, HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| HarnessError::io(path, e))
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| HarnessError::io(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// One row per simulated step.
pub fn write_steps_csv(path: &Path, log: &SimulationLog) -> Result<(), HarnessError> {
    write_rows(path, &log.steps)
}

#[derive(Serialize)]
struct DecisionRow<'a> {
    index: usize,
    timestamp: &'a str,
    status: &'a str,
    iterations: usize,
    objective: f64,
    max_violation: f64,
    kkt_residual: f64,
    evaluations: usize,
    predicted_soc: f64,
    eps1: f64,
    eps2: f64,
    eps3: f64,
    eps4: f64,
    committed_p_grid: f64,
    committed_q_c: f64,
    message: &'a str,
}

#[derive(Serialize)]
struct RuntimeRow {
    index: usize,
    wall_time: f64,
}

/// Solver outcome per decision instant. Wall times go to a separate
/// `runtime` file next to it so that the decision table is reproducible.
pub fn write_decisions_csv(path: &Path, runtime_path: &Path, log: &SimulationLog) -> Result<(), HarnessError> {
    write_rows(
        path,
        log.decisions.iter().map(|d| DecisionRow {
            index: d.index,
            timestamp: &d.timestamp,
            status: &d.status,
            iterations: d.iterations,
            objective: d.objective,
            max_violation: d.max_violation,
            kkt_residual: d.kkt_residual,
            evaluations: d.evaluations,
            predicted_soc: d.predicted_soc,
            eps1: d.eps1,
            eps2: d.eps2,
            eps3: d.eps3,
            eps4: d.eps4,
            committed_p_grid: d.committed_p_grid,
            committed_q_c: d.committed_q_c,
            message: &d.message,
        }),
    )?;
    write_rows(
        runtime_path,
        log.decisions.iter().map(|d| RuntimeRow {
            index: d.index,
            wall_time: d.wall_time,
        }),
    )
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<(), HarnessError> {
    write_rows(path, rows)
}

/// Disturbance table with one-step forecast columns from `forecaster`
/// where the forecaster has enough history.
pub fn write_table_csv(path: &Path, table: &DisturbanceTable, forecaster: Option<&dyn Forecaster>) -> Result<(), HarnessError> {
    let mut t = table.clone();
    if let Some(f) = forecaster {
        t.forecast = Some(
            (0..t.len())
                .map(|i| f.forecast(table, i, i).unwrap_or(table.actual[i]))
                .collect(),
        );
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    t.write_csv_file(path).map_err(|e| HarnessError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::io(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}
