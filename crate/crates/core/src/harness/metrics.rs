use serde::{Deserialize, Serialize};

use crate::scheduler::SimulationLog;

use super::HarnessError;

/// Summary of solver wall times [s].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RuntimeStats {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

impl RuntimeStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let mean = s.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let pct = |p: f64| s[((p * (n - 1) as f64).round() as usize).min(n - 1)];
        Self {
            count: n,
            mean,
            variance,
            min: s[0],
            median: pct(0.5),
            p95: pct(0.95),
            max: s[n - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub steps: usize,
    /// Simulated span [days], fractional for partial days.
    pub days: f64,
    /// Operating cost per calendar day [$]; negative values are income.
    pub daily_costs: Vec<f64>,
    pub total_cost: f64,
    pub average_daily_cost: f64,
    pub trade_cost: f64,
    pub degradation_cost: f64,
    pub violation_steps: usize,
    pub violation_rate: f64,
    /// Energy exchanged beyond the commitments because the battery
    /// could not follow [kWh].
    pub grid_deviation_energy: f64,
    pub capacity_loss: f64,
    pub decisions: usize,
    pub degraded_decisions: usize,
    /// Wall-clock timing; left out of serialized reports so they stay
    /// reproducible.
    #[serde(skip)]
    pub runtime: RuntimeStats,
}

/// Aggregates a simulation log: daily cost sums, violation rate and solver
/// timing.
pub fn compute_metrics(log: &SimulationLog) -> Result<MetricsReport, HarnessError> {
    let first = log.steps.first().ok_or(HarnessError::EmptyLog)?;
    let per_day = (24.0 / log.dt).round() as usize;
    let mut daily_costs = Vec::new();
    let mut total = 0.0;
    let mut trade = 0.0;
    let mut degradation = 0.0;
    let mut deviation = 0.0;
    let mut violations = 0;
    for s in &log.steps {
        let day = (s.index - first.index) / per_day;
        if daily_costs.len() <= day {
            daily_costs.resize(day + 1, 0.0);
        }
        let c = s.cost_op * log.dt;
        daily_costs[day] += c;
        total += c;
        trade += s.cost_trade * log.dt;
        degradation += s.cost_battery * log.dt;
        deviation += s.grid_deviation.abs() * log.dt;
        violations += usize::from(s.violated());
    }
    let steps = log.steps.len();
    let days = steps as f64 * log.dt / 24.0;
    let last = log.steps.last().unwrap();
    let runtimes: Vec<f64> = log.decisions.iter().map(|d| d.wall_time).collect();
    Ok(MetricsReport {
        steps,
        days,
        daily_costs,
        total_cost: total,
        average_daily_cost: total / days,
        trade_cost: trade,
        degradation_cost: degradation,
        violation_steps: violations,
        violation_rate: violations as f64 / steps as f64,
        grid_deviation_energy: deviation,
        capacity_loss: last.q_loss - first.q_loss,
        decisions: log.decisions.len(),
        degraded_decisions: log.decisions.iter().filter(|d| d.status != "converged").count(),
        runtime: RuntimeStats::from_samples(&runtimes),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery::BatteryState;
    use crate::scheduler::StepRecord;

    fn step(index: usize, cost: f64, violations: &str) -> StepRecord {
        StepRecord {
            index,
            timestamp: String::new(),
            p_pv: 0.0,
            p_load: 0.0,
            price: 0.0,
            t_amb: 298.0,
            p_grid: 0.0,
            grid_deviation: 0.0,
            q_c: 0.0,
            p_c: 0.0,
            p_b_requested: 0.0,
            p_b: 0.0,
            soc: 0.5,
            soh: 1.0,
            t_bat: 298.0,
            v_bat: 3.8,
            i_bat: 0.0,
            i_sr: 0.0,
            q_loss: 0.0,
            soc_next: 0.5,
            t_bat_next: 298.0,
            cost_trade: cost,
            cost_battery: 0.0,
            cost_op: cost,
            violations: violations.into(),
        }
    }

    fn log(steps: Vec<StepRecord>) -> SimulationLog {
        SimulationLog {
            dt: 0.25,
            n_di: 4,
            members: 1,
            seed: 0,
            steps,
            decisions: Vec::new(),
            commits: Vec::new(),
            snapshots: Vec::new(),
            final_state: BatteryState::from_soc(0.5, 0.0, 298.0, 1.747),
        }
    }

    #[test]
    fn opposite_costs_cancel() {
        let r = compute_metrics(&log(vec![step(0, 4.0, ""), step(1, -4.0, "")])).unwrap();
        assert_eq!(r.daily_costs, vec![0.0]);
        assert_eq!(r.total_cost, 0.0);
    }

    #[test]
    fn zero_log_gives_zero_report() {
        let r = compute_metrics(&log((0..96).map(|i| step(i, 0.0, "")).collect())).unwrap();
        assert_eq!(r.total_cost, 0.0);
        assert_eq!(r.violation_rate, 0.0);
        assert_eq!(r.days, 1.0);
    }

    #[test]
    fn one_violation_per_day() {
        let steps = (0..96).map(|i| step(i, 1.0, if i == 40 { "soc" } else { "" })).collect();
        let r = compute_metrics(&log(steps)).unwrap();
        assert_eq!(r.violation_rate, 1.0 / 96.0);
        assert_eq!(r.daily_costs, vec![24.0]);
    }

    #[test]
    fn empty_log_is_an_error() {
        assert!(compute_metrics(&log(Vec::new())).is_err());
    }
}
