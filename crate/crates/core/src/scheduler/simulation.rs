use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::battery::{BatteryModel, BatteryOutput, BatteryParams, BatteryState};
use crate::dispatch::{
    assemble_problem, battery_power, solver_registry, stage1_predict, CostParams, Converters,
    DecisionVector, DispatchError, DispatchSolver, HorizonConfig, OperatingLimits, Problem,
    SolveStatus, SqpOptions,
};
use crate::forecast::{
    forecaster_registry, generate_ensemble, segment_of, DisturbanceTable, ErrorHistory, Forecaster,
};

use super::{horizon_indices, DispatchSchedule, ScheduleError};

/// Tolerance above which a limit counts as violated at the plant.
pub const VIOLATION_TOL: f64 = 1e-6;

/// The plant refuses power that would bring the state of charge closer
/// than this to empty or full, so that it can always rest afterwards.
pub const PLANT_SOC_MARGIN: f64 = 1e-3;

/// Additive noise on the state estimate handed to the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorNoise {
    /// Standard deviation on the state of charge.
    pub soc: f64,
    /// Standard deviation on the temperature [K].
    pub temperature: f64,
}

/// Everything the loop needs besides the data and the initial state.
#[derive(Debug, Clone)]
pub struct LoopConfig {
    pub horizon: HorizonConfig,
    pub limits: OperatingLimits,
    pub cost: CostParams,
    pub converters: Converters,
    /// Parameters of the prediction model.
    pub battery: BatteryParams,
    /// Parameters of the simulated plant.
    pub plant: BatteryParams,
    pub members: usize,
    pub history_days: usize,
    pub segments: usize,
    pub forecaster: String,
    pub solver: String,
    pub solver_options: SqpOptions,
    pub noise: EstimatorNoise,
    /// First simulated step (table row).
    pub start: usize,
    /// Number of simulated steps.
    pub steps: usize,
}

/// Mutable state of the loop at a decision instant.
#[derive(Debug, Clone)]
pub struct LoopState {
    pub k: usize,
    pub state: BatteryState,
    pub history: ErrorHistory,
    pub schedule: DispatchSchedule,
    pub seed: u64,
    pub horizon: HorizonConfig,
    pub last_decision: Option<DecisionVector>,
}

impl LoopState {
    /// Records the decision taken at `self.k`: its first `M` hours become
    /// committed, the remainder tentative.
    pub fn commit_step(&mut self, decision: &DecisionVector) -> Result<(), ScheduleError> {
        let h = &self.horizon;
        let start = self.k + h.n_d();
        self.schedule
            .apply(start, decision, h.n_m() / h.n_di(), self.k)?;
        self.last_decision = Some(decision.clone());
        Ok(())
    }
}

/// One simulated step at the plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub timestamp: String,
    pub p_pv: f64,
    pub p_load: f64,
    pub price: f64,
    pub t_amb: f64,
    /// Committed grid power applied in this step [kW].
    pub p_grid: f64,
    /// Extra grid exchange when the battery could not follow [kW].
    pub grid_deviation: f64,
    pub q_c: f64,
    pub p_c: f64,
    pub p_b_requested: f64,
    pub p_b: f64,
    pub soc: f64,
    pub soh: f64,
    pub t_bat: f64,
    pub v_bat: f64,
    pub i_bat: f64,
    pub i_sr: f64,
    pub q_loss: f64,
    pub soc_next: f64,
    pub t_bat_next: f64,
    pub cost_trade: f64,
    pub cost_battery: f64,
    /// Operating cost rate [$/h].
    pub cost_op: f64,
    /// Names of the limits exceeded in this step, `;`-separated.
    pub violations: String,
}

impl StepRecord {
    pub fn violated(&self) -> bool {
        !self.violations.is_empty()
    }
}

/// Outcome of one optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub index: usize,
    pub timestamp: String,
    pub status: String,
    pub iterations: usize,
    pub objective: f64,
    pub max_violation: f64,
    pub kkt_residual: f64,
    pub evaluations: usize,
    pub wall_time: f64,
    pub predicted_soc: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub eps4: f64,
    pub committed_p_grid: f64,
    pub committed_q_c: f64,
    pub message: String,
}

/// Value written into the schedule when an interval became committed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub start: usize,
    pub p_grid: f64,
    pub q_c: f64,
    pub decided_at: usize,
}

/// Committed entries of `[k, k + D)` as seen at decision instant `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSnapshot {
    pub decision: usize,
    pub entries: Vec<CommitRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationLog {
    pub dt: f64,
    pub n_di: usize,
    pub members: usize,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub decisions: Vec<DecisionRecord>,
    pub commits: Vec<CommitRecord>,
    pub snapshots: Vec<WindowSnapshot>,
    pub final_state: BatteryState,
}

/// Result of replaying the commitment bookkeeping of a log.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CommitmentAudit {
    pub decisions_checked: usize,
    pub entries_checked: usize,
    /// Snapshot entries whose value differs from the original commitment.
    pub mutations: usize,
    /// Steps whose applied grid power differs from their commitment.
    pub realized_mismatches: usize,
    /// Steps not covered by exactly one commitment.
    pub uncovered_steps: usize,
}

impl CommitmentAudit {
    pub fn clean(&self) -> bool {
        self.mutations == 0 && self.realized_mismatches == 0 && self.uncovered_steps == 0
    }
}

/// Replays a log: every committed window seen at a decision instant must
/// match the value recorded at commitment, and every applied grid power
/// must equal the commitment of its interval, bit for bit.
pub fn audit_commitments(log: &SimulationLog) -> CommitmentAudit {
    use std::collections::BTreeMap;
    let mut first: BTreeMap<usize, Vec<CommitRecord>> = BTreeMap::new();
    for c in &log.commits {
        first.entry(c.start).or_default().push(*c);
    }
    let mut audit = CommitmentAudit::default();
    for snap in &log.snapshots {
        audit.decisions_checked += 1;
        for e in &snap.entries {
            audit.entries_checked += 1;
            let same = first.get(&e.start).and_then(|v| v.first()).is_some_and(|c| {
                c.p_grid.to_bits() == e.p_grid.to_bits() && c.q_c.to_bits() == e.q_c.to_bits()
            });
            if !same {
                audit.mutations += 1;
            }
        }
    }
    audit.mutations += first.values().filter(|v| v.len() > 1).count();
    for s in &log.steps {
        let block = s.index - (s.index - log.steps[0].index) % log.n_di;
        match first.get(&block).map(Vec::as_slice) {
            Some([c]) => {
                if c.p_grid.to_bits() != s.p_grid.to_bits() || c.q_c.to_bits() != s.q_c.to_bits() {
                    audit.realized_mismatches += 1;
                }
            }
            _ => audit.uncovered_steps += 1,
        }
    }
    audit
}

fn decision_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn soc_of(model: &BatteryModel, s: &BatteryState) -> f64 {
    let q0 = model.capacity();
    (q0 - s.q1_neg) / (q0 - model.q_loss(s))
}

/// Steps the plant, shrinking the battery power towards zero when the
/// requested power is infeasible or would leave the admissible charge range.
fn plant_step(
    plant: &BatteryModel,
    state: &BatteryState,
    p_b: f64,
    q_c: f64,
    t_amb: f64,
    dt: f64,
) -> Result<(BatteryState, BatteryOutput), ScheduleError> {
    let admissible = |p: f64| -> Option<(BatteryState, BatteryOutput)> {
        let (next, out) = plant.step(state, p, q_c, t_amb, dt).ok()?;
        let soc = soc_of(plant, &next);
        // the next step must be evaluable too
        ((PLANT_SOC_MARGIN..=1.0 - PLANT_SOC_MARGIN).contains(&soc) && plant.equivalent(&next).is_ok())
            .then_some((next, out))
    };
    if let Some(r) = admissible(p_b) {
        return Ok(r);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    // at an empty or full cell, rest may still drift out through the side
    // reaction; that is accepted as long as the model stays defined
    let rest = || {
        plant
            .step(state, 0.0, q_c, t_amb, dt)
            .ok()
            .filter(|(next, _)| plant.equivalent(next).is_ok())
    };
    let mut best = admissible(0.0).or_else(rest).ok_or_else(|| ScheduleError::Plant {
        message: format!("battery cannot idle at state {state:?}"),
    })?;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        match admissible(mid * p_b) {
            Some(r) => {
                lo = mid;
                best = r;
            }
            None => hi = mid,
        }
    }
    Ok(best)
}

fn limit_violations(
    limits: &OperatingLimits,
    out: &BatteryOutput,
    soc_next: f64,
    t_next: f64,
    p_grid: f64,
) -> String {
    let tol = VIOLATION_TOL;
    let mut v = Vec::new();
    if soc_next < limits.soc_min - tol || soc_next > limits.soc_max + tol {
        v.push("soc");
    }
    if t_next < limits.t_min - tol || t_next > limits.t_max + tol {
        v.push("temperature");
    }
    if out.v_bat < limits.v_min - tol || out.v_bat > limits.v_max + tol {
        v.push("voltage");
    }
    if out.i_bat.abs() > limits.i_max + tol {
        v.push("current");
    }
    if out.p_b.abs() > limits.p_b_max + tol {
        v.push("battery_power");
    }
    if p_grid.abs() > limits.p_grid_max + tol {
        v.push("grid_power");
    }
    if out.p_c > limits.p_c_max + tol {
        v.push("thermal_power");
    }
    v.join(";")
}

/// Runs the market loop over `config.steps` steps of `table` starting at
/// `config.start`.
///
/// Every `M` hours the loop learns error moments from the rolling
/// history, samples an ensemble, predicts the state at the end of the
/// committed window, solves the dispatch problem and commits its first
/// `M` hours. In between, committed controls drive the plant with the
/// measured disturbances.
pub fn run_receding_horizon(
    initial: BatteryState,
    table: &DisturbanceTable,
    config: &LoopConfig,
    seed: u64,
) -> crate::Result<SimulationLog> {
    let h = &config.horizon;
    h.validate()?;
    config.limits.validate()?;
    config.cost.validate()?;
    if (table.dt - h.dt).abs() > 1e-9 {
        return Err(ScheduleError::Config(format!(
            "data step {} h differs from the model step {} h",
            table.dt, h.dt
        ))
        .into());
    }
    if config.members == 0 || config.segments == 0 || h.steps_per_day() % config.segments != 0 {
        return Err(ScheduleError::Config(
            "members must be positive and segments must divide the day".into(),
        )
        .into());
    }
    let forecaster: Box<dyn Forecaster> = forecaster_registry().build(&config.forecaster, &())?;
    let solver: Box<dyn DispatchSolver> =
        solver_registry().build(&config.solver, &config.solver_options)?;
    let model = BatteryModel::new(config.battery.clone())?;
    let plant = BatteryModel::new(config.plant.clone())?;
    let day = h.steps_per_day();
    let warmup = config.history_days * day + forecaster.lookback(day);
    let end = config.start + config.steps;
    if config.start < warmup || end + h.n_p() > table.len() {
        return Err(ScheduleError::DataCoverage {
            needed: warmup.max(config.start) + config.steps + h.n_p(),
            available: table.len(),
        }
        .into());
    }
    let (n_d, n_m, n_di, n_t) = (h.n_d(), h.n_m(), h.n_di(), h.n_t());

    let mut history = ErrorHistory::new(config.history_days);
    for i in config.start - config.history_days * day..config.start {
        let f = forecaster.forecast(table, i, i)?;
        history.push(table.hours_at(i), f.to_array(), table.actual[i].to_array());
    }
    let mut ls = LoopState {
        k: config.start,
        state: initial,
        history,
        schedule: DispatchSchedule::bootstrap(config.start, n_di, n_d / n_di),
        seed,
        horizon: *h,
        last_decision: None,
    };
    let mut commits: Vec<CommitRecord> = ls
        .schedule
        .entries()
        .iter()
        .map(|e| CommitRecord {
            start: e.start,
            p_grid: e.p_grid,
            q_c: e.q_c,
            decided_at: config.start,
        })
        .collect();
    let mut log = SimulationLog {
        dt: h.dt,
        n_di,
        members: config.members,
        seed,
        steps: Vec::with_capacity(config.steps),
        decisions: Vec::new(),
        commits: Vec::new(),
        snapshots: Vec::new(),
        final_state: initial,
    };
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(u64::MAX);
    let kappa = config.cost.kappa();

    let mut k = config.start;
    while k < end {
        ls.k = k;
        let idx = horizon_indices(k, h);
        log.snapshots.push(WindowSnapshot {
            decision: k,
            entries: idx
                .delay
                .clone()
                .step_by(n_di)
                .filter_map(|i| ls.schedule.entry_at(i))
                .map(|e| CommitRecord {
                    start: e.start,
                    p_grid: e.p_grid,
                    q_c: e.q_c,
                    decided_at: e.committed_at.unwrap_or(k),
                })
                .collect(),
        });

        // ensemble over the prediction horizon
        let nominal = forecaster.trajectory(table, k, idx.prediction.start, h.n_p())?;
        let by_segment = ls.history.segment_moments(config.segments);
        let moments: Vec<_> = idx
            .prediction
            .clone()
            .map(|i| by_segment[segment_of(table.hours_at(i), config.segments) - 1].clone())
            .collect();
        let ensemble = generate_ensemble(&nominal, &moments, config.members, decision_seed(seed, k))?;

        // state estimate and stage-1 prediction
        let mut estimate = ls.state;
        if config.noise.soc > 0.0 || config.noise.temperature > 0.0 {
            let soc = soc_of(&model, &estimate);
            let q_loss = model.q_loss(&estimate);
            let ds = Normal::new(0.0, config.noise.soc.max(0.0)).unwrap().sample(&mut noise_rng);
            let dtemp = Normal::new(0.0, config.noise.temperature.max(0.0)).unwrap().sample(&mut noise_rng);
            estimate = BatteryState::from_soc(
                (soc + ds).clamp(0.0, 1.0),
                q_loss,
                estimate.t_bat + dtemp,
                model.capacity(),
            );
        }
        let committed = ls.schedule.committed_controls(idx.delay.clone())?;
        let delay_members: Vec<_> = ensemble.members.iter().map(|m| m[..n_d].to_vec()).collect();
        let warm = ls.last_decision.as_ref().map(|d| d.shifted(n_m / n_di));
        let timestamp = table.timestamp(k).format("%Y-%m-%d %H:%M").to_string();

        let attempt = stage1_predict(&model, &estimate, &committed, &delay_members, &config.converters, h.dt)
            .and_then(|x_d| {
                let spec = assemble_problem(
                    x_d,
                    &ensemble.window(n_d, n_t),
                    h,
                    &config.limits,
                    &config.cost,
                    &config.converters,
                    &config.battery,
                )?;
                let problem = Problem::with_model(spec, model.clone())?;
                Ok((x_d, solver.solve(&problem, warm.as_ref())))
            });
        let (decision, record) = match attempt {
            Ok((x_d, Ok(sol))) => {
                let d = &sol.diagnostics;
                let status = match d.status {
                    SolveStatus::Converged => "converged",
                    SolveStatus::Degraded => "degraded",
                };
                let rec = decision_record(k, &timestamp, status, d, soc_of(&model, &x_d), &sol.decision, String::new());
                (sol.decision, rec)
            }
            Ok((x_d, Err(DispatchError::Infeasible { constraint, violation, best }))) => {
                let rec = decision_record(
                    k,
                    &timestamp,
                    "infeasible",
                    &best.diagnostics,
                    soc_of(&model, &x_d),
                    &best.decision,
                    format!("{constraint} violated by {violation:.3e}"),
                );
                (best.decision, rec)
            }
            Ok((_, Err(e))) | Err(e) => {
                // keep the previous plan if the optimization could not run
                let fallback = warm.clone().unwrap_or_else(|| DecisionVector::zeros(h.blocks()));
                let rec = DecisionRecord {
                    index: k,
                    timestamp: timestamp.clone(),
                    status: "failed".into(),
                    iterations: 0,
                    objective: f64::NAN,
                    max_violation: f64::NAN,
                    kkt_residual: f64::NAN,
                    evaluations: 0,
                    wall_time: 0.0,
                    predicted_soc: f64::NAN,
                    eps1: 0.0,
                    eps2: 0.0,
                    eps3: 0.0,
                    eps4: 0.0,
                    committed_p_grid: fallback.p_grid[0],
                    committed_q_c: fallback.q_c[0],
                    message: e.to_string(),
                };
                (fallback, rec)
            }
        };
        ls.commit_step(&decision)?;
        for b in 0..n_m / n_di {
            commits.push(CommitRecord {
                start: idx.optimization.start + b * n_di,
                p_grid: decision.p_grid[b],
                q_c: decision.q_c[b],
                decided_at: k,
            });
        }
        log.decisions.push(record);

        // plant between decision instants
        for i in k..(k + n_m).min(end) {
            let d = table.actual[i];
            let (p_grid, q_c) = ls.schedule.committed_controls(i..i + 1)?[0];
            let p_c = plant.thermal_power(q_c);
            let requested = battery_power(&config.converters, &d, p_grid, p_c);
            let (next, out) = plant_step(&plant, &ls.state, requested, q_c, d.t_amb, h.dt)
                .map_err(|e| match e {
                    ScheduleError::Plant { message } => ScheduleError::Plant {
                        message: format!("step {i}: {message}"),
                    },
                    other => other,
                })?;
            let deviation = (requested - out.p_b) / config.converters.battery;
            let grid = p_grid + deviation;
            let soc_next = soc_of(&plant, &next);
            let cost_trade = -d.price * grid;
            let cost_battery = kappa * -out.i_sr;
            log.steps.push(StepRecord {
                index: i,
                timestamp: table.timestamp(i).format("%Y-%m-%d %H:%M").to_string(),
                p_pv: d.p_pv,
                p_load: d.p_load,
                price: d.price,
                t_amb: d.t_amb,
                p_grid,
                grid_deviation: deviation,
                q_c,
                p_c,
                p_b_requested: requested,
                p_b: out.p_b,
                soc: out.soc,
                soh: out.soh,
                t_bat: ls.state.t_bat,
                v_bat: out.v_bat,
                i_bat: out.i_bat,
                i_sr: out.i_sr,
                q_loss: out.q_loss,
                soc_next,
                t_bat_next: next.t_bat,
                cost_trade,
                cost_battery,
                cost_op: cost_trade + cost_battery,
                violations: limit_violations(&config.limits, &out, soc_next, next.t_bat, grid),
            });
            ls.state = next;
            let f = forecaster.forecast(table, i, i)?;
            ls.history.push(table.hours_at(i), f.to_array(), d.to_array());
        }
        ls.schedule.retire_until((k + n_m).min(end));
        k += n_m;
    }
    log.commits = commits;
    log.final_state = ls.state;
    Ok(log)
}

fn decision_record(
    k: usize,
    timestamp: &str,
    status: &str,
    d: &crate::dispatch::Diagnostics,
    predicted_soc: f64,
    decision: &DecisionVector,
    message: String,
) -> DecisionRecord {
    DecisionRecord {
        index: k,
        timestamp: timestamp.to_string(),
        status: status.to_string(),
        iterations: d.iterations,
        objective: d.objective,
        max_violation: d.max_violation,
        kkt_residual: d.kkt_residual,
        evaluations: d.evaluations,
        wall_time: d.wall_time,
        predicted_soc,
        eps1: decision.slack[0],
        eps2: decision.slack[1],
        eps3: decision.slack[2],
        eps4: decision.slack[3],
        committed_p_grid: decision.p_grid[0],
        committed_q_c: decision.q_c[0],
        message,
    }
}
