//! The ensemble dispatch program: decision layout, objective and
//! constraint evaluation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::battery::{BatteryError, BatteryModel, BatteryOutput, BatteryParams, BatteryState};
use crate::forecast::{DisturbanceSample, EnsembleSet};

use super::{CostParams, DispatchError, HorizonConfig, OperatingLimits};

/// Constraint rows evaluated per member and step.
pub const ROWS_PER_STEP: usize = 10;

/// Default smoothing width of `|Q_c|` inside the optimizer [kW].
pub const DEFAULT_SMOOTHING: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    VoltageMax,
    VoltageMin,
    CurrentMax,
    CurrentMin,
    PowerMax,
    PowerMin,
    SocMin,
    SocMax,
    TemperatureMin,
    TemperatureMax,
}

impl ConstraintKind {
    /// Row order within one member-step block.
    pub const ALL: [ConstraintKind; ROWS_PER_STEP] = [
        ConstraintKind::VoltageMax,
        ConstraintKind::VoltageMin,
        ConstraintKind::CurrentMax,
        ConstraintKind::CurrentMin,
        ConstraintKind::PowerMax,
        ConstraintKind::PowerMin,
        ConstraintKind::SocMin,
        ConstraintKind::SocMax,
        ConstraintKind::TemperatureMin,
        ConstraintKind::TemperatureMax,
    ];

    /// Index of the slack relaxing this row, if it is soft.
    pub fn slack(self) -> Option<usize> {
        match self {
            ConstraintKind::SocMin => Some(0),
            ConstraintKind::SocMax => Some(1),
            ConstraintKind::TemperatureMin => Some(2),
            ConstraintKind::TemperatureMax => Some(3),
            _ => None,
        }
    }

    /// Width of the admissible band, used to screen far-inactive rows.
    pub fn range(self, limits: &OperatingLimits) -> f64 {
        match self {
            ConstraintKind::VoltageMax | ConstraintKind::VoltageMin => limits.v_max - limits.v_min,
            ConstraintKind::CurrentMax | ConstraintKind::CurrentMin => 2.0 * limits.i_max,
            ConstraintKind::PowerMax | ConstraintKind::PowerMin => 2.0 * limits.p_b_max,
            ConstraintKind::SocMin | ConstraintKind::SocMax => limits.soc_max - limits.soc_min,
            ConstraintKind::TemperatureMin | ConstraintKind::TemperatureMax => {
                limits.t_max - limits.t_min
            }
        }
    }
}

/// Location of one constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintId {
    pub member: usize,
    pub step: usize,
    pub kind: ConstraintKind,
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} (member {}, step {})", self.kind, self.member, self.step)
    }
}

/// Constant converter efficiencies of the power balance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Converters {
    pub pv: f64,
    pub battery: f64,
}

impl Default for Converters {
    fn default() -> Self {
        Self {
            pv: 0.97,
            battery: 0.95,
        }
    }
}

/// Pack power left after PV, load, grid exchange and the thermal unit [kW].
pub fn battery_power(conv: &Converters, d: &DisturbanceSample, p_grid: f64, p_c: f64) -> f64 {
    conv.battery * (conv.pv * d.p_pv - p_grid - d.p_load - p_c)
}

/// One model step that stays defined outside the admissible charge range.
///
/// When the state of charge has left `[0, 1]` the algebraic part (current,
/// side reaction, heat) is evaluated at the nearest admissible state and
/// the increment is added to the actual state, so predictions keep moving
/// continuously instead of failing.
pub fn predict_step(
    model: &BatteryModel,
    state: &BatteryState,
    p_b: f64,
    q_c: f64,
    p_c: f64,
    t_amb: f64,
    dt: f64,
) -> Result<(BatteryState, BatteryOutput), BatteryError> {
    let q0 = model.capacity();
    let q_loss = model.q_loss(state);
    let soc = (q0 - state.q1_neg) / (q0 - q_loss);
    if (0.0..=1.0).contains(&soc) {
        return model.step_with_thermal_power(state, p_b, q_c, p_c, t_amb, dt);
    }
    let inside = BatteryState::from_soc(soc.clamp(0.0, 1.0), q_loss, state.t_bat, q0);
    let (next, out) = model.step_with_thermal_power(&inside, p_b, q_c, p_c, t_amb, dt)?;
    Ok((
        BatteryState {
            q1_pos: next.q1_pos + (state.q1_pos - inside.q1_pos),
            q1_neg: next.q1_neg + (state.q1_neg - inside.q1_neg),
            t_bat: next.t_bat,
        },
        out,
    ))
}

/// Everything needed to rebuild and re-solve one dispatch problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    /// Predicted state at the start of the optimization horizon.
    pub initial_state: BatteryState,
    pub horizon: HorizonConfig,
    pub limits: OperatingLimits,
    pub cost: CostParams,
    pub converters: Converters,
    pub battery: BatteryParams,
    /// Disturbance members over the optimization horizon.
    pub ensemble: Vec<Vec<DisturbanceSample>>,
    /// Smoothing width of `|Q_c|` [kW].
    pub smoothing: f64,
}

impl ProblemSpec {
    pub fn members(&self) -> usize {
        self.ensemble.len()
    }

    /// `(soft range constraints, hard one-sided constraints)`: each member
    /// and step carries an SoC band and a temperature band, plus upper and
    /// lower voltage, current and pack-power limits.
    pub fn constraint_counts(&self) -> (usize, usize) {
        let n = self.members() * self.horizon.n_t();
        (2 * n, 6 * n)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DispatchError> {
        serde_json::from_str(text).map_err(|e| DispatchError::Config(e.to_string()))
    }
}

/// Builds the program for the optimization horizon from a predicted start
/// state and an ensemble restricted to that horizon.
#[allow(clippy::too_many_arguments)]
pub fn assemble_problem(
    initial_state: BatteryState,
    ensemble: &EnsembleSet,
    horizon: &HorizonConfig,
    limits: &OperatingLimits,
    cost: &CostParams,
    converters: &Converters,
    battery: &BatteryParams,
) -> Result<ProblemSpec, DispatchError> {
    horizon.validate()?;
    limits.validate()?;
    cost.validate()?;
    if ensemble.size() == 0 {
        return Err(DispatchError::Config("ensemble has no members".into()));
    }
    let n_t = horizon.n_t();
    if let Some((j, m)) = ensemble.members.iter().enumerate().find(|(_, m)| m.len() != n_t) {
        return Err(DispatchError::Config(format!(
            "member {j} covers {} steps, the optimization horizon has {n_t}",
            m.len()
        )));
    }
    if !initial_state.is_finite() {
        return Err(DispatchError::Config("initial state is not finite".into()));
    }
    Ok(ProblemSpec {
        initial_state,
        horizon: *horizon,
        limits: *limits,
        cost: *cost,
        converters: *converters,
        battery: battery.clone(),
        ensemble: ensemble.members.clone(),
        smoothing: DEFAULT_SMOOTHING,
    })
}

/// Decision variables: one grid power and one thermal power per dispatch
/// interval, then the four slacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionVector {
    pub p_grid: Vec<f64>,
    pub q_c: Vec<f64>,
    pub slack: [f64; 4],
}

impl DecisionVector {
    pub fn zeros(blocks: usize) -> Self {
        Self {
            p_grid: vec![0.0; blocks],
            q_c: vec![0.0; blocks],
            slack: [0.0; 4],
        }
    }

    pub fn blocks(&self) -> usize {
        self.p_grid.len()
    }

    pub fn len(&self) -> usize {
        2 * self.blocks() + 4
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.p_grid);
        v.extend_from_slice(&self.q_c);
        v.extend_from_slice(&self.slack);
        v
    }

    pub fn from_slice(x: &[f64]) -> Result<Self, DispatchError> {
        if x.len() < 4 || (x.len() - 4) % 2 != 0 {
            return Err(DispatchError::Config(format!(
                "decision vector length {} is not 2*blocks + 4",
                x.len()
            )));
        }
        let b = (x.len() - 4) / 2;
        Ok(Self {
            p_grid: x[..b].to_vec(),
            q_c: x[b..2 * b].to_vec(),
            slack: [x[2 * b], x[2 * b + 1], x[2 * b + 2], x[2 * b + 3]],
        })
    }

    /// Per-step `(p_grid, q_c)` with each block held for `n_di` steps.
    pub fn expand(&self, n_di: usize) -> Vec<(f64, f64)> {
        self.p_grid
            .iter()
            .zip(&self.q_c)
            .flat_map(|(&p, &q)| std::iter::repeat((p, q)).take(n_di))
            .collect()
    }

    /// Inverse of [`Self::expand`]: the first value of each block.
    pub fn from_steps(steps: &[(f64, f64)], n_di: usize, slack: [f64; 4]) -> Self {
        let (p_grid, q_c) = steps.iter().step_by(n_di.max(1)).copied().unzip();
        Self { p_grid, q_c, slack }
    }

    /// Drops the first `blocks` intervals and repeats the last one, for
    /// warm-starting the next decision.
    pub fn shifted(&self, blocks: usize) -> Self {
        let shift = |v: &[f64]| -> Vec<f64> {
            let n = v.len();
            (0..n).map(|i| v[(i + blocks).min(n - 1)]).collect()
        };
        if self.blocks() == 0 {
            return self.clone();
        }
        Self {
            p_grid: shift(&self.p_grid),
            q_c: shift(&self.q_c),
            slack: self.slack,
        }
    }
}

/// Result of evaluating a decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    /// Ensemble-averaged operating cost over the horizon [$].
    pub operating_cost: f64,
    /// Constraint values `g <= 0`, soft rows already relaxed by their slack.
    pub rows: Vec<f64>,
    /// Smallest slacks that satisfy every soft row.
    pub required_slack: [f64; 4],
    pub max_hard_violation: f64,
}

/// Per-member states and operating cost recorded at dispatch-interval
/// boundaries, so that a rollout can restart mid-horizon.
#[derive(Debug, Clone)]
pub(crate) struct Trace {
    pub(crate) states: Vec<BatteryState>,
    pub(crate) block_cost: Vec<f64>,
}

/// A compiled [`ProblemSpec`].
///
/// Identical ensemble members are merged and weighted by multiplicity; the
/// merged program has the same objective and feasible set.
#[derive(Debug, Clone)]
pub struct Problem {
    spec: ProblemSpec,
    model: BatteryModel,
    members: Vec<Vec<DisturbanceSample>>,
    weights: Vec<f64>,
    /// First original index of each merged member.
    origin: Vec<usize>,
    blocks: usize,
    n_di: usize,
    n_t: usize,
}

impl Problem {
    pub fn new(spec: ProblemSpec) -> crate::Result<Self> {
        let model = BatteryModel::new(spec.battery.clone())?;
        Ok(Self::with_model(spec, model)?)
    }

    /// Uses `model` for predictions instead of building one from
    /// `spec.battery`.
    pub fn with_model(spec: ProblemSpec, model: BatteryModel) -> Result<Self, DispatchError> {
        spec.horizon.validate()?;
        let n_t = spec.horizon.n_t();
        if spec.ensemble.is_empty() || spec.ensemble.iter().any(|m| m.len() != n_t) {
            return Err(DispatchError::Config(format!(
                "ensemble must hold at least one member of {n_t} steps"
            )));
        }
        let m = spec.ensemble.len();
        let mut members: Vec<Vec<DisturbanceSample>> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        let mut origin = Vec::new();
        for (j, member) in spec.ensemble.iter().enumerate() {
            match members.iter().position(|u| u == member) {
                Some(u) => counts[u] += 1,
                None => {
                    members.push(member.clone());
                    counts.push(1);
                    origin.push(j);
                }
            }
        }
        let weights = counts.iter().map(|&c| c as f64 / m as f64).collect();
        Ok(Self {
            blocks: spec.horizon.blocks(),
            n_di: spec.horizon.n_di(),
            n_t,
            spec,
            model,
            members,
            weights,
            origin,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn model(&self) -> &BatteryModel {
        &self.model
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn n_di(&self) -> usize {
        self.n_di
    }

    pub fn n_vars(&self) -> usize {
        2 * self.blocks + 4
    }

    /// Members after merging duplicates.
    pub fn distinct_members(&self) -> usize {
        self.members.len()
    }

    pub fn n_rows(&self) -> usize {
        self.members.len() * self.n_t * ROWS_PER_STEP
    }

    pub fn slack_offset(&self) -> usize {
        2 * self.blocks
    }

    pub fn q_c_max(&self) -> f64 {
        self.spec.limits.q_c_max(self.model.params().thermal_cop)
    }

    /// Box bounds on the decision vector.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let b = self.blocks;
        let pg = self.spec.limits.p_grid_max;
        let qc = self.q_c_max();
        let mut lb = vec![-pg; b];
        lb.extend(std::iter::repeat(-qc).take(b));
        lb.extend([0.0; 4]);
        let mut ub = vec![pg; b];
        ub.extend(std::iter::repeat(qc).take(b));
        ub.extend([f64::INFINITY; 4]);
        (lb, ub)
    }

    pub fn row_id(&self, row: usize) -> ConstraintId {
        let kind = ConstraintKind::ALL[row % ROWS_PER_STEP];
        let step = (row / ROWS_PER_STEP) % self.n_t;
        let member = self.origin[row / (ROWS_PER_STEP * self.n_t)];
        ConstraintId { member, step, kind }
    }

    pub fn row_kind(&self, row: usize) -> ConstraintKind {
        ConstraintKind::ALL[row % ROWS_PER_STEP]
    }

    pub(crate) fn new_trace(&self) -> Trace {
        let u = self.members.len();
        let mut states = vec![self.spec.initial_state; u * (self.blocks + 1)];
        for j in 0..u {
            states[j * (self.blocks + 1)] = self.spec.initial_state;
        }
        Trace {
            states,
            block_cost: vec![0.0; u * self.blocks],
        }
    }

    fn smoothed_thermal_power(&self, q_c: f64) -> f64 {
        let d = self.spec.smoothing;
        let mag = if d > 0.0 {
            (q_c * q_c + d * d).sqrt() - d
        } else {
            q_c.abs()
        };
        mag / self.model.params().thermal_cop
    }

    /// Rolls every member forward from dispatch interval `from_block`,
    /// writing raw constraint rows (soft rows without slack) and refreshing
    /// the trace. Rows and trace entries before `from_block` are untouched
    /// and must already be valid.
    pub(crate) fn simulate(
        &self,
        x: &[f64],
        from_block: usize,
        trace: &mut Trace,
        rows: &mut [f64],
    ) -> Result<(), DispatchError> {
        let lim = &self.spec.limits;
        let dt = self.spec.horizon.dt;
        let kappa = self.spec.cost.kappa();
        let q0 = self.model.capacity();
        let b_total = self.blocks;
        for (j, member) in self.members.iter().enumerate() {
            let mut state = trace.states[j * (b_total + 1) + from_block];
            for b in from_block..b_total {
                let p_grid = x[b];
                let q_c = x[b_total + b];
                let p_c = self.smoothed_thermal_power(q_c);
                let mut cost = 0.0;
                for i in b * self.n_di..(b + 1) * self.n_di {
                    let d = &member[i];
                    let p_b = battery_power(&self.spec.converters, d, p_grid, p_c);
                    let (next, out) =
                        predict_step(&self.model, &state, p_b, q_c, p_c, d.t_amb, dt).map_err(
                            |source| DispatchError::Model {
                                member: self.origin[j],
                                step: i,
                                source,
                            },
                        )?;
                    cost += (-d.price * p_grid + kappa * -out.i_sr) * dt;
                    let soc = (q0 - next.q1_neg) / (q0 - self.model.q_loss(&next));
                    let r = &mut rows[(j * self.n_t + i) * ROWS_PER_STEP..][..ROWS_PER_STEP];
                    r[0] = out.v_bat - lim.v_max;
                    r[1] = lim.v_min - out.v_bat;
                    r[2] = out.i_bat - lim.i_max;
                    r[3] = -lim.i_max - out.i_bat;
                    r[4] = p_b - lim.p_b_max;
                    r[5] = -lim.p_b_max - p_b;
                    r[6] = lim.soc_min - soc;
                    r[7] = soc - lim.soc_max;
                    r[8] = lim.t_min - next.t_bat;
                    r[9] = next.t_bat - lim.t_max;
                    state = next;
                }
                trace.block_cost[j * b_total + b] = cost;
                trace.states[j * (b_total + 1) + b + 1] = state;
            }
        }
        Ok(())
    }

    /// Weighted operating cost of a complete trace, summed in a fixed order.
    pub(crate) fn operating_cost(&self, trace: &Trace) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(j, w)| {
                w * trace.block_cost[j * self.blocks..(j + 1) * self.blocks]
                    .iter()
                    .sum::<f64>()
            })
            .sum()
    }

    pub(crate) fn slacks(&self, x: &[f64]) -> [f64; 4] {
        let o = self.slack_offset();
        [x[o], x[o + 1], x[o + 2], x[o + 3]]
    }

    /// Largest raw violation of each soft-row family.
    pub(crate) fn required_slack(&self, raw: &[f64]) -> [f64; 4] {
        let mut req = [0.0f64; 4];
        for chunk in raw.chunks_exact(ROWS_PER_STEP) {
            for k in 0..4 {
                req[k] = req[k].max(chunk[6 + k]);
            }
        }
        req
    }

    /// Applies the slack relaxation to raw rows in place.
    pub(crate) fn relax(&self, raw: &mut [f64], eps: &[f64; 4]) {
        for chunk in raw.chunks_exact_mut(ROWS_PER_STEP) {
            for k in 0..4 {
                chunk[6 + k] -= eps[k];
            }
        }
    }

    pub(crate) fn max_hard(&self, rows: &[f64]) -> (f64, usize) {
        let mut worst = (0.0, usize::MAX);
        for (r, &v) in rows.iter().enumerate() {
            if r % ROWS_PER_STEP < 6 && v > worst.0 {
                worst = (v, r);
            }
        }
        worst
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation, DispatchError> {
        if x.len() != self.n_vars() {
            return Err(DispatchError::Config(format!(
                "decision vector has {} entries, expected {}",
                x.len(),
                self.n_vars()
            )));
        }
        let mut trace = self.new_trace();
        let mut rows = vec![0.0; self.n_rows()];
        self.simulate(x, 0, &mut trace, &mut rows)?;
        let required_slack = self.required_slack(&rows);
        let eps = self.slacks(x);
        self.relax(&mut rows, &eps);
        let operating_cost = self.operating_cost(&trace);
        Ok(Evaluation {
            objective: operating_cost + self.spec.cost.slack_penalty(&eps),
            operating_cost,
            max_hard_violation: self.max_hard(&rows).0,
            required_slack,
            rows,
        })
    }

    /// Step-by-step prediction of original member `member` under `x`.
    pub fn rollout(
        &self,
        x: &[f64],
        member: usize,
    ) -> Result<Vec<(BatteryState, BatteryOutput)>, DispatchError> {
        let dv = DecisionVector::from_slice(x)?;
        let traj = self.spec.ensemble.get(member).ok_or_else(|| {
            DispatchError::Config(format!("member {member} out of range"))
        })?;
        let mut state = self.spec.initial_state;
        let mut out = Vec::with_capacity(self.n_t);
        for (i, (p_grid, q_c)) in dv.expand(self.n_di).into_iter().enumerate() {
            let d = &traj[i];
            let p_c = self.smoothed_thermal_power(q_c);
            let p_b = battery_power(&self.spec.converters, d, p_grid, p_c);
            let (next, o) = predict_step(&self.model, &state, p_b, q_c, p_c, d.t_amb, self.spec.horizon.dt)
                .map_err(|source| DispatchError::Model { member, step: i, source })?;
            out.push((next, o));
            state = next;
        }
        Ok(out)
    }
}
