use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::battery::{BatteryModel, BatteryState};

/// Slack for monotonicity checks. `Q_loss` is recovered as
/// `q1_pos + q1_neg - Q0`, so a step without side reaction can move it by a
/// few units in the last place.
pub const ROUNDING_TOL: f64 = 1e-14;

/// Worst values seen while running the battery model over a set of profiles.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub profiles: usize,
    pub steps: usize,
    /// Largest |ΔQ_loss + Σ I_sr·Δt| over all prefixes [Ah].
    pub max_bookkeeping_error: f64,
    /// Largest |N·V·I − P_b| [kW].
    pub max_power_residual: f64,
    /// Largest single-step increase of SoH (should be ≤ 0).
    pub max_soh_increase: f64,
    /// Largest single-step decrease of Q_loss (should be ≤ 0).
    pub max_loss_decrease: f64,
    /// Largest side-reaction current (should be ≤ 0) [A].
    pub max_side_reaction: f64,
    /// Step failures, e.g. infeasible power.
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self, bookkeeping_tol: f64, power_tol: f64) -> bool {
        self.failures.is_empty()
            && self.max_bookkeeping_error <= bookkeeping_tol
            && self.max_power_residual <= power_tol
            && self.max_soh_increase <= ROUNDING_TOL
            && self.max_loss_decrease <= ROUNDING_TOL
            && self.max_side_reaction <= 0.0
    }
}

/// Random pack-power profile [kW], piecewise constant per hour, together
/// with a thermal-power profile [kW].
pub fn random_profile(seed: u64, steps: usize, dt: f64, p_max: f64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_hour = ((1.0 / dt).round() as usize).max(1);
    let mut out = Vec::with_capacity(steps);
    let mut hold = (0.0, 0.0);
    for i in 0..steps {
        if i % per_hour == 0 {
            hold = (rng.random_range(-p_max..=p_max), rng.random_range(-0.5..=0.5));
        }
        out.push(hold);
    }
    out
}

/// Runs `model` over each profile from `initial` at constant ambient
/// temperature and records the invariant residuals. Power that would push
/// the state of charge outside 5 % to 95 % is replaced by rest.
pub fn validate_model(
    model: &BatteryModel,
    initial: &BatteryState,
    profiles: &[Vec<(f64, f64)>],
    t_amb: f64,
    dt: f64,
) -> ValidationReport {
    let cells = model.params().cells;
    let mut r = ValidationReport {
        profiles: profiles.len(),
        max_soh_increase: f64::NEG_INFINITY,
        max_loss_decrease: f64::NEG_INFINITY,
        max_side_reaction: f64::NEG_INFINITY,
        ..Default::default()
    };
    for (n, profile) in profiles.iter().enumerate() {
        let mut state = *initial;
        let loss0 = model.q_loss(&state);
        let mut side_charge = 0.0;
        let mut prev_soh = f64::NAN;
        for (k, &(p, q_c)) in profile.iter().enumerate() {
            let soc_after = |p: f64| {
                model
                    .step(&state, p, q_c, t_amb, dt)
                    .ok()
                    .and_then(|(n, _)| model.soc(&n).ok())
            };
            let p = match soc_after(p) {
                Some(s) if (0.05..=0.95).contains(&s) => p,
                _ => 0.0,
            };
            let (next, out) = match model.step(&state, p, q_c, t_amb, dt) {
                Ok(v) => v,
                Err(e) => {
                    r.failures.push(format!("profile {n} step {k}: {e}"));
                    break;
                }
            };
            r.steps += 1;
            side_charge += out.i_sr * dt;
            let loss = model.q_loss(&next);
            let book = ((loss - loss0) + side_charge).abs();
            r.max_bookkeeping_error = r.max_bookkeeping_error.max(book);
            let power = cells * out.v_bat * out.i_bat * 1e-3;
            r.max_power_residual = r.max_power_residual.max((power - p).abs());
            r.max_loss_decrease = r.max_loss_decrease.max(out.q_loss - loss);
            if !prev_soh.is_nan() {
                r.max_soh_increase = r.max_soh_increase.max(out.soh - prev_soh);
            }
            prev_soh = out.soh;
            r.max_side_reaction = r.max_side_reaction.max(out.i_sr);
            state = next;
        }
    }
    r
}
