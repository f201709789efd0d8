use crate::battery::{BatteryModel, BatteryState};
use crate::forecast::DisturbanceSample;

use super::{battery_power, predict_step, Converters, DispatchError};

/// Predicts the state at the end of the delay horizon.
///
/// Every member is rolled forward under the shared committed controls
/// `(p_grid, q_c)`, one pair per step, and the terminal states are averaged
/// componentwise in member order. The mean is accumulated as an offset from
/// the first member, so identical members reproduce its state exactly.
pub fn stage1_predict(
    model: &BatteryModel,
    initial: &BatteryState,
    committed: &[(f64, f64)],
    members: &[Vec<DisturbanceSample>],
    converters: &Converters,
    dt: f64,
) -> Result<BatteryState, DispatchError> {
    if members.is_empty() {
        return Err(DispatchError::Config("ensemble has no members".into()));
    }
    if let Some(j) = members.iter().position(|m| m.len() < committed.len()) {
        return Err(DispatchError::Config(format!(
            "member {j} is shorter than the delay horizon ({} steps)",
            committed.len()
        )));
    }
    let mut first = None;
    let mut sum = [0.0; 3];
    for (j, member) in members.iter().enumerate() {
        let mut state = *initial;
        for (i, &(p_grid, q_c)) in committed.iter().enumerate() {
            let d = &member[i];
            let p_c = model.thermal_power(q_c);
            let p_b = battery_power(converters, d, p_grid, p_c);
            state = predict_step(model, &state, p_b, q_c, p_c, d.t_amb, dt)
                .map_err(|source| DispatchError::Model {
                    member: j,
                    step: i,
                    source,
                })?
                .0;
        }
        let base = *first.get_or_insert(state.as_array());
        for ((s, v), b) in sum.iter_mut().zip(state.as_array()).zip(base) {
            *s += v - b;
        }
    }
    let base = first.expect("at least one member");
    let m = members.len() as f64;
    Ok(BatteryState {
        q1_pos: base[0] + sum[0] / m,
        q1_neg: base[1] + sum[1] / m,
        t_bat: base[2] + sum[2] / m,
    })
}
