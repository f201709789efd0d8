use hems_core::battery::{BatteryModel, BatteryState, Electrode};
use proptest::prelude::*;

fn model() -> BatteryModel {
    BatteryModel::default_table1()
}

fn admissible() -> impl Strategy<Value = BatteryState> {
    (0.05..0.95f64, 0.0..0.1f64, 273.15..323.15f64).prop_map(|(soc, loss_frac, t)| {
        let m = model();
        BatteryState::from_soc(soc, loss_frac * m.capacity(), t, m.capacity())
    })
}

/// Steps `state` with `p_b`, or idles when the step would leave the
/// moderate SoC band.
fn guarded_step(m: &BatteryModel, state: &BatteryState, p_b: f64, q_c: f64, t_amb: f64, dt: f64) -> (BatteryState, f64, f64) {
    if let Ok((next, out)) = m.step(state, p_b, q_c, t_amb, dt) {
        if m.soc(&next).is_ok_and(|s| (0.02..=0.98).contains(&s)) {
            return (next, out.i_sr, p_b);
        }
    }
    let (next, out) = m.step(state, 0.0, q_c, t_amb, dt).expect("idle step");
    (next, out.i_sr, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aging_is_monotone_along_trajectories(
        soc in 0.2..0.8f64,
        powers in prop::collection::vec((-8.0..8.0f64, -0.7..0.7f64), 1..48),
        t_amb in 280.0..310.0f64,
    ) {
        let m = model();
        let mut state = m.fresh_state(soc, 298.15);
        for (p, q) in powers {
            let (next, i_sr, _) = guarded_step(&m, &state, p, q, t_amb, 0.25);
            prop_assert!(i_sr <= 0.0);
            prop_assert!(m.q_loss(&next) >= m.q_loss(&state) - 1e-15);
            prop_assert!(m.soh(&next).unwrap() <= m.soh(&state).unwrap() + 1e-15);
            let loss_step = m.q_loss(&next) - m.q_loss(&state);
            prop_assert!((loss_step + i_sr * 0.25).abs() <= 1e-12);
            state = next;
        }
    }

    #[test]
    fn power_round_trip(state in admissible(), p in -10.0..10.0f64) {
        let m = model();
        let eq = m.equivalent(&state).unwrap();
        prop_assume!(p >= m.discharge_limit(&eq));
        let i = m.solve_battery_current(p, &state).unwrap();
        let v = BatteryModel::terminal_voltage(&eq, i);
        let back = m.params().cells * v * i * 1e-3;
        prop_assert!((back - p).abs() <= 1e-9, "p = {p}, back = {back}");
    }

    #[test]
    fn soc_formulas_agree(state in admissible()) {
        let m = model();
        let a = m.soc(&state).unwrap();
        let b = m.soc_from_positive(&state).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
        let identity = state.q1_pos + state.q1_neg - m.capacity() - m.q_loss(&state);
        prop_assert!(identity.abs() <= 1e-12);
    }

    #[test]
    fn side_reaction_never_positive(state in admissible(), i in -0.873..0.873f64) {
        let m = model();
        let i_sr = m.side_reaction_current(state.q1_neg, state.t_bat, i).unwrap();
        prop_assert!(i_sr <= 0.0);
    }

    #[test]
    fn resting_pack_relaxes_to_ambient(start in 280.0..320.0f64, t_amb in 280.0..320.0f64) {
        let m = model();
        let mut state = m.fresh_state(0.5, start);
        let mut gap = (state.t_bat - t_amb).abs();
        for _ in 0..200 {
            let (next, _) = m.step(&state, 0.0, 0.0, t_amb, 0.25).unwrap();
            let g = (next.t_bat - t_amb).abs();
            prop_assert!(g <= gap);
            prop_assert!((next.t_bat - t_amb) * (start - t_amb) >= 0.0, "overshoot");
            gap = g;
            state = next;
        }
        prop_assert!(gap <= 0.05 * (start - t_amb).abs() + 1e-9);
    }

    #[test]
    fn heat_scales_with_current(state in admissible(), i in 0.01..0.8f64) {
        let m = model();
        let h1 = m.heat_generation(i, state.t_bat, &state).unwrap();
        let h2 = m.heat_generation(2.0 * i, state.t_bat, &state).unwrap();
        let hn = m.heat_generation(-i, state.t_bat, &state).unwrap();
        prop_assert!(h1.irreversible >= 0.0);
        prop_assert!((h2.irreversible - 4.0 * h1.irreversible).abs() <= 1e-12 * h2.irreversible.max(1.0));
        prop_assert!((hn.reversible + h1.reversible).abs() <= 1e-15);
    }
}

#[test]
fn stoichiometry_endpoints_match_the_cell_design() {
    let m = model();
    let full = m.charge_to_stoichiometry(Electrode::Positive, m.capacity()).unwrap();
    assert!(((full - 0.4855) / 0.4855).abs() <= 0.005, "{full}");
    assert_eq!(m.charge_to_stoichiometry(Electrode::Positive, 0.0).unwrap(), 0.9337);
    assert_eq!(m.charge_to_stoichiometry(Electrode::Negative, 0.0).unwrap(), 0.8608);
}

/// One hour of constant 5 kW charging, integrated with `n` steps.
fn charge_hour(n: usize) -> BatteryState {
    let m = model();
    let mut s = m.fresh_state(0.3, 298.15);
    for _ in 0..n {
        s = m.step(&s, 5.0, 0.0, 298.15, 1.0 / n as f64).unwrap().0;
    }
    s
}

fn distance(a: &BatteryState, b: &BatteryState) -> f64 {
    let m = model();
    // charges in units of capacity, temperature in kelvin
    let q = m.capacity();
    ((a.q1_pos - b.q1_pos) / q)
        .abs()
        .max(((a.q1_neg - b.q1_neg) / q).abs())
        .max((a.t_bat - b.t_bat).abs())
}

#[test]
fn forward_euler_is_first_order() {
    let oracle = charge_hour(400);
    let coarse = distance(&charge_hour(4), &oracle);
    let fine = distance(&charge_hour(40), &oracle);
    assert!(coarse > 0.0);
    assert!(coarse / fine >= 8.0, "coarse {coarse:e}, fine {fine:e}");
}
