use hems_core::battery::BatteryModel;
use hems_core::dispatch::{
    assemble_problem, battery_power, predict_step, running_cost, solve_dispatch, stage1_predict, Converters,
    CostParams, DecisionVector, HorizonConfig, OperatingLimits, Problem, ProblemSpec,
};
use hems_core::forecast::{generate_ensemble, DisturbanceSample, EnsembleSet, MomentSet};
use proptest::prelude::*;

fn horizon(optimization: f64) -> HorizonConfig {
    HorizonConfig {
        optimization,
        ..HorizonConfig::default()
    }
}

fn spec(soc: f64, t_bat: f64, members: Vec<Vec<DisturbanceSample>>, optimization: f64, cost: CostParams) -> ProblemSpec {
    let model = BatteryModel::default_table1();
    assemble_problem(
        model.fresh_state(soc, t_bat),
        &EnsembleSet { seed: 0, members },
        &horizon(optimization),
        &OperatingLimits::default(),
        &cost,
        &Converters::default(),
        model.params(),
    )
    .unwrap()
}

fn member(len: usize, pv: f64, load: f64, price: f64, t_amb: f64) -> Vec<DisturbanceSample> {
    (0..len)
        .map(|i| {
            let phase = i as f64 / len as f64 * std::f64::consts::PI;
            DisturbanceSample::new(pv * phase.sin(), load, price * (1.0 + phase.cos()), t_amb)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn blocking_round_trip(values in prop::collection::vec((-10.0..10.0f64, -0.7..0.7f64), 1..12), n_di in 1usize..6) {
        let p: Vec<f64> = values.iter().map(|v| v.0).collect();
        let q: Vec<f64> = values.iter().map(|v| v.1).collect();
        let dv = DecisionVector { p_grid: p, q_c: q, slack: [0.0; 4] };
        let steps = dv.expand(n_di);
        prop_assert_eq!(steps.len(), n_di * dv.blocks());
        for (i, s) in steps.iter().enumerate() {
            prop_assert_eq!(*s, steps[i - i % n_di]);
        }
        let back = DecisionVector::from_steps(&steps, n_di, dv.slack);
        prop_assert_eq!(&back, &dv);
        prop_assert_eq!(back.expand(n_di), steps);
        prop_assert_eq!(DecisionVector::from_slice(&dv.to_vec()).unwrap(), dv);
    }

    #[test]
    fn degradation_cost_is_never_negative(i_sr in -1e-3..0.0f64, p in -10.0..10.0f64, price in -1.0..1.0f64) {
        let c = running_cost(i_sr, p, price, &CostParams::default());
        prop_assert!(c.battery >= 0.0);
    }

    #[test]
    fn every_member_sees_the_same_controls(
        x in prop::collection::vec(-3.0..3.0f64, 4),
        q in prop::collection::vec(-0.5..0.5f64, 4),
        loads in prop::collection::vec(0.0..3.0f64, 2..5),
    ) {
        let n_t = 16;
        let members: Vec<_> = loads.iter().map(|&l| member(n_t, 4.0, l, 0.2, 295.0)).collect();
        let problem = Problem::new(spec(0.5, 298.15, members.clone(), 4.0, CostParams::default())).unwrap();
        let dv = DecisionVector { p_grid: x, q_c: q, slack: [0.0; 4] };
        let conv = Converters::default();
        let mut seen: Option<Vec<(f64, f64)>> = None;
        for (j, m) in members.iter().enumerate() {
            let traj = problem.rollout(&dv.to_vec(), j).unwrap();
            // recover the grid power each member was driven with
            let used: Vec<(f64, f64)> = traj
                .iter()
                .zip(m)
                .map(|((_, o), d)| {
                    let p_grid = conv.pv * d.p_pv - d.p_load - o.p_c - o.p_b / conv.battery;
                    (p_grid, o.p_c)
                })
                .collect();
            if let Some(first) = &seen {
                for (a, b) in first.iter().zip(&used) {
                    prop_assert!((a.0 - b.0).abs() <= 1e-9 && a.1 == b.1);
                }
            } else {
                let expected = battery_power(&conv, &m[0], dv.p_grid[0], traj[0].1.p_c);
                prop_assert!((expected - traj[0].1.p_b).abs() <= 1e-12);
                seen = Some(used);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn slacks_match_the_violation_they_cover(
        soc in 0.2..0.8f64,
        loads in prop::collection::vec(0.3..3.0f64, 1..3),
        t_bat in 297.0..299.5f64,
        t_amb in 290.0..305.0f64,
    ) {
        let members: Vec<_> = loads.iter().map(|&l| member(16, 5.0, l, 0.3, t_amb)).collect();
        let problem = Problem::new(spec(soc, t_bat, members, 4.0, CostParams::default())).unwrap();
        let sol = solve_dispatch(&problem, None).unwrap();
        let x = sol.decision.to_vec();
        let ev = problem.evaluate(&x).unwrap();
        for k in 0..4 {
            prop_assert!((sol.decision.slack[k] - ev.required_slack[k]).abs() <= 1e-6,
                "eps{} = {} but {} needed", k + 1, sol.decision.slack[k], ev.required_slack[k]);
        }
        prop_assert!(ev.max_hard_violation <= 1e-6);
        // a slack-free point exists (start inside both bands, thermal unit strong enough)
        prop_assert!(sol.decision.slack.iter().all(|&e| e <= 1e-6), "{:?}", sol.decision.slack);
    }
}

#[test]
fn heavier_weights_never_grow_the_slack() {
    // the pack starts far above its temperature band, so some slack is unavoidable
    let members = vec![member(8, 0.0, 1.0, 0.2, 303.0), member(8, 0.0, 2.0, 0.2, 305.0)];
    let base = CostParams::default();
    let mut heavy = base;
    for w in [&mut heavy.w1, &mut heavy.w2] {
        for row in w.iter_mut() {
            for v in row.iter_mut() {
                *v *= 10.0;
            }
        }
    }
    let solve = |cost: CostParams| {
        let p = Problem::new(spec(0.5, 306.0, members.clone(), 2.0, cost)).unwrap();
        solve_dispatch(&p, None).unwrap().decision.slack
    };
    let light = solve(base);
    let strong = solve(heavy);
    assert!(light[3] > 1e-3, "{light:?}");
    // Heavier weights can shift slack between a lower and an upper bound,
    // so the comparison is on the weighted magnitude eps' W eps.
    let magnitude = |e: [f64; 4]| base.slack_penalty(&e) - base.slack_linear * e.iter().sum::<f64>();
    assert!(
        magnitude(strong) <= magnitude(light) * (1.0 + 1e-9),
        "{strong:?} vs {light:?}"
    );
}

#[test]
fn spec_round_trips_through_json() {
    let s = spec(0.4, 298.0, vec![member(8, 3.0, 1.0, 0.2, 295.0)], 2.0, CostParams::default());
    let back = ProblemSpec::from_json(&s.to_json()).unwrap();
    assert_eq!(back, s);
}

#[test]
fn stage1_mean_matches_a_member_by_member_replay() {
    let model = BatteryModel::default_table1();
    let conv = Converters::default();
    let x0 = model.fresh_state(0.6, 297.5);
    let nominal = member(8, 4.0, 1.5, 0.2, 296.0);
    let mut covariance = [[0.0; 4]; 4];
    for (k, v) in [0.5, 0.2, 0.001, 1.0].into_iter().enumerate() {
        covariance[k][k] = v;
    }
    let moments = vec![Some(MomentSet { segment: 1, mean: [0.1, -0.1, 0.0, 0.3], covariance, count: 50 }); 8];
    let committed: Vec<(f64, f64)> = (0..8).map(|i| (1.0 - 0.3 * i as f64, 0.05)).collect();
    let run = || {
        let e = generate_ensemble(&nominal, &moments, 50, 99).unwrap();
        let x = stage1_predict(&model, &x0, &committed, &e.members, &conv, 0.25).unwrap();
        (e, x)
    };
    let (ensemble, first) = run();
    assert_eq!(run().1, first);

    // plain rollouts of every member, averaged naively
    let mut mean = [0.0; 3];
    for m in &ensemble.members {
        let mut s = x0;
        for (d, &(p_grid, q_c)) in m.iter().zip(&committed) {
            let p_c = model.thermal_power(q_c);
            let p_b = battery_power(&conv, d, p_grid, p_c);
            s = predict_step(&model, &s, p_b, q_c, p_c, d.t_amb, 0.25).unwrap().0;
        }
        for (a, v) in mean.iter_mut().zip(s.as_array()) {
            *a += v / 50.0;
        }
    }
    for (a, v) in mean.iter().zip(first.as_array()) {
        assert!((a - v).abs() <= 1e-12 * a.abs(), "{a} vs {v}");
    }
}
