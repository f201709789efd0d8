use chrono::{NaiveDate, TimeDelta};
use hems_core::battery::BatteryState;
use hems_core::forecast::DisturbanceTable;
use hems_core::harness::{align, compute_metrics, synth_generator, ExperimentConfig, TimeSeries};
use hems_core::scheduler::{SimulationLog, StepRecord};
use proptest::prelude::*;

fn step(index: usize, trade: f64, battery: f64, violated: bool) -> StepRecord {
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
        cost_trade: trade,
        cost_battery: battery,
        cost_op: trade + battery,
        violations: if violated { "soc".into() } else { String::new() },
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

/// Splits a table into its four series.
fn series_of(table: &DisturbanceTable) -> [TimeSeries; 4] {
    let times: Vec<_> = (0..table.len()).map(|i| table.timestamp(i)).collect();
    let col = |name: &str, f: fn(&hems_core::forecast::DisturbanceSample) -> f64| TimeSeries {
        name: name.into(),
        times: times.clone(),
        values: table.actual.iter().map(f).collect(),
    };
    [
        col("pv", |d| d.p_pv),
        col("load", |d| d.p_load),
        col("price", |d| d.price),
        col("t_amb", |d| d.t_amb),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn daily_costs_add_up(
        costs in prop::collection::vec((-5.0..5.0f64, 0.0..0.5f64, any::<bool>()), 1..500),
        offset in 0usize..1000,
    ) {
        let steps: Vec<_> = costs.iter().enumerate().map(|(i, c)| step(offset + i, c.0, c.1, c.2)).collect();
        let r = compute_metrics(&log(steps)).unwrap();
        let integrated: f64 = costs.iter().map(|c| (c.0 + c.1) * 0.25).sum();
        prop_assert!((r.average_daily_cost * r.days - r.total_cost).abs() <= 1e-9);
        prop_assert!((r.total_cost - integrated).abs() <= 1e-9);
        prop_assert!((r.daily_costs.iter().sum::<f64>() - r.total_cost).abs() <= 1e-9);
        prop_assert!((r.trade_cost + r.degradation_cost - r.total_cost).abs() <= 1e-9);
        prop_assert_eq!(r.daily_costs.len(), costs.len().div_ceil(96));
        prop_assert!((0.0..=1.0).contains(&r.violation_rate));
        prop_assert_eq!(r.violation_steps, costs.iter().filter(|c| c.2).count());
    }

    #[test]
    fn aligned_tables_survive_reingestion(days in 1usize..4, seed in any::<u64>()) {
        let table = synth_generator(days, seed);
        let again = align(&series_of(&table), table.dt, 1.0).unwrap();
        prop_assert_eq!(again, table);
    }
}

#[test]
fn hourly_series_are_resampled_onto_the_grid() {
    let t0 = NaiveDate::from_ymd_opt(2024, 3, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let hours = |n: i64| (0..n).map(|i| t0 + TimeDelta::hours(i)).collect::<Vec<_>>();
    let mk = |name: &str, values: Vec<f64>| TimeSeries {
        name: name.into(),
        times: hours(values.len() as i64),
        values,
    };
    let table = align(
        &[
            mk("pv", vec![0.0, 4.0, 8.0]),
            mk("load", vec![1.0, 1.0, 1.0]),
            mk("price", vec![0.1, 0.3, 0.2]),
            mk("t_amb", vec![290.0, 292.0, 294.0]),
        ],
        0.25,
        5.0,
    )
    .unwrap();
    assert_eq!(table.len(), 9);
    let pv: Vec<f64> = table.actual.iter().map(|d| d.p_pv).collect();
    assert_eq!(pv, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    let price: Vec<f64> = table.actual.iter().map(|d| d.price).collect();
    assert_eq!(&price[..5], &[0.5, 0.5, 0.5, 0.5, 1.5]);
    assert_eq!(table.actual[2].t_amb, 291.0);
}

#[test]
fn default_experiment_matches_the_published_setup() {
    let cfg = ExperimentConfig::default();
    let h = cfg.horizon;
    assert_eq!((h.dt, h.dispatch_interval, h.delay, h.optimization, h.modification), (0.25, 1.0, 2.0, 12.0, 1.0));
    let l = cfg.limits;
    assert_eq!((l.p_b_max, l.p_grid_max, l.p_c_max, l.i_max), (12.0, 10.0, 0.1, 0.873));
    assert_eq!((l.v_min, l.v_max, l.soc_min, l.soc_max), (3.2, 4.2, 0.01, 0.99));
    assert_eq!((l.t_min, l.t_max), (296.15, 300.15));
    assert_eq!((cfg.battery.cells, cfg.battery.thermal_cop), (4000.0, 7.0));
    assert_eq!((cfg.battery.thermal_capacitance, cfg.battery.thermal_resistance), (0.0278, 200.0));
    assert_eq!((cfg.cost.end_of_life, cfg.cost.cell_price), (0.6, 1.0));
    assert_eq!(cfg.data.price_scale, 5.0);
}
