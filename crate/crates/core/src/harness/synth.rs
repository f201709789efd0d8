use std::f64::consts::PI;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::forecast::{DisturbanceSample, DisturbanceTable};

const DT: f64 = 0.25;
const PV_PEAK: f64 = 8.0;
const SUNRISE: f64 = 6.0;
const SUNSET: f64 = 18.0;

fn base_load(hour: f64) -> f64 {
    let bump = |centre: f64, width: f64| (-((hour - centre) / width).powi(2)).exp();
    0.3 + 1.6 * bump(7.5, 1.2) + 2.7 * bump(19.0, 1.8)
}

/// Synthetic 15-minute disturbances for `days` days starting 2024-01-01.
///
/// PV is a clear-sky half-sine between 06:00 and 18:00 peaking at 8 kW,
/// scaled by a daily clearness and a smooth hourly cloud factor. Load is a
/// morning/evening double peak between 0.3 and 3 kW with noise. Price is
/// 0.3 $/kWh from 07:00 to 22:00 and 0.1 $/kWh otherwise, plus noise.
/// Ambient temperature is a daily sinusoid between 288 and 303 K.
pub fn synth_generator(days: usize, seed: u64) -> DisturbanceTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_day = (24.0 / DT) as usize;
    let mut actual = Vec::with_capacity(days * per_day);
    let mut cloud = 0.0_f64;
    for _ in 0..days {
        let clearness: f64 = rng.random_range(0.45..1.0);
        let load_level: f64 = 1.0 + 0.15 * rng.sample::<f64, _>(StandardNormal);
        let warm: f64 = 1.5 * rng.sample::<f64, _>(StandardNormal);
        for j in 0..per_day {
            let hour = j as f64 * DT;
            // slowly varying cloud cover, AR(1) at the 15-min scale
            cloud = 0.9 * cloud + 0.3 * rng.sample::<f64, _>(StandardNormal);
            let sun = if (SUNRISE..=SUNSET).contains(&hour) {
                (PI * (hour - SUNRISE) / (SUNSET - SUNRISE)).sin().max(0.0)
            } else {
                0.0
            };
            let cover = (clearness * (1.0 - 0.35 * cloud.abs())).clamp(0.05, 1.0);
            let p_pv = PV_PEAK * sun * cover;

            let noise = 0.15 * rng.sample::<f64, _>(StandardNormal);
            let p_load = (base_load(hour) * load_level + noise).clamp(0.3, 3.0);

            let level = if (7.0..22.0).contains(&hour) { 0.3 } else { 0.1 };
            let price = (level + 0.02 * rng.sample::<f64, _>(StandardNormal)).max(0.01);

            let t_amb = 295.5 + warm - 7.5 * (2.0 * PI * (hour - 4.0) / 24.0).cos();
            actual.push(DisturbanceSample::new(p_pv, p_load, price, t_amb.clamp(288.0, 303.0)));
        }
    }
    let start = NaiveDate::from_ymd_opt(2024, 1, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    DisturbanceTable::new(start, DT, actual)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_ranges() {
        let t = synth_generator(30, 1);
        assert_eq!(t.len(), 30 * 96);
        for (i, s) in t.actual.iter().enumerate() {
            let hour = t.hours_at(i) % 24.0;
            if hour < SUNRISE || hour > SUNSET {
                assert_eq!(s.p_pv, 0.0);
            }
            assert!((0.0..=PV_PEAK).contains(&s.p_pv));
            assert!((0.3..=3.0).contains(&s.p_load));
            assert!(s.price > 0.0 && s.price < 0.5);
            assert!((288.0..=303.0).contains(&s.t_amb));
        }
        assert_eq!(t.actual[0].p_pv, 0.0);
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(synth_generator(3, 9), synth_generator(3, 9));
        assert_ne!(synth_generator(3, 9), synth_generator(3, 10));
    }
}
