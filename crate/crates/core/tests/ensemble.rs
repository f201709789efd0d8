use hems_core::forecast::{
    generate_ensemble, learn_moments, segment_of, DisturbanceSample, ErrorRecord, MomentSet,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn nominal(len: usize) -> Vec<DisturbanceSample> {
    (0..len)
        .map(|i| DisturbanceSample::new(1.0 + (i % 7) as f64, 0.5 + (i % 3) as f64, 0.2, 293.0))
        .collect()
}

fn diagonal(mean: [f64; 4], var: [f64; 4]) -> MomentSet {
    let mut covariance = [[0.0; 4]; 4];
    for k in 0..4 {
        covariance[k][k] = var[k];
    }
    MomentSet {
        segment: 1,
        mean,
        covariance,
        count: 100,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn same_inputs_same_ensemble(seed in any::<u64>(), m in 1usize..12, len in 1usize..20, var in 0.0..2.0f64) {
        let nom = nominal(len);
        let mo = vec![Some(diagonal([0.1, -0.1, 0.0, 0.5], [var; 4])); len];
        let a = generate_ensemble(&nom, &mo, m, seed).unwrap();
        let b = generate_ensemble(&nom, &mo, m, seed).unwrap();
        prop_assert_eq!(a.size(), m);
        prop_assert!(a.members.iter().all(|x| x.len() == len));
        // bitwise, not approximate
        for (x, y) in a.members.iter().flatten().zip(b.members.iter().flatten()) {
            prop_assert_eq!(x.to_array().map(f64::to_bits), y.to_array().map(f64::to_bits));
        }
        if m == 1 {
            prop_assert_eq!(&a.members[0], &nom);
        }
    }

    #[test]
    fn degenerate_distribution_ignores_seed(s1 in any::<u64>(), s2 in any::<u64>(), m in 2usize..8) {
        let nom = nominal(10);
        let mo = vec![Some(diagonal([0.3, 0.0, -0.01, 1.0], [0.0; 4])); 10];
        let a = generate_ensemble(&nom, &mo, m, s1).unwrap();
        let b = generate_ensemble(&nom, &mo, m, s2).unwrap();
        prop_assert_eq!(a.members, b.members);
    }

    #[test]
    fn clamping_only_floors(seed in any::<u64>(), var in 0.1..5.0f64) {
        let low = nominal(24);
        // shifted far enough that no draw reaches zero
        let shift = 1e3;
        let high: Vec<DisturbanceSample> = low
            .iter()
            .map(|d| DisturbanceSample::new(d.p_pv + shift, d.p_load + shift, d.price, d.t_amb))
            .collect();
        let mo = vec![Some(diagonal([0.2, -0.3, 0.0, 0.0], [var; 4])); 24];
        let a = generate_ensemble(&low, &mo, 6, seed).unwrap();
        let b = generate_ensemble(&high, &mo, 6, seed).unwrap();
        for (d, u) in a.members.iter().flatten().zip(b.members.iter().flatten()) {
            let pv = u.p_pv - shift;
            let load = u.p_load - shift;
            prop_assert!(d.p_pv >= 0.0 && d.p_load >= 0.0);
            prop_assert!((d.p_pv - pv.max(0.0)).abs() <= 1e-9);
            prop_assert!((d.p_load - load.max(0.0)).abs() <= 1e-9);
            prop_assert_eq!(d.price, u.price);
            prop_assert_eq!(d.t_amb, u.t_amb);
        }
    }

    #[test]
    fn segments_tile_the_day(t in -100.0..500.0f64, segments in 1usize..48) {
        let s = segment_of(t, segments);
        prop_assert!((1..=segments).contains(&s));
        let width = 24.0 / segments as f64;
        let hour = t.rem_euclid(24.0);
        let lo = (s - 1) as f64 * width;
        prop_assert!(hour >= lo - 1e-9 && hour < lo + width + 1e-9);
    }
}

#[test]
fn every_instant_of_a_day_has_one_segment() {
    for segments in [1, 2, 3, 4, 6, 8, 12, 24] {
        let mut counts = vec![0usize; segments];
        for i in 0..96 {
            counts[segment_of(i as f64 * 0.25, segments) - 1] += 1;
        }
        assert!(counts.iter().all(|&c| c == 96 / segments), "{segments}: {counts:?}");
    }
}

#[test]
fn learned_moments_converge_to_generator() {
    let mean = [0.5, -0.2, 0.01, 1.5];
    let sd = [0.8, 0.3, 0.02, 2.0];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let normals: Vec<Normal<f64>> = (0..4).map(|k| Normal::new(mean[k], sd[k]).unwrap()).collect();
    // 400 days, one record per hour, segments of two hours
    let records: Vec<ErrorRecord> = (0..400 * 24)
        .map(|h| ErrorRecord {
            time: h as f64,
            error: [0, 1, 2, 3].map(|k| normals[k].sample(&mut rng)),
        })
        .collect();
    let m = learn_moments(&records, 5, 12, 400).unwrap();
    let n = m.count as f64;
    assert!(m.count >= 50);
    for k in 0..4 {
        let tol = 3.0 * sd[k] / n.sqrt();
        assert!((m.mean[k] - mean[k]).abs() <= tol, "mean {k}: {} vs {}", m.mean[k], mean[k]);
        // variance estimate of a normal has standard error sigma^2 sqrt(2/(n-1))
        let var = sd[k] * sd[k];
        let vtol = 3.0 * var * (2.0 / (n - 1.0)).sqrt();
        assert!((m.covariance[k][k] - var).abs() <= vtol, "var {k}");
    }
    for a in 0..4 {
        for b in 0..4 {
            assert_eq!(m.covariance[a][b], m.covariance[b][a]);
        }
    }
}

#[test]
fn scalar_error_mean_converges() {
    let m = 10_000;
    let nom = vec![DisturbanceSample::new(100.0, 100.0, 0.2, 293.0)];
    let mo = [Some(diagonal([0.3, 0.0, 0.0, 0.0], [0.04, 0.0, 0.0, 0.0]))];
    let e = generate_ensemble(&nom, &mo, m, 5).unwrap();
    let mean = e.members.iter().map(|x| 100.0 - x[0].p_pv).sum::<f64>() / m as f64;
    assert!((mean - 0.3).abs() <= 3.0 * 0.2 / (m as f64).sqrt(), "{mean}");
}
