use std::f64::consts::PI;

use lossless_core::ensemble::trial_rng;
use lossless_core::harmonic::bound_coefficient;
use lossless_core::lti::{cumulative_work, energy};
use lossless_core::{build_kn, make_lossless, prop1_bound, simulate, DMatrix, DVector, InputSignal, LosslessSystem, TimeGrid};
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

fn random_lossless(n: usize, seed: u64) -> LosslessSystem {
    let mut rng = trial_rng(seed, 0);
    let m = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let b = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    make_lossless(&m - m.transpose(), b).unwrap()
}

#[test]
fn kn_impulse_response_at_zero() {
    for &(k, tau, n) in &[(1.0, 10.0, 0usize), (2.0, 3.0, 7), (0.5, 1.0, 100)] {
        let r = build_kn(k, tau, n).unwrap();
        let expected = k * (2 * n + 1) as f64 / tau;
        assert!((r.impulse_response(0.0) - expected).abs() < 1e-12 * expected);
        assert_eq!(r.dimension(), 2 * n + 1);
    }
}

#[test]
fn kn_impulse_response_is_the_cosine_series() {
    let r = build_kn(1.3, 4.0, 9).unwrap();
    for i in 0..50 {
        let t = i as f64 * 0.17;
        let series = 1.3 / 4.0 + (1..=9).map(|l| 2.0 * 1.3 / 4.0 * (l as f64 * PI * t / 4.0).cos()).sum::<f64>();
        assert!((r.impulse_response(t) - series).abs() < 1e-12);
    }
}

#[test]
fn bound_coefficient_substitution() {
    // 2kτ/(π²N)·(|u̇(t)| + |u̇(0)| + ‖ü‖) with k = 1, τ = 10, N = 100 and a total of 3.
    assert!((bound_coefficient(1.0, 10.0, 100) * 3.0 - 0.060_792_710_185).abs() < 1e-12);
}

#[test]
fn pointwise_bound_holds_and_error_decays() {
    let u = InputSignal::one_minus_cos(1.0);
    let grid = TimeGrid::uniform(0.0, 10.0, 2001).unwrap();
    let mut errors = Vec::new();
    for &n in &[25usize, 50, 100, 200] {
        let r = build_kn(1.0, 10.0, n).unwrap();
        let rep = prop1_bound(&r, &u, &grid).unwrap();
        assert!(rep.holds, "N = {n}");
        errors.push(rep.sup_error());
    }
    for w in errors.windows(2) {
        assert!(w[1] <= w[0]);
    }
    assert!(errors[3] <= 0.6 * errors[2]);
}

#[test]
fn supplied_work_equals_stored_energy() {
    let sys = random_lossless(6, 77);
    let u = InputSignal::sine(0.9);
    let grid = TimeGrid::uniform(0.0, 20.0, 40_001).unwrap();
    let traj = simulate(&sys, &u, &DVector::zeros(6), &grid).unwrap();
    let work = cumulative_work(&traj, &u).unwrap();
    for i in (0..grid.len()).step_by(4000) {
        assert!((work[i] - traj.energy(i)).abs() < 1e-6, "i = {i}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn free_energy_is_conserved(n in 1usize..40, seed in 0u64..100_000) {
        let sys = random_lossless(n, seed);
        let x0 = DVector::from_fn(n, |i, _| 1.0 + i as f64 * 0.1);
        let grid = TimeGrid::uniform(0.0, 100.0, 201).unwrap();
        let traj = simulate(&sys, &InputSignal::Zero, &x0, &grid).unwrap();
        let e0 = energy(&x0);
        for e in traj.energies() {
            prop_assert!((e - e0).abs() <= 1e-9 * e0);
        }
    }

    #[test]
    fn time_reversal_undoes_a_driven_run(n in 1usize..8, seed in 0u64..100_000, w in 0.1f64..3.0) {
        let sys = random_lossless(n, seed);
        let t_end = 3.0;
        let grid = TimeGrid::uniform(0.0, t_end, 3001).unwrap();
        let x0 = DVector::from_fn(n, |i, _| (i as f64 - 1.0) * 0.5);
        let forward = simulate(&sys, &InputSignal::sine(w), &x0, &grid).unwrap();
        let back_input = InputSignal::from_fn("reversed", move |t| (w * (t_end - t)).sin());
        let back = simulate(&sys.time_reversed(), &back_input, forward.final_state(), &grid).unwrap();
        prop_assert!((back.final_state() - &x0).amax() < 1e-6);
    }

    #[test]
    fn pointwise_bound_holds_for_random_smooth_inputs(n in 5usize..60, w in 0.2f64..2.0, a in -2.0f64..2.0) {
        let r = build_kn(1.0, 10.0, n).unwrap();
        let u = InputSignal::closed_form(
            "a sin² + (1 − cos)",
            move |t| a * (w * t).sin().powi(2) + 1.0 - t.cos(),
            move |t| a * w * (2.0 * w * t).sin() + t.sin(),
            move |t| 2.0 * a * w * w * (2.0 * w * t).cos() + t.cos(),
        );
        let grid = TimeGrid::uniform(0.0, 10.0, 1001).unwrap();
        let rep = prop1_bound(&r, &u, &grid).unwrap();
        prop_assert!(rep.holds, "margin {}", rep.min_margin());
    }
}
