use lossless_core::ensemble::{covariance_exact, trial_rng};
use lossless_core::interconnect::*;
use lossless_core::numeric::{map_indexed, mean_and_stderr};
use lossless_core::{build_kn, make_lossless, simulate, DMatrix, DVector, InputSignal, LosslessSystem, TimeGrid};
use nalgebra::{dmatrix, dvector};
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

fn rotation() -> LosslessSystem {
    make_lossless(dmatrix![0.0, 1.0; -1.0, 0.0], dvector![1.0, 0.0]).unwrap()
}

fn random_lossless(n: usize, seed: u64) -> LosslessSystem {
    let mut rng = trial_rng(seed, 0);
    let m = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let b = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    make_lossless(&m - m.transpose(), b).unwrap()
}

#[test]
fn interconnected_energy_is_conserved() {
    let sys = interconnect(&random_lossless(5, 1), &build_kn(1.0, 4.0, 6).unwrap().system().clone()).unwrap();
    let x0 = DVector::from_fn(sys.dim(), |i, _| ((i * 7 % 5) as f64 - 2.0) * 0.3);
    let grid = TimeGrid::uniform(0.0, 50.0, 501).unwrap();
    let traj = simulate(&sys, &InputSignal::Zero, &x0, &grid).unwrap();
    let e0 = traj.energy(0);
    for e in traj.energies() {
        assert!((e - e0).abs() <= 1e-9 * e0);
    }
}

#[test]
fn heat_bath_energy_never_increases() {
    let nsys = connect_heat_bath(&random_lossless(4, 3), &HeatBath::new(0.8, 0.0, 100.0).unwrap()).unwrap();
    let grid = TimeGrid::uniform(0.0, 30.0, 3001).unwrap();
    let run = simulate_noisy(&nsys, &InputSignal::Zero, &dvector![1.0, -1.0, 0.5, 2.0], &grid, 0).unwrap();
    for w in run.states.windows(2) {
        assert!(0.5 * w[1].norm_squared() <= 0.5 * w[0].norm_squared() + 1e-9);
    }
}

#[test]
fn measurement_intensities_across_gains() {
    let grid = TimeGrid::uniform(0.0, 100.0, 100_001).unwrap();
    for &k in &[0.1, 1.0, 10.0] {
        let m = measure(&rotation(), k, 1.0).unwrap();
        let run = simulate_noisy(m.system(), &InputSignal::Zero, &DVector::zeros(2), &grid, 2024).unwrap();
        let est = estimate_intensities(&m, &run).unwrap();
        assert!((est.cross / 2.0 - 1.0).abs() < 0.1);
        assert!((est.process / m.process_intensity() - 1.0).abs() < 0.1);
        assert!((est.measurement / m.measurement_intensity() - 1.0).abs() < 0.1);
    }
}

#[test]
fn stationary_output_variance_matches_discrete_lyapunov() {
    let nsys = connect_heat_bath(&rotation(), &HeatBath::new(1.0, 0.5, 1e6).unwrap()).unwrap();
    let step = 0.02;
    let grid = TimeGrid::uniform(0.0, 30.0, 1501).unwrap();
    let finals: Vec<f64> = map_indexed(3000, |j| {
        let run = simulate_noisy(&nsys, &InputSignal::Zero, &DVector::zeros(2), &grid, 10_000 + j as u64).unwrap();
        *run.outputs.last().unwrap()
    });
    let sq: Vec<f64> = finals.iter().map(|y| y * y).collect();
    let (var, se) = mean_and_stderr(&sq);
    let p = nsys.discrete_stationary_covariance(step).unwrap();
    let oracle = nsys.c().dot(&(&p * nsys.c()));
    assert!((var - oracle).abs() < 5.0 * se, "{var} vs {oracle} ± {se}");
    // The continuous-time value is T by equipartition; the scheme is within O(Δ).
    assert!((oracle - 0.5).abs() < 0.05);
}

#[test]
fn harmonic_shell_matches_heat_bath_covariance() {
    // A rotation coupled to K_M at temperature T versus the direct bath closure.
    let (k, temp, tau, m) = (1.0, 0.5, 20.0, 200);
    let shell = build_kn(k, tau, m).unwrap();
    let full = interconnect(&rotation(), shell.system()).unwrap();
    let n = full.dim();
    let mut x = DMatrix::identity(n, n) * temp;
    x[(0, 0)] = 0.0;
    x[(1, 1)] = 0.0;
    let nsys = connect_heat_bath(&rotation(), &HeatBath::new(k, temp, tau).unwrap()).unwrap();
    for &t in &[2.0, 5.0, 10.0] {
        let shell_var = covariance_exact(&full, &x, t, t).unwrap();
        let p = nsys.transient_covariance(t);
        let bath_var = nsys.c().dot(&(&p * nsys.c()));
        assert!((shell_var - bath_var).abs() < 0.02 * bath_var, "t = {t}: {shell_var} vs {bath_var}");
    }
    // Monte Carlo of the bath closure against the same closed form.
    let step = 0.01;
    let grid = TimeGrid::uniform(0.0, 5.0, 501).unwrap();
    let finals: Vec<f64> = map_indexed(2000, |j| {
        let run = simulate_noisy(&nsys, &InputSignal::Zero, &DVector::zeros(2), &grid, j as u64).unwrap();
        *run.outputs.last().unwrap()
    });
    let sq: Vec<f64> = finals.iter().map(|y| y * y).collect();
    let (var, se) = mean_and_stderr(&sq);
    let shell_var = covariance_exact(&full, &x, 5.0, 5.0).unwrap();
    assert!((var - shell_var).abs() < 5.0 * se + 0.02 * shell_var + 2.0 * step, "{var} vs {shell_var}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interconnection_is_exactly_skew(n1 in 1usize..6, n2 in 0usize..6, seed in 0u64..10_000) {
        let a = random_lossless(n1, seed);
        let b = if n2 == 0 {
            make_lossless(DMatrix::zeros(0, 0), DVector::zeros(0)).unwrap()
        } else {
            random_lossless(n2, seed + 1)
        };
        let c = interconnect(&a, &b).unwrap();
        let j = c.generator();
        prop_assert_eq!(j + j.transpose(), DMatrix::zeros(n1 + n2, n1 + n2));
    }

    #[test]
    fn damped_closure_is_stable(n in 1usize..8, k in 0.0f64..5.0, seed in 0u64..10_000) {
        let sys = random_lossless(n, seed);
        let b = sys.coupling();
        let a = sys.generator() - b * b.transpose() * k;
        let abscissa = spectral_abscissa(&a);
        prop_assert!(abscissa <= 1e-10 * a.amax().max(1.0));
        if k > 0.1 && sys.is_controllable() == Some(true) && n <= 4 {
            prop_assert!(abscissa < 0.0);
        }
    }

    #[test]
    fn back_action_product_is_gain_independent(k in 1e-3f64..1e3, t in 0.0f64..10.0) {
        let m = measure(&rotation(), k, t).unwrap();
        let product = m.process_intensity() * m.measurement_intensity();
        prop_assert!((product - (2.0 * t).powi(2)).abs() <= 1e-12 * (2.0 * t).powi(2).max(1.0));
    }
}
