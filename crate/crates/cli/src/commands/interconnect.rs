//! An oscillator coupled to a harmonic shell `K_M`, against the same
//! oscillator closed by a dissipative heat bath.

use lossless_core::ensemble::covariance_exact;
use lossless_core::interconnect::{spectral_abscissa, ABSCISSA_TOLERANCE};
use lossless_core::numeric::{map_indexed, mean_and_stderr};
use lossless_core::{
    build_kn, connect_heat_bath, interconnect, simulate, simulate_noisy, DMatrix, DVector, HeatBath, InputSignal,
    TimeGrid,
};

use super::{oscillator, relative_gap};
use crate::config::InterconnectSettings;
use crate::error::CliError;
use crate::output::{num, OutputDir, Table};
use crate::Report;

/// Relative tolerance between shell and bath covariances.
pub const SHELL_TOLERANCE: f64 = 0.02;
/// Relative energy drift allowed in a lossless interconnection.
pub const ENERGY_DRIFT: f64 = 1e-9;

pub fn run(s: &InterconnectSettings, out: &mut OutputDir, report: &mut Report) -> Result<(), CliError> {
    let osc = oscillator();

    // A small interconnection, written out in full.
    let small = interconnect(&osc, build_kn(s.gain, s.tau, 1)?.system())?;
    out.write_matrix("interconnect_J", small.generator())?;
    out.write_matrix("interconnect_B", &DMatrix::from_column_slice(small.dim(), 1, small.coupling().as_slice()))?;
    let skew = (small.generator() + small.generator().transpose()).amax();
    let x0 = DVector::from_fn(small.dim(), |i, _| 1.0 / (i + 1) as f64);
    let grid = TimeGrid::uniform(0.0, s.horizon, 501)?;
    let traj = simulate(&small, &InputSignal::Zero, &x0, &grid)?;
    let energies = traj.energies();
    let e0 = energies[0];
    let drift = energies.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0;
    out.write_curve("interconnect_energy", ("t[time]", "energy[energy]"), &traj.times, &energies)?;
    report.check(
        "interconnection is lossless",
        skew == 0.0 && drift <= ENERGY_DRIFT,
        format!("max |J + J^T| = {skew:e}, relative energy drift {drift:e}"),
    );

    let bath = HeatBath::new(s.gain, s.temperature, s.tau)?;
    let nsys = connect_heat_bath(&osc, &bath)?;
    out.write_matrix("heat_bath_A", nsys.a())?;
    let abscissa = spectral_abscissa(nsys.a());
    report.check(
        "heat-bath closure is stable",
        abscissa < -ABSCISSA_TOLERANCE,
        format!("spectral abscissa {}", num(abscissa)),
    );

    let cold = connect_heat_bath(&osc, &HeatBath::new(s.gain, 0.0, s.tau)?)?;
    let steps = (s.horizon / s.step).round().max(1.0) as usize;
    let noisy_grid = TimeGrid::uniform(0.0, steps as f64 * s.step, steps + 1)?;
    let decay = simulate_noisy(&cold, &InputSignal::Zero, &DVector::from_vec(vec![1.0, 0.0]), &noisy_grid, s.seed)?;
    let cold_energy: Vec<f64> = decay.states.iter().map(|x| 0.5 * x.norm_squared()).collect();
    out.write_curve("heat_bath_energy", ("t[time]", "energy[energy]"), &decay.times, &cold_energy)?;
    let monotone = cold_energy.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    report.check("zero-temperature bath only dissipates", monotone, "energy non-increasing on the grid");

    // Shell at temperature T around an oscillator at rest.
    let shell = build_kn(s.gain, s.tau, s.shell_harmonics)?;
    let full = interconnect(&osc, shell.system())?;
    let n = full.dim();
    let mut x = DMatrix::identity(n, n) * s.temperature;
    x[(0, 0)] = 0.0;
    x[(1, 1)] = 0.0;
    let mut cov = Table::new(
        "interconnect_covariance",
        &["t[time]", "shell[output^2]", "bath[output^2]", "relative_gap[1]"],
    );
    let mut worst: f64 = 0.0;
    for t in [0.25 * s.horizon, 0.5 * s.horizon, s.horizon] {
        let shell_var = covariance_exact(&full, &x, t, t)?;
        let p = nsys.transient_covariance(t);
        let bath_var = nsys.c().dot(&(&p * nsys.c()));
        let gap = relative_gap(shell_var, bath_var);
        worst = worst.max(gap);
        cov.push(vec![num(t), num(shell_var), num(bath_var), num(gap)]);
    }
    out.write_table(&cov)?;
    report.check(
        "shell covariance matches heat bath",
        worst <= SHELL_TOLERANCE,
        format!("M = {}, tau = {}, worst relative gap {worst:.2e}", s.shell_harmonics, s.tau),
    );

    let finals: Vec<f64> = map_indexed(s.trials, |j| {
        simulate_noisy(&nsys, &InputSignal::Zero, &DVector::zeros(2), &noisy_grid, s.seed.wrapping_add(j as u64))
            .map(|run| run.outputs.last().copied().unwrap_or(0.0))
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    let sq: Vec<f64> = finals.iter().map(|y| y * y).collect();
    let (var, se) = mean_and_stderr(&sq);
    let t_end = noisy_grid.end();
    let shell_var = covariance_exact(&full, &x, t_end, t_end)?;
    let mut mc = Table::new(
        "interconnect_montecarlo",
        &["t[time]", "trials[count]", "variance[output^2]", "stderr[output^2]", "shell[output^2]", "step[time]"],
    );
    mc.push(vec![num(t_end), s.trials.to_string(), num(var), num(se), num(shell_var), num(s.step)]);
    out.write_table(&mc)?;
    // Allowance: five standard errors, the shell tolerance, and O(Δ) from
    // the held-noise discretisation.
    let allowance = 5.0 * se + SHELL_TOLERANCE * shell_var + 4.0 * s.step * s.temperature;
    report.check(
        "noisy closure variance matches shell",
        (var - shell_var).abs() <= allowance,
        format!("{} vs {} (allowance {})", num(var), num(shell_var), num(allowance)),
    );
    Ok(())
}
