//! Thermal ensemble of `K_N`: output covariance and band-limited variance.

use lossless_core::ensemble::{
    band_limited_variance, band_limited_variance_thermal, covariance_matrix_exact, ensemble_simulate,
    johnson_nyquist_variance, EnsembleSpec, Temperature,
};
use lossless_core::{build_kn, DMatrix, InputSignal, TimeGrid};

use super::relative_gap;
use crate::config::NoiseSettings;
use crate::error::CliError;
use crate::output::{num, OutputDir, Table};
use crate::Report;

/// Largest z-score accepted between empirical and exact covariance.
pub const MAX_Z: f64 = 5.0;
/// Relative tolerance against `4TkB`.
pub const JOHNSON_NYQUIST_TOLERANCE: f64 = 0.1;

pub fn run(s: &NoiseSettings, out: &mut OutputDir, report: &mut Report) -> Result<(), CliError> {
    let real = build_kn(s.gain, s.tau, s.harmonics)?;
    let dim = real.dimension();
    let temperature = Temperature::new(s.temperature)?;
    let spec = EnsembleSpec::thermal(dim, temperature, s.trials, s.seed)?;
    let x = DMatrix::identity(dim, dim) * s.temperature;

    let grid = TimeGrid::uniform(0.0, s.tau, s.grid_points)?;
    let est = ensemble_simulate(&real, &spec, &InputSignal::Zero, &grid)?;
    let exact = covariance_matrix_exact(&real, &x, grid.times())?;
    let mut cov = Table::new(
        "noise_covariance",
        &["s[time]", "t[time]", "empirical[output^2]", "exact[output^2]", "stderr[output^2]", "z[1]"],
    );
    let times = grid.times();
    for i in 0..times.len() {
        for j in i..times.len() {
            let (e, r, se) = (est.covariance[(i, j)], exact[(i, j)], est.stderr[(i, j)]);
            let z = if se > 0.0 { (e - r).abs() / se } else { f64::NAN };
            cov.push(vec![num(times[i]), num(times[j]), num(e), num(r), num(se), num(z)]);
        }
    }
    out.write_table(&cov)?;
    out.write_matrix("noise_covariance_empirical", &est.covariance)?;
    out.write_matrix("noise_covariance_exact", &exact)?;
    let max_z = est.max_z_score(&exact);
    report.check(
        "ensemble covariance",
        max_z <= MAX_Z,
        format!("max z = {max_z:.3} over {} pairs, {} trials", times.len() * (times.len() + 1) / 2, s.trials),
    );
    let stationary = s.temperature * s.gain * (2 * s.harmonics + 1) as f64 / s.tau;
    let worst_diag = (0..times.len())
        .map(|i| relative_gap(exact[(i, i)], stationary))
        .fold(0.0, f64::max);
    report.check(
        "exact variance T k (2N+1)/tau",
        worst_diag <= 1e-10,
        format!("closed form {}, max relative gap {worst_diag:e}", num(stationary)),
    );

    let band = band_limited_variance(&real, &spec, s.bandwidth)?;
    let predicted = band_limited_variance_thermal(&real, s.temperature, s.bandwidth);
    let jn = johnson_nyquist_variance(s.temperature, s.gain, s.bandwidth);
    let mut t = Table::new(
        "noise_band",
        &[
            "bandwidth[cycles/time]",
            "window[time]",
            "samples[count]",
            "passband_bins[count]",
            "variance[output^2]",
            "stderr[output^2]",
            "finite_n_prediction[output^2]",
            "johnson_nyquist[output^2]",
            "relative_deviation[1]",
        ],
    );
    let rel = relative_gap(band.variance, jn);
    t.push(vec![
        num(s.bandwidth),
        num(band.window),
        band.samples_per_path.to_string(),
        band.passband_bins.to_string(),
        num(band.variance),
        num(band.stderr),
        num(predicted),
        num(jn),
        num(rel),
    ]);
    out.write_table(&t)?;
    report.check(
        "band variance vs finite-N prediction",
        (band.variance - predicted).abs() <= MAX_Z * band.stderr,
        format!("{} vs {} (stderr {})", num(band.variance), num(predicted), num(band.stderr)),
    );
    report.check(
        "band variance vs 4TkB",
        rel <= JOHNSON_NYQUIST_TOLERANCE,
        format!("{} vs {}, relative deviation {rel:.4}", num(band.variance), num(jn)),
    );
    Ok(())
}
