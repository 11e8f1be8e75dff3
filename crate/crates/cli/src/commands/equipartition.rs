//! Maximum-entropy ensemble, white-noise preparation and the
//! covariance/impulse-response identity at the resulting temperature.

use lossless_core::ensemble::{
    check_temperature, fluctuation_dissipation_check, maxent_covariance, whitenoise_covariance, FdtStatus,
    THERMAL_TOLERANCE,
};
use lossless_core::numeric::linspace;
use lossless_core::{build_kn, DMatrix, TimeGrid};

use super::relative_gap;
use crate::config::EquipartitionSettings;
use crate::error::CliError;
use crate::output::{num, OutputDir, Table};
use crate::Report;

/// Entrywise tolerance for the closed-form covariances.
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-12;

pub fn run(s: &EquipartitionSettings, out: &mut OutputDir, report: &mut Report) -> Result<(), CliError> {
    let mut summary = Table::new(
        "equipartition_summary",
        &["quantity[name]", "value[1]", "expected[1]", "abs_error[1]"],
    );
    let mut row = |name: &str, v: f64, e: f64| summary.push(vec![name.to_string(), num(v), num(e), num((v - e).abs())]);

    let (x_me, t_me) = maxent_covariance(s.energy, s.dim)?;
    let expected_t = 2.0 * s.energy / s.dim as f64;
    let dev_me = (&x_me - DMatrix::identity(s.dim, s.dim) * expected_t).amax();
    row("maxent_temperature", t_me.value(), expected_t);
    row("maxent_max_entry_error", dev_me, 0.0);
    out.write_matrix("maxent_covariance", &x_me)?;
    report.check(
        "maximum-entropy covariance is T I with T = 2E/n",
        dev_me <= CLOSED_FORM_TOLERANCE && relative_gap(t_me.value(), expected_t) <= CLOSED_FORM_TOLERANCE,
        format!("E = {}, n = {}, T = {}", s.energy, s.dim, num(t_me.value())),
    );

    let real = build_kn(s.gain, s.tau, s.harmonics)?;
    let n = real.dimension();
    let x_wn = whitenoise_covariance(&real, s.intensity, 2.0 * s.tau)?;
    let level = s.intensity * s.gain / s.tau;
    let dev_wn = (&x_wn - DMatrix::identity(n, n) * level).amax();
    row("whitenoise_level", x_wn[(0, 0)], level);
    row("whitenoise_max_entry_error", dev_wn, 0.0);
    out.write_matrix("whitenoise_covariance", &x_wn)?;
    report.check(
        "white noise over one period gives (i k / tau) I",
        dev_wn <= CLOSED_FORM_TOLERANCE,
        format!("level {}, max entry error {dev_wn:e}", num(level)),
    );

    let probes = linspace(0.0, s.tau, 7);
    let thermal = check_temperature(&real, &x_wn, &probes)?;
    row("fitted_temperature", thermal.fitted_temperature, level);
    report.check(
        "white-noise ensemble has a temperature",
        thermal.is_thermal && thermal.sufficient_condition(),
        format!("fitted T = {}, defect {:e}", num(thermal.fitted_temperature), thermal.max_defect),
    );

    let lags = TimeGrid::uniform(0.0, s.tau, 201)?;
    let anchors = [0.0, 0.17 * s.tau, 0.4 * s.tau];
    let fdt = fluctuation_dissipation_check(&real, &x_wn, &lags, &anchors)?;
    let mut t = Table::new(
        "equipartition_fdt",
        &["anchor[time]", "lag[time]", "covariance[output^2]", "impulse[output/input]", "defect[output/input]"],
    );
    for r in &fdt.rows {
        t.push(vec![num(r.anchor), num(r.lag), num(r.covariance), num(r.impulse), num(r.defect)]);
    }
    out.write_table(&t)?;
    row("fdt_max_defect", fdt.max_defect, 0.0);
    out.write_table(&summary)?;
    report.check(
        "covariance over T equals impulse response",
        fdt.status == FdtStatus::Passed && fdt.max_defect <= THERMAL_TOLERANCE,
        format!("{:?}, max defect {:e}", fdt.status, fdt.max_defect),
    );
    Ok(())
}
