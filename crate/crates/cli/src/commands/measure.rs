//! Process and measurement noise intensities across measurement gains.

use lossless_core::interconnect::estimate_intensities;
use lossless_core::{measure, simulate_noisy, DVector, InputSignal, TimeGrid};

use super::{oscillator, relative_gap};
use crate::config::MeasureSettings;
use crate::error::CliError;
use crate::output::{num, OutputDir, Table};
use crate::Report;

/// Relative tolerance on each estimated intensity.
pub const INTENSITY_TOLERANCE: f64 = 0.1;

pub fn run(s: &MeasureSettings, out: &mut OutputDir, report: &mut Report) -> Result<(), CliError> {
    let osc = oscillator();
    let grid = TimeGrid::uniform(0.0, s.step * s.steps as f64, s.steps + 1)?;
    let mut table = Table::new(
        "measure_intensities",
        &[
            "km[gain]",
            "seed[1]",
            "process_estimate[intensity]",
            "process_exact[intensity]",
            "measurement_estimate[intensity]",
            "measurement_exact[intensity]",
            "cross_estimate[intensity]",
            "cross_exact[intensity]",
            "product_estimate[intensity^2]",
            "product_exact[intensity^2]",
        ],
    );
    for (i, &km) in s.km.iter().enumerate() {
        let m = measure(&osc, km, s.temperature)?;
        let seed = s.seed.wrapping_add(i as u64);
        let run = simulate_noisy(m.system(), &InputSignal::Zero, &DVector::zeros(osc.dim()), &grid, seed)?;
        let est = estimate_intensities(&m, &run)?;
        let (p, q, c) = (m.process_intensity(), m.measurement_intensity(), m.cross_intensity());
        table.push(vec![
            num(km),
            seed.to_string(),
            num(est.process),
            num(p),
            num(est.measurement),
            num(q),
            num(est.cross),
            num(c),
            num(est.process * est.measurement),
            num(p * q),
        ]);
        let worst = [(est.process, p), (est.measurement, q), (est.cross, c)]
            .iter()
            .map(|&(e, x)| relative_gap(e, x))
            .fold(0.0, f64::max);
        report.check(
            &format!("intensities at km = {km}"),
            worst <= INTENSITY_TOLERANCE,
            format!("worst relative deviation {worst:.4} over {} steps", s.steps),
        );
    }
    out.write_table(&table)?;
    report.note(format!(
        "exact process x measurement product 4T^2 = {} for every gain",
        num(4.0 * s.temperature * s.temperature)
    ));
    Ok(())
}
