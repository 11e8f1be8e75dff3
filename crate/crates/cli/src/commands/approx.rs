//! `K_N u` against `k·u` for `u = 1 − cos(ωt)` on `[0, τ]`.

use lossless_core::harmonic::bound_coefficient;
use lossless_core::{build_kn, prop1_bound, InputSignal, TimeGrid};

use super::flag;
use crate::config::ApproxSettings;
use crate::error::CliError;
use crate::output::{num, OutputDir, Table};
use crate::Report;

pub fn run(s: &ApproxSettings, out: &mut OutputDir, report: &mut Report) -> Result<(), CliError> {
    let u = InputSignal::one_minus_cos(s.input_omega);
    let grid = TimeGrid::uniform(0.0, s.tau, s.grid_points)?;
    let mut table = Table::new(
        "approx_errors",
        &[
            "harmonics[count]",
            "coefficient[1]",
            "sup_error[output]",
            "sup_bound[output]",
            "min_margin[output]",
            "slack[output]",
            "holds[bool]",
        ],
    );
    let mut all_hold = true;
    let mut errors = Vec::with_capacity(s.harmonics.len());
    for &n in &s.harmonics {
        let real = build_kn(s.gain, s.tau, n)?;
        let rep = prop1_bound(&real, &u, &grid)?;
        all_hold &= rep.holds;
        errors.push((n, rep.sup_error()));
        table.push(vec![
            n.to_string(),
            num(bound_coefficient(s.gain, s.tau, n)),
            num(rep.sup_error()),
            num(rep.sup_bound()),
            num(rep.min_margin()),
            num(rep.slack()),
            flag(rep.holds),
        ]);
        out.write_curve(&format!("approx_error_N{n}"), ("t[time]", "abs_error[output]"), &rep.times, &rep.observed)?;
        out.write_curve(&format!("approx_bound_N{n}"), ("t[time]", "bound[output]"), &rep.times, &rep.bound)?;
    }
    out.write_table(&table)?;
    report.check(
        "pointwise error bound",
        all_hold,
        format!("k = {}, tau = {}, N in {:?}", s.gain, s.tau, s.harmonics),
    );
    for w in errors.windows(2) {
        let ((n0, e0), (n1, e1)) = (w[0], w[1]);
        report.note(format!("sup error ratio N={n1}/N={n0}: {}", num(if e0 > 0.0 { e1 / e0 } else { f64::NAN })));
    }
    Ok(())
}
