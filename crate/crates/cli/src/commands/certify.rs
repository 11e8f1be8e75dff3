//! Positive-real test, certified lossless approximation and the search for
//! an energy-extracting input, for one impulse response.

use std::path::Path;

use lossless_core::memory::{
    build_certificate, check_positive_real, falsify_if_direction, negative_tail_regimes, CertifyOptions,
    FalsifierOptions, ImpulseResponse, PrVerdict,
};
use lossless_core::numeric::linspace;
use lossless_core::{build_kn, DMatrix, Error, LosslessSystem};

use super::flag;
use crate::config::{CertifySettings, Family};
use crate::error::CliError;
use crate::output::{num, OutputDir, Table};
use crate::{Outcome, Report};

/// Resolution of the positive-real test.
pub const PR_RESOLUTION: f64 = 1e-8;
/// Allowed `|supplied − stored|` for a lossless candidate.
pub const ENERGY_DEFECT: f64 = 1e-9;
/// Harmonics of the reference `K_N` candidate.
pub const REFERENCE_HARMONICS: usize = 20;

pub fn impulse_response(family: &Family) -> Result<ImpulseResponse, CliError> {
    Ok(match family {
        Family::Exponential { amplitude, rate } => ImpulseResponse::exponential(*amplitude, *rate)?,
        Family::DampedCosine {
            amplitude,
            rate,
            frequency,
        } => ImpulseResponse::damped_cosine(*amplitude, *rate, *frequency)?,
        Family::Zero => ImpulseResponse::zero(),
        Family::Samples(path) => {
            let (t, g) = read_samples(path)?;
            ImpulseResponse::from_samples(t, g)?
        }
    })
}

/// Two numeric columns `t, g`; a non-numeric first row is a header.
pub fn read_samples(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let (mut t, mut g) = (Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parsed = (rec.get(0).map(str::parse::<f64>), rec.get(1).map(str::parse::<f64>));
        match parsed {
            (Some(Ok(a)), Some(Ok(b))) => {
                t.push(a);
                g.push(b);
            }
            _ if i == 0 => continue,
            _ => {
                return Err(CliError::Usage(format!(
                    "{}: row {} is not two numbers",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok((t, g))
}

pub fn run(s: &CertifySettings, out: &mut OutputDir, report: &mut Report) -> Result<(), CliError> {
    let g = impulse_response(&s.family)?;

    let omegas = linspace(0.0, s.omega_max, s.grid_points);
    let pr = check_positive_real(&g, &omegas, PR_RESOLUTION)?;
    let mut t = Table::new("certify_positive_real", &["omega[rad/time]", "re_transform[output/input]"]);
    for &(w, re) in &pr.real_parts {
        t.push(vec![num(w), num(re)]);
    }
    out.write_table(&t)?;
    let pr_detail = format!(
        "min Re = {} at omega = {}, tail bound {:e}",
        num(pr.min_real_part),
        num(pr.argmin_omega),
        pr.tail_bound
    );
    let pr_outcome = match pr.verdict {
        PrVerdict::Positive => Outcome::Pass,
        PrVerdict::NotPositive => Outcome::Fail,
        PrVerdict::Inconclusive => Outcome::Inconclusive,
    };
    let detail = match &pr.reason {
        Some(r) => format!("{pr_detail} ({r})"),
        None => pr_detail,
    };
    report.push("positive real", pr_outcome, detail);

    let options = CertifyOptions {
        requested_horizon: s.horizon,
        ..CertifyOptions::default()
    };
    let mut candidates: Vec<(String, LosslessSystem)> = Vec::new();
    match build_certificate(&g, s.epsilon, &options) {
        Ok(certified) => {
            let c = &certified.certificate;
            let mut summary = Table::new("certify_certificate", &["quantity[name]", "value[1]"]);
            for (name, v) in [
                ("epsilon", c.epsilon),
                ("tau", c.tau),
                ("harmonics", c.harmonics as f64),
                ("c_value", c.c_value),
                ("sup_norm", c.sup_norm),
                ("derivative_l1", c.derivative_l1),
                ("delta_tau", c.delta_tau),
                ("truncation_error", c.truncation_error),
                ("negative_mass", c.negative_mass),
                ("achieved_error", c.achieved_error),
                ("coefficient_error", c.coefficient_error),
                ("dimension", certified.system.dim() as f64),
            ] {
                summary.push(vec![name.to_string(), num(v)]);
            }
            out.write_table(&summary)?;
            let mut ineq = Table::new("certify_checks", &["inequality[name]", "lhs[1]", "rhs[1]", "holds[bool]"]);
            for chk in c.checks() {
                ineq.push(vec![chk.name.to_string(), num(chk.lhs), num(chk.rhs), flag(chk.holds)]);
            }
            out.write_table(&ineq)?;
            let mut coeffs = Table::new("certify_coefficients", &["k[index]", "a_k[output/input]", "kept[bool]"]);
            for (k, a) in c.coeffs.iter().enumerate() {
                coeffs.push(vec![k.to_string(), num(*a), flag(*a >= 0.0)]);
            }
            out.write_table(&coeffs)?;
            out.write_matrix("certify_J", certified.system.generator())?;
            let b = certified.system.coupling();
            out.write_matrix("certify_B", &DMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
            report.check(
                "certificate",
                c.holds(),
                format!(
                    "tau = {}, N = {}, achieved error {} <= {}",
                    num(c.tau),
                    c.harmonics,
                    num(c.achieved_error),
                    c.epsilon
                ),
            );
            let regimes = negative_tail_regimes(c);
            report.check(
                "negative coefficient regimes",
                regimes.holds(),
                format!(
                    "split K = {}, low mass {} <= {}, high mass {} <= {}",
                    regimes.split_index,
                    num(regimes.low_mass + 0.0),
                    num(regimes.low_bound),
                    num(regimes.high_mass + 0.0),
                    num(regimes.high_bound)
                ),
            );
            candidates.push(("certified".to_string(), certified.system));
        }
        Err(Error::CertificationFailed { inequality, lhs, rhs }) => {
            report.check("certificate", false, format!("{inequality}: {lhs:e} > {rhs:e}"));
        }
        Err(Error::Inconclusive(why)) => {
            report.push("certificate", Outcome::Inconclusive, why);
        }
        Err(e) => return Err(e.into()),
    }

    let reference = build_kn(1.0, s.falsifier_horizon, REFERENCE_HARMONICS)?;
    candidates.push((format!("K_{REFERENCE_HARMONICS}"), reference.system().clone()));
    let fopts = FalsifierOptions {
        horizon: s.falsifier_horizon,
        budget: s.budget,
        seed: s.seed,
        ..FalsifierOptions::default()
    };
    let refs: Vec<&LosslessSystem> = candidates.iter().map(|(_, c)| c).collect();
    let fal = falsify_if_direction(&g, &refs, &fopts)?;
    let mut ft = Table::new(
        "certify_falsifier",
        &[
            "family[name]",
            "tried[count]",
            "witness[bool]",
            "trial[index]",
            "extracted[energy]",
            "l1_norm[input*time]",
            "l2_norm[input*time^0.5]",
            "coefficients[input]",
        ],
    );
    let coeff_text = |c: &[f64]| c.iter().map(|v| num(*v)).collect::<Vec<_>>().join(";");
    match &fal.witness {
        Some(w) => ft.push(vec![
            fal.family.clone(),
            fal.tried.to_string(),
            flag(true),
            w.trial.to_string(),
            num(w.extracted),
            num(w.l1_norm),
            num(w.l2_norm),
            coeff_text(&w.input.coefficients),
        ]),
        None => ft.push(vec![
            fal.family.clone(),
            fal.tried.to_string(),
            flag(false),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            coeff_text(&fal.probe.coefficients),
        ]),
    }
    out.write_table(&ft)?;

    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    let mut ct = Table::new(
        "certify_candidates",
        &[
            "candidate[name]",
            "dimension[count]",
            "supplied[energy]",
            "stored[energy]",
            "defect[energy]",
            "output_mismatch[output*time^0.5]",
            "mismatch_lower_bound[output*time^0.5]",
            "impulse_distance[output*time^0.5]",
            "impulse_distance_lower_bound[output*time^0.5]",
        ],
    );
    for ((name, sys), chk) in candidates.iter().zip(&fal.candidates) {
        ct.push(vec![
            name.clone(),
            sys.dim().to_string(),
            num(chk.supplied_energy),
            num(chk.stored_energy),
            num(chk.defect),
            opt(chk.output_mismatch),
            opt(chk.mismatch_lower_bound),
            opt(chk.impulse_distance),
            opt(chk.impulse_distance_lower_bound),
        ]);
        report.check(
            &format!("candidate {name} stores what it is supplied"),
            chk.defect <= ENERGY_DEFECT,
            format!("defect {:e}", chk.defect),
        );
        if let (Some(m), Some(mb), Some(d), Some(db)) = (
            chk.output_mismatch,
            chk.mismatch_lower_bound,
            chk.impulse_distance,
            chk.impulse_distance_lower_bound,
        ) {
            report.check(
                &format!("candidate {name} separated from the target"),
                m >= mb && d >= db,
                format!("output {} >= {}, impulse {} >= {}", num(m), num(mb), num(d), num(db)),
            );
        }
    }
    out.write_table(&ct)?;

    match (&fal.witness, pr.verdict) {
        (Some(w), PrVerdict::Positive) => report.check(
            "energy extraction consistent with positive-real test",
            false,
            format!("witness extracts {} from a positive-real response", num(w.extracted)),
        ),
        (None, PrVerdict::NotPositive) => report.push(
            "energy extraction consistent with positive-real test",
            Outcome::Inconclusive,
            format!("no witness in {} inputs", fal.tried),
        ),
        (Some(w), _) => report.note(format!(
            "witness after {} inputs extracts {} (trial {})",
            fal.tried,
            num(w.extracted),
            w.trial
        )),
        (None, _) => report.note(format!("no energy-extracting input among {} tried", fal.tried)),
    }
    Ok(())
}
