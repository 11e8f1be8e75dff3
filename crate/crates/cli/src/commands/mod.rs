use lossless_core::{make_lossless, DMatrix, DVector, LosslessSystem};

use crate::config::{
    ApproxSettings, CertifySettings, EquipartitionSettings, InterconnectSettings, MeasureSettings, NoiseSettings,
    Params,
};
use crate::error::CliError;
use crate::output::OutputDir;
use crate::{Command, Report};

pub mod approx;
pub mod certify;
pub mod equipartition;
pub mod interconnect;
pub mod measure;
pub mod noise;

pub fn run(command: Command, params: &Params, out: &mut OutputDir, report: &mut Report) -> Result<(), CliError> {
    match command {
        Command::Approx => approx::run(&resolved(ApproxSettings::resolve(params)?, report), out, report),
        Command::Noise => noise::run(&resolved(NoiseSettings::resolve(params)?, report), out, report),
        Command::Equipartition => {
            equipartition::run(&resolved(EquipartitionSettings::resolve(params)?, report), out, report)
        }
        Command::Interconnect => {
            interconnect::run(&resolved(InterconnectSettings::resolve(params)?, report), out, report)
        }
        Command::Measure => measure::run(&resolved(MeasureSettings::resolve(params)?, report), out, report),
        Command::Certify => certify::run(&resolved(CertifySettings::resolve(params)?, report), out, report),
    }
}

/// Records the effective settings in the report.
fn resolved<S: std::fmt::Debug>(settings: S, report: &mut Report) -> S {
    report.note(format!("settings: {settings:?}"));
    settings
}

/// Unit-frequency oscillator `ẋ₁ = x₂ + u`, `ẋ₂ = −x₁`, `y = x₁`.
pub(crate) fn oscillator() -> LosslessSystem {
    let j = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    make_lossless(j, DVector::from_vec(vec![1.0, 0.0])).expect("rotation generator is skew")
}

/// `|a − b| / |b|`, or `|a − b|` when `b = 0`.
pub(crate) fn relative_gap(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        (a - b).abs()
    } else {
        ((a - b) / b).abs()
    }
}

pub(crate) fn flag(b: bool) -> String {
    b.to_string()
}
