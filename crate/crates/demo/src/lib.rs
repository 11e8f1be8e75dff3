//! WebAssembly entry points for the single-page demo in `www/`.
//!
//! Every export has a plain Rust twin returning `Result<_, String>`, so the
//! numerics are testable natively; the exports only convert the error.

use lossless_core::ensemble::fluctuation_dissipation_check;
use lossless_core::memory::{build_certificate, check_positive_real, CertifyOptions, ImpulseResponse};
use lossless_core::numeric::linspace;
use lossless_core::{build_kn, prop1_bound, DMatrix, InputSignal, TimeGrid};
use wasm_bindgen::prelude::*;

/// Largest state dimension the page will build.
pub const MAX_HARMONICS: usize = 2000;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn check_harmonics(n: usize) -> Result<(), String> {
    if n > MAX_HARMONICS {
        Err(format!("at most {MAX_HARMONICS} harmonics in the browser, got {n}"))
    } else {
        Ok(())
    }
}

/// `|k·u − K_N u|` and its bound for `u = 1 − cos(ωt)` on `[0, τ]`.
#[wasm_bindgen(getter_with_clone)]
#[derive(Debug, Clone)]
pub struct ApproxCurve {
    pub times: Vec<f64>,
    pub error: Vec<f64>,
    pub bound: Vec<f64>,
    pub sup_error: f64,
    pub sup_bound: f64,
    pub holds: bool,
}

pub fn approx_data(gain: f64, tau: f64, harmonics: usize, omega: f64, points: usize) -> Result<ApproxCurve, String> {
    check_harmonics(harmonics)?;
    let real = build_kn(gain, tau, harmonics).map_err(err)?;
    let grid = TimeGrid::uniform(0.0, tau, points.max(2)).map_err(err)?;
    let rep = prop1_bound(&real, &InputSignal::one_minus_cos(omega), &grid).map_err(err)?;
    Ok(ApproxCurve {
        sup_error: rep.sup_error(),
        sup_bound: rep.sup_bound(),
        holds: rep.holds,
        times: rep.times,
        error: rep.observed,
        bound: rep.bound,
    })
}

#[wasm_bindgen]
pub fn approx_curve(gain: f64, tau: f64, harmonics: usize, omega: f64, points: usize) -> Result<ApproxCurve, JsError> {
    approx_data(gain, tau, harmonics, omega, points).map_err(|e| JsError::new(&e))
}

/// Thermal covariance `R(s, s+Δ)/T` beside the simulated impulse response.
#[wasm_bindgen(getter_with_clone)]
#[derive(Debug, Clone)]
pub struct FdtCurve {
    pub lags: Vec<f64>,
    pub covariance_over_t: Vec<f64>,
    pub impulse: Vec<f64>,
    pub max_defect: f64,
}

pub fn fdt_data(
    gain: f64,
    tau: f64,
    harmonics: usize,
    temperature: f64,
    anchor: f64,
    points: usize,
) -> Result<FdtCurve, String> {
    check_harmonics(harmonics)?;
    if !(temperature > 0.0) {
        return Err("temperature must be positive".into());
    }
    let real = build_kn(gain, tau, harmonics).map_err(err)?;
    let n = real.dimension();
    let x = DMatrix::identity(n, n) * temperature;
    let lags = TimeGrid::uniform(0.0, tau, points.max(2)).map_err(err)?;
    let rep = fluctuation_dissipation_check(&real, &x, &lags, &[anchor]).map_err(err)?;
    Ok(FdtCurve {
        lags: rep.rows.iter().map(|r| r.lag).collect(),
        covariance_over_t: rep.rows.iter().map(|r| r.covariance / temperature).collect(),
        impulse: rep.rows.iter().map(|r| r.impulse).collect(),
        max_defect: rep.max_defect,
    })
}

#[wasm_bindgen]
pub fn fdt_curve(
    gain: f64,
    tau: f64,
    harmonics: usize,
    temperature: f64,
    anchor: f64,
    points: usize,
) -> Result<FdtCurve, JsError> {
    fdt_data(gain, tau, harmonics, temperature, anchor, points).map_err(|e| JsError::new(&e))
}

/// Certificate for `g(t) = a·e^{−rt}·cos(ft)`; `certified` is false with a
/// reason when no certificate exists.
#[wasm_bindgen(getter_with_clone)]
#[derive(Debug, Clone)]
pub struct CertifySummary {
    pub certified: bool,
    pub message: String,
    pub min_real_part: f64,
    pub argmin_omega: f64,
    pub tau: f64,
    pub harmonics: usize,
    pub achieved_error: f64,
    pub times: Vec<f64>,
    pub target: Vec<f64>,
    pub approximation: Vec<f64>,
}

pub fn certify_data(amplitude: f64, rate: f64, frequency: f64, epsilon: f64) -> Result<CertifySummary, String> {
    let g = ImpulseResponse::damped_cosine(amplitude, rate, frequency).map_err(err)?;
    let pr = check_positive_real(&g, &linspace(0.0, 20.0, 201), 1e-8).map_err(err)?;
    let options = CertifyOptions {
        max_harmonics: MAX_HARMONICS,
        ..CertifyOptions::default()
    };
    let mut summary = CertifySummary {
        certified: false,
        message: String::new(),
        min_real_part: pr.min_real_part,
        argmin_omega: pr.argmin_omega,
        tau: f64::NAN,
        harmonics: 0,
        achieved_error: f64::NAN,
        times: Vec::new(),
        target: Vec::new(),
        approximation: Vec::new(),
    };
    let horizon = match build_certificate(&g, epsilon, &options) {
        Ok(c) => {
            let cert = &c.certificate;
            summary.certified = true;
            summary.message = format!(
                "certified: tau = {:.4}, N = {}, state dimension {}",
                cert.tau,
                cert.harmonics,
                c.system.dim()
            );
            summary.tau = cert.tau;
            summary.harmonics = cert.harmonics;
            summary.achieved_error = cert.achieved_error;
            summary.times = linspace(0.0, cert.tau, 400);
            summary.approximation = summary.times.iter().map(|&t| c.system.impulse_response(t)).collect();
            cert.tau
        }
        Err(e) => {
            summary.message = e.to_string();
            10.0
        }
    };
    if summary.times.is_empty() {
        summary.times = linspace(0.0, horizon, 400);
    }
    summary.target = summary.times.iter().map(|&t| g.value(t)).collect();
    Ok(summary)
}

#[wasm_bindgen]
pub fn certify(amplitude: f64, rate: f64, frequency: f64, epsilon: f64) -> Result<CertifySummary, JsError> {
    certify_data(amplitude, rate, frequency, epsilon).map_err(|e| JsError::new(&e))
}
