//! Harmonic lossless/causal approximation `K_N` of the memoryless
//! dissipative gain `y = ku`.
//!
//! The realization has `2N + 1` states ordered as `N` cosine states, `N`
//! sine states and one constant state. Harmonic `l` rotates at `l·ω₀` with
//! `ω₀ = π/τ`. Its impulse response is the causal, doubled cosine series
//!
//! ```text
//! 2κ_N^c(t) = k/τ + Σ_{l=1..N} (2k/τ) cos(l ω₀ t),   t ≥ 0
//! ```
//!
//! which tends to `k·δ(t)` on `[0, τ]` as `N` grows.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lti::{simulate_outputs, InputSignal, LosslessSystem, TimeGrid};
use crate::numeric::{integrate, QuadratureOptions};

/// Lossless system whose impulse response is `Σ c_l cos(l ω₀ t) + c₀`,
/// with every `c_l ≥ 0`.
///
/// `harmonics` lists `(l, c_l)` with `l ≥ 1`; each gets a rotation block at
/// frequency `l·ω₀` and input/output gain `√c_l` on its cosine state.
/// `constant` is the weight on the integrator state (gain `√c₀`).
pub fn cosine_series_system(omega0: f64, harmonics: &[(usize, f64)], constant: f64) -> Result<LosslessSystem> {
    if harmonics.iter().any(|&(l, c)| l == 0 || c < 0.0 || !c.is_finite()) || constant < 0.0 {
        return Err(Error::InvalidParameter(
            "cosine series weights must be finite and non-negative, harmonics start at 1".into(),
        ));
    }
    let m = harmonics.len();
    let n = 2 * m + 1;
    let mut j = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for (i, &(l, c)) in harmonics.iter().enumerate() {
        let w = l as f64 * omega0;
        j[(i, m + i)] = w;
        j[(m + i, i)] = -w;
        b[i] = c.sqrt();
    }
    b[n - 1] = constant.sqrt();
    Ok(LosslessSystem::from_skew_unchecked(j, b))
}

/// The realization `(J_N, √2·B_N, √2·C_N)` of `K_N`.
#[derive(Debug, Clone)]
pub struct HarmonicRealization {
    gain: f64,
    tau: f64,
    harmonics: usize,
    omega0: f64,
    sys: LosslessSystem,
}

/// Builds `K_N` for gain `k > 0`, recurrence time `τ > 0` and `N` harmonics.
pub fn build_kn(gain: f64, tau: f64, harmonics: usize) -> Result<HarmonicRealization> {
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gain must be positive (dissipative target), got {gain}"
        )));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("recurrence time must be positive, got {tau}")));
    }
    let omega0 = PI / tau;
    let weights: Vec<(usize, f64)> = (1..=harmonics).map(|l| (l, 2.0 * gain / tau)).collect();
    let sys = cosine_series_system(omega0, &weights, gain / tau)?;
    Ok(HarmonicRealization {
        gain,
        tau,
        harmonics,
        omega0,
        sys,
    })
}

impl HarmonicRealization {
    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn harmonics(&self) -> usize {
        self.harmonics
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn dimension(&self) -> usize {
        2 * self.harmonics + 1
    }

    /// The underlying lossless system; its coupling vector is `√2·B_N`.
    pub fn system(&self) -> &LosslessSystem {
        &self.sys
    }

    /// `C_N = √(k/τ)·(1, …, 1, 0, …, 0, 1/√2)`.
    pub fn c_vector(&self) -> DVector<f64> {
        let n = self.dimension();
        let s = (self.gain / self.tau).sqrt();
        let mut c = DVector::zeros(n);
        for i in 0..self.harmonics {
            c[i] = s;
        }
        c[n - 1] = s / 2f64.sqrt();
        c
    }

    /// Output vector `√2·C_Nᵀ`; identical to the coupling vector.
    pub fn output_vector(&self) -> &DVector<f64> {
        self.sys.coupling()
    }

    /// Impulse response of the state-space realization.
    pub fn impulse_response(&self, t: f64) -> f64 {
        self.sys.impulse_response(t)
    }

    /// Direct evaluation of `2κ_N^c(t)` for `t ≥ 0`.
    pub fn series_value(&self, t: f64) -> f64 {
        let base = self.gain / self.tau;
        let sum: f64 = (1..=self.harmonics)
            .map(|l| (l as f64 * self.omega0 * t).cos())
            .sum();
        base + 2.0 * base * sum
    }

    /// `Bᵀe^{Jt}x₀` part of the output for initial state `x0`.
    pub fn homogeneous_output(&self, x0: &DVector<f64>, t: f64) -> f64 {
        self.sys.output(&self.sys.propagate(x0, t))
    }
}

impl AsRef<LosslessSystem> for HarmonicRealization {
    fn as_ref(&self) -> &LosslessSystem {
        &self.sys
    }
}

/// `y_N = K_N u` on the grid, simulated from rest.
pub fn apply_kn(real: &HarmonicRealization, u: &InputSignal, grid: &TimeGrid) -> Result<Vec<f64>> {
    simulate_outputs(&real.sys, u, &DVector::zeros(real.dimension()), grid)
}

/// Pointwise error bound against observed error for `K_N u` versus `k·u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBoundReport {
    pub times: Vec<f64>,
    /// Right-hand side `2kτ/(π²N)·(|u̇(t)| + |u̇(0)| + ‖ü‖_{L1[0,t]})`.
    pub bound: Vec<f64>,
    /// `|k·u(t) − y_N(t)|`.
    pub observed: Vec<f64>,
    pub derivative_at_t: Vec<f64>,
    pub derivative_at_zero: f64,
    pub second_derivative_l1: Vec<f64>,
    /// Estimated simulation error of `observed` (step-halving).
    pub discretization_slack: f64,
    /// Error in the bound caused by differentiating sampled input.
    pub differentiation_slack: f64,
    pub holds: bool,
}

impl ErrorBoundReport {
    pub fn slack(&self) -> f64 {
        self.discretization_slack + self.differentiation_slack
    }

    pub fn sup_error(&self) -> f64 {
        self.observed.iter().cloned().fold(0.0, f64::max)
    }

    pub fn sup_bound(&self) -> f64 {
        self.bound.iter().cloned().fold(0.0, f64::max)
    }

    /// Smallest `bound − observed` over the grid.
    pub fn min_margin(&self) -> f64 {
        self.bound
            .iter()
            .zip(&self.observed)
            .map(|(b, o)| b - o)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Factor `2kτ/(π²N)`; infinite for `N = 0`.
pub fn bound_coefficient(gain: f64, tau: f64, harmonics: usize) -> f64 {
    if harmonics == 0 {
        f64::INFINITY
    } else {
        2.0 * gain * tau / (PI * PI * harmonics as f64)
    }
}

struct DerivativeStats {
    at_t: Vec<f64>,
    at_zero: f64,
    l1: Vec<f64>,
}

fn derivative_stats(u: &InputSignal, times: &[f64]) -> Result<DerivativeStats> {
    let d1 = |t: f64| {
        u.first_derivative(t)
            .ok_or_else(|| Error::Precondition("input has no first-derivative handle".into()))
    };
    let d2_available = u.second_derivative(0.0).is_some();
    if !d2_available {
        return Err(Error::Precondition("input has no second-derivative handle".into()));
    }
    let at_t = times.iter().map(|&t| d1(t).map(f64::abs)).collect::<Result<Vec<_>>>()?;
    let at_zero = d1(0.0)?.abs();
    let mut l1 = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    let opts = QuadratureOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-12,
        max_segments: 200,
        initial_panels: 1,
    };
    for &t in times {
        if t > prev {
            acc += integrate(|s| u.second_derivative(s).unwrap_or(0.0).abs(), prev, t, opts).value;
            prev = t;
        }
        l1.push(acc);
    }
    Ok(DerivativeStats { at_t, at_zero, l1 })
}

/// Evaluates the bound and the observed error of `K_N` on `grid`.
///
/// Requires `u(0) = 0`. For sampled inputs the derivatives come from a
/// cubic interpolant, and the change against an interpolant through every
/// other sample is added to the slack.
pub fn prop1_bound(real: &HarmonicRealization, u: &InputSignal, grid: &TimeGrid) -> Result<ErrorBoundReport> {
    let u0 = u.value(0.0)?;
    if u0.abs() > 1e-12 {
        return Err(Error::Precondition(format!("bound requires u(0) = 0, got u(0) = {u0}")));
    }
    if grid.start() < 0.0 || grid.end() > real.tau * (1.0 + 1e-12) {
        return Err(Error::InvalidGrid(format!(
            "bound holds on [0, τ] = [0, {}], grid spans [{}, {}]",
            real.tau,
            grid.start(),
            grid.end()
        )));
    }
    let times = grid.times();
    let stats = derivative_stats(u, times)?;
    let coef = bound_coefficient(real.gain, real.tau, real.harmonics);
    let bound: Vec<f64> = stats
        .at_t
        .iter()
        .zip(&stats.l1)
        .map(|(d, l1)| {
            let s = d + stats.at_zero + l1;
            if s == 0.0 {
                0.0
            } else {
                coef * s
            }
        })
        .collect();

    let y = apply_kn(real, u, grid)?;
    let target = u.evaluate_on(times)?;
    let observed: Vec<f64> = y
        .iter()
        .zip(&target)
        .map(|(yn, uv)| (real.gain * uv - yn).abs())
        .collect();

    // Step-halving estimate of the simulation error at the grid points.
    let discretization_slack = if u.is_zero() {
        0.0
    } else {
        let fine = grid.refined(2);
        let y_fine = apply_kn(real, u, &fine)?;
        let diff = y
            .iter()
            .enumerate()
            .map(|(i, v)| (v - y_fine[2 * i]).abs())
            .fold(0.0, f64::max);
        2.0 * diff + 1e-12
    };

    let differentiation_slack = match u.samples() {
        Some((st, sv)) if st.len() >= 5 && coef.is_finite() => {
            let coarse_t: Vec<f64> = st.iter().step_by(2).cloned().collect();
            let coarse_v: Vec<f64> = sv.iter().step_by(2).cloned().collect();
            let coarse = InputSignal::sampled(coarse_t, coarse_v)?;
            let alt = derivative_stats(&coarse, times)?;
            let worst = stats
                .at_t
                .iter()
                .zip(&alt.at_t)
                .zip(stats.l1.iter().zip(&alt.l1))
                .map(|((a, b), (c, d))| (a - b).abs() + (c - d).abs())
                .fold(0.0, f64::max)
                + (stats.at_zero - alt.at_zero).abs();
            coef * worst
        }
        _ => 0.0,
    };

    let slack = discretization_slack + differentiation_slack;
    let holds = observed.iter().zip(&bound).all(|(o, b)| *o <= b + slack);
    Ok(ErrorBoundReport {
        times: times.to_vec(),
        bound,
        observed,
        derivative_at_t: stats.at_t,
        derivative_at_zero: stats.at_zero,
        second_derivative_l1: stats.l1,
        discretization_slack,
        differentiation_slack,
        holds,
    })
}
