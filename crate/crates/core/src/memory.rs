//! Lossless approximation of systems with memory.
//!
//! A causal convolution system `y = g * u` is dissipative exactly when
//! `Re ĝ(jω) ≥ 0`. For such `g` the cosine series of `g` on `[0, τ]` has
//! only small negative coefficients once `τ` is large, and its nonnegative
//! part is the impulse response of a lossless system. The construction
//! here picks `τ` and `N` and certifies
//!
//! ```text
//! ‖g − g⁺_{N,τ}‖_{L2[0,τ]} ≤ ε
//! ```
//!
//! with the constants
//!
//! ```text
//! C    = (2/π)(‖g‖_∞ + ‖g'‖_{L1})
//! δ(t) = ∫_t^∞ |g(s)| ds            (tail mass, not a Dirac delta)
//! a_k  = (2/τ) ∫_0^τ g(t) cos(kπt/τ) dt
//! ```
//!
//! Conversely, when some smooth input from rest extracts energy from
//! `g`, no lossless system started at rest can reproduce that input's
//! response, and [`falsify_if_direction`] quantifies how far off any
//! candidate must be.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};

use crate::ensemble::trial_rng;
use crate::error::{Error, Result};
use crate::harmonic::cosine_series_system;
use crate::lti::{simulate, InputSignal, LosslessSystem, TimeGrid};
use crate::numeric::{integrate, integrate_abs, map_indexed, pairwise_sum, trapezoid, Quadrature, QuadratureOptions};

/// Default cap on the number of harmonics in a certificate.
pub const DEFAULT_MAX_HARMONICS: usize = 1_000_000;

/// Required relative goodness of the exponential tail fit of sampled data.
pub const TAIL_FIT_MIN_R2: f64 = 0.99;

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

fn quad_opts(panels: usize) -> QuadratureOptions {
    QuadratureOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-12,
        max_segments: 100_000,
        initial_panels: panels.max(1),
    }
}

/// `amplitude·e^{−rate·t}·cos(frequency·t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub amplitude: f64,
    pub rate: f64,
    pub frequency: f64,
}

impl Mode {
    fn value(&self, t: f64) -> f64 {
        self.amplitude * (-self.rate * t).exp() * (self.frequency * t).cos()
    }

    fn derivative(&self, t: f64) -> f64 {
        let (s, c) = (self.frequency * t).sin_cos();
        -self.amplitude * (-self.rate * t).exp() * (self.rate * c + self.frequency * s)
    }
}

/// `|f(t)| ≤ amplitude·e^{−rate·t}` for all `t ≥ start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub amplitude: f64,
    pub rate: f64,
    pub start: f64,
}

impl Envelope {
    /// `∫_t^∞ amplitude·e^{−rate·s} ds`, for `t ≥ start`.
    fn tail(&self, t: f64) -> f64 {
        if self.amplitude == 0.0 {
            0.0
        } else {
            self.amplitude * (-self.rate * t).exp() / self.rate
        }
    }

    /// Smallest `t ≥ start` with `tail(t) ≤ target`.
    fn time_for_tail(&self, target: f64) -> f64 {
        if self.amplitude == 0.0 {
            return self.start;
        }
        let t = (self.amplitude / (self.rate * target)).ln() / self.rate;
        t.max(self.start)
    }
}

#[derive(Clone)]
enum Repr {
    Modes(Vec<Mode>),
    ClosedForm {
        label: String,
        g: Scalar,
        dg: Scalar,
        envelope: Envelope,
        derivative_envelope: Envelope,
        frequency: f64,
    },
    Sampled(SampledResponse),
}

/// Dense samples of `g` on `[0, T_max]` with a fitted exponential tail.
#[derive(Debug, Clone)]
struct SampledResponse {
    times: Vec<f64>,
    values: Vec<f64>,
    tail: Option<TailFit>,
}

/// Exponential fit `|g(t)| ≈ A e^{−rt}` over the last tenth of the samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    pub rate: f64,
    /// Smallest `A` with `|g(t_i)| ≤ A e^{−r t_i}` on the fit window.
    pub amplitude: f64,
    pub r_squared: f64,
    pub window_start: f64,
}

/// Scalar impulse response `g(t)`, `t ≥ 0`.
#[derive(Clone)]
pub struct ImpulseResponse {
    repr: Repr,
}

impl fmt::Debug for ImpulseResponse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Modes(m) => f.debug_tuple("ImpulseResponse::Modes").field(m).finish(),
            Repr::ClosedForm { label, envelope, .. } => f
                .debug_struct("ImpulseResponse::ClosedForm")
                .field("label", label)
                .field("envelope", envelope)
                .finish(),
            Repr::Sampled(s) => f
                .debug_struct("ImpulseResponse::Sampled")
                .field("samples", &s.times.len())
                .field("tail", &s.tail)
                .finish(),
        }
    }
}

impl ImpulseResponse {
    pub fn zero() -> Self {
        Self { repr: Repr::Modes(Vec::new()) }
    }

    /// `a·e^{−rt}`, `r > 0`.
    pub fn exponential(amplitude: f64, rate: f64) -> Result<Self> {
        Self::modes(vec![Mode {
            amplitude,
            rate,
            frequency: 0.0,
        }])
    }

    /// `a·e^{−rt}·cos(ωt)`, `r > 0`.
    pub fn damped_cosine(amplitude: f64, rate: f64, frequency: f64) -> Result<Self> {
        Self::modes(vec![Mode {
            amplitude,
            rate,
            frequency,
        }])
    }

    pub fn modes(modes: Vec<Mode>) -> Result<Self> {
        for m in &modes {
            if !(m.amplitude.is_finite() && m.frequency.is_finite()) {
                return Err(Error::InvalidParameter("non-finite mode parameter".into()));
            }
            if m.amplitude != 0.0 && !(m.rate > 0.0 && m.rate.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "decay rate must be > 0 for an integrable response, got {}",
                    m.rate
                )));
            }
        }
        let modes = modes.into_iter().filter(|m| m.amplitude != 0.0).collect();
        Ok(Self { repr: Repr::Modes(modes) })
    }

    /// Sum of two mode representations.
    pub fn sum(&self, other: &ImpulseResponse) -> Result<Self> {
        match (&self.repr, &other.repr) {
            (Repr::Modes(a), Repr::Modes(b)) => Self::modes(a.iter().chain(b).copied().collect()),
            _ => Err(Error::InvalidParameter("only mode sums can be added".into())),
        }
    }

    /// A closed-form response with derivative and exponential envelopes.
    /// `frequency` is the fastest oscillation, used to size quadrature
    /// panels.
    pub fn closed_form<G, D>(label: &str, g: G, dg: D, envelope: Envelope, derivative_envelope: Envelope, frequency: f64) -> Result<Self>
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        for e in [&envelope, &derivative_envelope] {
            if !(e.amplitude >= 0.0 && e.rate > 0.0 && e.start >= 0.0) {
                return Err(Error::InvalidParameter("envelope needs amplitude >= 0, rate > 0, start >= 0".into()));
            }
        }
        Ok(Self {
            repr: Repr::ClosedForm {
                label: label.to_string(),
                g: Arc::new(g),
                dg: Arc::new(dg),
                envelope,
                derivative_envelope,
                frequency: frequency.abs(),
            },
        })
    }

    /// Samples on `[0, T_max]`, starting at `t = 0`.
    ///
    /// A failed tail fit is kept as `None`; quantities that need the tail
    /// then report [`Error::Inconclusive`].
    pub fn from_samples(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 20 {
            return Err(Error::InvalidParameter("need at least 20 matching samples".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidGrid("samples must start at t = 0".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("times must increase strictly and values be finite".into()));
        }
        let tail = fit_tail(&times, &values);
        Ok(Self {
            repr: Repr::Sampled(SampledResponse { times, values, tail }),
        })
    }

    /// End of the sample range for sampled responses.
    pub fn sample_horizon(&self) -> Option<f64> {
        match &self.repr {
            Repr::Sampled(s) => s.times.last().copied(),
            _ => None,
        }
    }

    pub fn tail_fit(&self) -> Option<TailFit> {
        match &self.repr {
            Repr::Sampled(s) => s.tail,
            _ => None,
        }
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self.repr, Repr::Sampled(_))
    }

    pub fn value(&self, t: f64) -> f64 {
        match &self.repr {
            Repr::Modes(m) => m.iter().map(|m| m.value(t)).sum(),
            Repr::ClosedForm { g, .. } => g(t),
            Repr::Sampled(s) => s.interpolate(t),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match &self.repr {
            Repr::Modes(m) => m.iter().map(|m| m.derivative(t)).sum(),
            Repr::ClosedForm { dg, .. } => dg(t),
            Repr::Sampled(s) => s.slope(t),
        }
    }

    /// Fastest oscillation frequency in the representation.
    fn frequency(&self) -> f64 {
        match &self.repr {
            Repr::Modes(m) => m.iter().map(|m| m.frequency.abs()).fold(0.0, f64::max),
            Repr::ClosedForm { frequency, .. } => *frequency,
            Repr::Sampled(_) => 0.0,
        }
    }

    fn envelope(&self) -> Option<Envelope> {
        match &self.repr {
            Repr::Modes(m) => Some(Envelope {
                amplitude: m.iter().map(|m| m.amplitude.abs()).sum(),
                rate: m.iter().map(|m| m.rate).fold(f64::INFINITY, f64::min),
                start: 0.0,
            }),
            Repr::ClosedForm { envelope, .. } => Some(*envelope),
            Repr::Sampled(_) => None,
        }
    }

    fn derivative_envelope(&self) -> Option<Envelope> {
        match &self.repr {
            Repr::Modes(m) => Some(Envelope {
                amplitude: m.iter().map(|m| m.amplitude.abs() * (m.rate + m.frequency.abs())).sum(),
                rate: m.iter().map(|m| m.rate).fold(f64::INFINITY, f64::min),
                start: 0.0,
            }),
            Repr::ClosedForm {
                derivative_envelope, ..
            } => Some(*derivative_envelope),
            Repr::Sampled(_) => None,
        }
    }

    /// Modes that are all non-oscillating and of one sign, so `|g|` is a
    /// positive combination of exponentials.
    fn monotone_exponentials(&self) -> Option<&[Mode]> {
        match &self.repr {
            Repr::Modes(m)
                if m.iter().all(|m| m.frequency == 0.0)
                    && (m.iter().all(|m| m.amplitude > 0.0) || m.iter().all(|m| m.amplitude < 0.0)) =>
            {
                Some(m)
            }
            _ => None,
        }
    }

    fn panels(&self, a: f64, b: f64) -> usize {
        8 + ((b - a) * self.frequency() / PI).ceil() as usize
    }

    /// Sample times strictly inside `(a, b)`, where a sampled response has
    /// kinks; empty for closed-form responses.
    fn knots(&self, a: f64, b: f64) -> Vec<f64> {
        match &self.repr {
            Repr::Sampled(s) => s.times.iter().copied().filter(|&t| t > a && t < b).collect(),
            _ => Vec::new(),
        }
    }

    /// `∫_a^b |f|` plus the envelope tail beyond `b`, with `b` chosen so
    /// the tail is below `1e-15`.
    fn abs_integral_from(&self, f: impl Fn(f64) -> f64, env: Envelope, a: f64) -> f64 {
        let a = a.max(0.0);
        let b = env.time_for_tail(1e-15).max(a);
        let omega = self.frequency();
        let scan = if omega > 0.0 { 0.25 * PI / omega } else { (b - a) / 64.0 };
        let q = integrate_abs(f, a, b, scan.min((b - a).max(1e-300) / 64.0), quad_opts(1));
        q.value + q.error + env.tail(b.max(env.start))
    }

    /// Upper bound on `‖g‖_{L∞[0,∞)}`.
    pub fn sup_norm(&self) -> f64 {
        if let Some(m) = self.monotone_exponentials() {
            return m.iter().map(|m| m.amplitude.abs()).sum();
        }
        match &self.repr {
            Repr::Sampled(s) => {
                let data = s.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let tail = s.tail.map_or(0.0, |f| f.amplitude * (-f.rate * s.end()).exp());
                data.max(tail)
            }
            _ => {
                let env = self.envelope().expect("analytic response has an envelope");
                let denv = self.derivative_envelope().expect("analytic response has an envelope");
                let end = env.start.max(1.0);
                let points = 20_000usize;
                let h = end / points as f64;
                let sampled = (0..=points).map(|i| self.value(i as f64 * h).abs()).fold(0.0, f64::max);
                // Lipschitz slack between samples, then the envelope beyond `end`.
                let lipschitz = denv.amplitude * (-denv.rate * denv.start).exp().max(1.0);
                let inside = sampled + 0.5 * h * lipschitz;
                let mut beyond = env.amplitude * (-env.rate * end).exp();
                if beyond > inside {
                    // The envelope is loose here; refine on a longer window.
                    let end2 = (env.amplitude / inside).ln() / env.rate;
                    let h2 = (end2 - end) / points as f64;
                    let s2 = (0..=points).map(|i| self.value(end + i as f64 * h2).abs()).fold(0.0, f64::max);
                    beyond = s2 + 0.5 * h2 * lipschitz;
                }
                inside.max(beyond)
            }
        }
    }

    /// `‖g'‖_{L1[0,∞)}`.
    pub fn derivative_l1(&self) -> f64 {
        if let Some(m) = self.monotone_exponentials() {
            // Monotone `g` tending to 0: the total variation is `|g(0)|`.
            return m.iter().map(|m| m.amplitude.abs()).sum();
        }
        match &self.repr {
            Repr::Sampled(s) => {
                let tv: Vec<f64> = s.values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
                let tail = s.tail.map_or(0.0, |f| f.amplitude * (-f.rate * s.end()).exp());
                pairwise_sum(&tv) + tail
            }
            _ => {
                let env = self.derivative_envelope().expect("analytic response has an envelope");
                self.abs_integral_from(|t| self.derivative(t), env, 0.0)
            }
        }
    }

    /// `C = (2/π)(‖g‖_∞ + ‖g'‖_{L1})`.
    pub fn c_value(&self) -> f64 {
        2.0 / PI * (self.sup_norm() + self.derivative_l1())
    }

    /// Upper bound on `δ(t) = ∫_t^∞ |g(s)| ds`.
    ///
    /// Sampled responses add the fitted exponential tail past the last
    /// sample and fail with [`Error::Inconclusive`] when no reliable fit
    /// exists.
    pub fn tail_mass(&self, t: f64) -> Result<f64> {
        if let Some(m) = self.monotone_exponentials() {
            return Ok(m.iter().map(|m| m.amplitude.abs() * (-m.rate * t.max(0.0)).exp() / m.rate).sum());
        }
        match &self.repr {
            Repr::Sampled(s) => {
                let fit = s.tail.ok_or_else(|| {
                    Error::Inconclusive("sampled response has no reliable exponential tail fit".into())
                })?;
                let end = s.end();
                let beyond = fit.amplitude * (-fit.rate * end.max(t)).exp() / fit.rate;
                if t >= end {
                    return Ok(beyond);
                }
                let (times, values) = s.window(t, end);
                let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
                Ok(trapezoid(&times, &abs) + beyond)
            }
            _ => {
                let env = self.envelope().expect("analytic response has an envelope");
                Ok(self.abs_integral_from(|s| self.value(s), env, t))
            }
        }
    }

    /// `∫_0^τ g²`.
    pub fn l2_squared(&self, tau: f64) -> Quadrature {
        match &self.repr {
            Repr::Sampled(s) => {
                let (times, values) = s.window(0.0, tau);
                let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
                Quadrature {
                    value: trapezoid(&times, &sq),
                    error: 0.0,
                }
            }
            _ => integrate(|t| self.value(t).powi(2), 0.0, tau, quad_opts(self.panels(0.0, tau))),
        }
    }

    /// `Re ĝ(jω) = ∫_0^∞ g(t)cos(ωt) dt` truncated at `t_max`, with the
    /// quadrature error estimate.
    fn real_transform(&self, omega: f64, t_max: f64) -> Quadrature {
        match &self.repr {
            Repr::Sampled(s) => {
                let (times, values) = s.window(0.0, t_max);
                let f: Vec<f64> = times.iter().zip(&values).map(|(t, v)| v * (omega * t).cos()).collect();
                Quadrature {
                    value: trapezoid(&times, &f),
                    error: 0.0,
                }
            }
            _ => {
                let panels = self.panels(0.0, t_max) + (t_max * omega.abs() / PI).ceil() as usize;
                integrate(|t| self.value(t) * (omega * t).cos(), 0.0, t_max, quad_opts(panels))
            }
        }
    }
}

impl SampledResponse {
    fn end(&self) -> f64 {
        *self.times.last().expect("non-empty samples")
    }

    fn locate(&self, t: f64) -> usize {
        match self.times.binary_search_by(|x| x.partial_cmp(&t).expect("finite")) {
            Ok(i) => i.min(self.times.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.times.len() - 2),
        }
    }

    fn interpolate(&self, t: f64) -> f64 {
        if t > self.end() {
            return self.tail.map_or(0.0, |f| {
                let last = *self.values.last().expect("non-empty");
                last * (-f.rate * (t - self.end())).exp()
            });
        }
        let i = self.locate(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let w = (t - t0) / (t1 - t0);
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    fn slope(&self, t: f64) -> f64 {
        if t > self.end() {
            return -self.tail.map_or(0.0, |f| f.rate) * self.interpolate(t);
        }
        let i = self.locate(t);
        (self.values[i + 1] - self.values[i]) / (self.times[i + 1] - self.times[i])
    }

    /// Sample points on `[a, b]` with interpolated endpoints.
    fn window(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let mut times = vec![a];
        let mut values = vec![self.interpolate(a)];
        for (t, v) in self.times.iter().zip(&self.values) {
            if *t > a && *t < b {
                times.push(*t);
                values.push(*v);
            }
        }
        times.push(b);
        values.push(self.interpolate(b));
        (times, values)
    }
}

/// Least-squares fit of `ln|g|` on the last tenth of the sample span.
fn fit_tail(times: &[f64], values: &[f64]) -> Option<TailFit> {
    let end = *times.last()?;
    let start = 0.9 * end;
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= start).collect();
    if idx.len() < 3 {
        return None;
    }
    let sign = values[idx[0]].signum();
    if idx.iter().any(|&i| values[i] == 0.0 || values[i].signum() != sign) {
        return None;
    }
    let xs: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| values[i].abs().ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let rate = -slope;
    if !(rate > 0.0) || syy == 0.0 {
        return None;
    }
    let r_squared = sxy * sxy / (sxx * syy);
    if r_squared < TAIL_FIT_MIN_R2 {
        return None;
    }
    let amplitude = idx
        .iter()
        .map(|&i| values[i].abs() * (rate * times[i]).exp())
        .fold(0.0, f64::max);
    Some(TailFit {
        rate,
        amplitude,
        r_squared,
        window_start: start,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrVerdict {
    Positive,
    NotPositive,
    Inconclusive,
}

/// Result of the positive-real test on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveRealReport {
    pub verdict: PrVerdict,
    pub min_real_part: f64,
    pub argmin_omega: f64,
    /// `δ(T_max)`, bounding the neglected part of every transform value.
    pub tail_bound: f64,
    pub quadrature_error: f64,
    pub t_max: f64,
    pub real_parts: Vec<(f64, f64)>,
    pub reason: Option<String>,
}

impl PositiveRealReport {
    pub fn is_positive_real(&self) -> bool {
        self.verdict == PrVerdict::Positive
    }
}

/// Evaluates `Re ĝ(jω)` on `omegas` and compares the minimum with the
/// truncation bound.
///
/// Analytic responses are integrated up to where the tail mass is below
/// `resolution / 2`. Sampled responses stop at their last sample; if the
/// tail mass there exceeds `resolution`, or no tail fit exists, the
/// verdict is [`PrVerdict::Inconclusive`].
pub fn check_positive_real(g: &ImpulseResponse, omegas: &[f64], resolution: f64) -> Result<PositiveRealReport> {
    if omegas.is_empty() {
        return Err(Error::InvalidParameter("empty frequency grid".into()));
    }
    if !(resolution > 0.0) {
        return Err(Error::InvalidParameter("resolution must be positive".into()));
    }
    let inconclusive = |reason: String, t_max: f64, tail: f64| PositiveRealReport {
        verdict: PrVerdict::Inconclusive,
        min_real_part: f64::NAN,
        argmin_omega: f64::NAN,
        tail_bound: tail,
        quadrature_error: f64::NAN,
        t_max,
        real_parts: Vec::new(),
        reason: Some(reason),
    };
    let (t_max, tail_bound) = match g.sample_horizon() {
        Some(end) => match g.tail_mass(end) {
            Ok(tail) if tail <= resolution => (end, tail),
            Ok(tail) => {
                return Ok(inconclusive(
                    format!("tail mass {tail:e} beyond the last sample exceeds resolution {resolution:e}"),
                    end,
                    tail,
                ))
            }
            Err(e) => return Ok(inconclusive(e.to_string(), end, f64::NAN)),
        },
        None => {
            let target = 0.5 * resolution;
            let mut t = 1.0;
            while g.tail_mass(t)? > target {
                t *= 2.0;
                if t > 1e9 {
                    return Ok(inconclusive("tail mass does not decay".into(), t, f64::NAN));
                }
            }
            (t, g.tail_mass(t)?)
        }
    };
    let quads: Vec<Quadrature> = map_indexed(omegas.len(), |i| g.real_transform(omegas[i], t_max));
    let real_parts: Vec<(f64, f64)> = omegas.iter().zip(&quads).map(|(w, q)| (*w, q.value)).collect();
    let quadrature_error = quads.iter().map(|q| q.error).fold(0.0, f64::max);
    let (argmin_omega, min_real_part) = real_parts
        .iter()
        .copied()
        .fold((f64::NAN, f64::INFINITY), |acc, (w, v)| if v < acc.1 { (w, v) } else { acc });
    let verdict = if min_real_part >= -(tail_bound + quadrature_error) {
        PrVerdict::Positive
    } else {
        PrVerdict::NotPositive
    };
    Ok(PositiveRealReport {
        verdict,
        min_real_part,
        argmin_omega,
        tail_bound,
        quadrature_error,
        t_max,
        real_parts,
        reason: None,
    })
}

/// Cosine coefficients `a_0..a_N` of `g` on `[0, τ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients {
    pub tau: f64,
    pub coeffs: Vec<f64>,
    /// Largest quadrature error estimate over the coefficients.
    pub max_error: f64,
}

impl FourierCoefficients {
    /// `‖g_{N,τ}‖²_{L2[0,τ]} = (τ/4)a_0² + (τ/2)Σ_{k≥1} a_k²`.
    pub fn parseval_norm_squared(&self) -> f64 {
        parseval(self.tau, &self.coeffs)
    }

    /// `g_{N,τ}(t) = a_0/2 + Σ a_k cos(kπt/τ)`.
    pub fn series(&self, t: f64) -> f64 {
        series_value(self.tau, &self.coeffs, t)
    }
}

fn parseval(tau: f64, coeffs: &[f64]) -> f64 {
    let mut terms: Vec<f64> = coeffs.iter().skip(1).map(|a| 0.5 * tau * a * a).collect();
    if let Some(a0) = coeffs.first() {
        terms.insert(0, 0.25 * tau * a0 * a0);
    }
    pairwise_sum(&terms)
}

fn series_value(tau: f64, coeffs: &[f64], t: f64) -> f64 {
    let Some((a0, rest)) = coeffs.split_first() else {
        return 0.0;
    };
    let w = PI * t / tau;
    0.5 * a0 + rest.iter().enumerate().map(|(i, a)| a * ((i + 1) as f64 * w).cos()).sum::<f64>()
}

fn coefficient(g: &ImpulseResponse, tau: f64, k: usize) -> Quadrature {
    let w = k as f64 * PI / tau;
    let q = match &g.repr {
        Repr::Sampled(s) => {
            let (times, values) = s.window(0.0, tau);
            let f: Vec<f64> = times.iter().zip(&values).map(|(t, v)| v * (w * t).cos()).collect();
            let fine = trapezoid(&times, &f);
            // Every other sample gives a coarse estimate for the error.
            let coarse_t: Vec<f64> = times.iter().step_by(2).copied().collect();
            let coarse_f: Vec<f64> = f.iter().step_by(2).copied().collect();
            let coarse = if coarse_t.last() == times.last() {
                trapezoid(&coarse_t, &coarse_f)
            } else {
                fine
            };
            Quadrature {
                value: fine,
                error: (fine - coarse).abs() / 3.0,
            }
        }
        _ => {
            let panels = g.panels(0.0, tau) + k;
            integrate(|t| g.value(t) * (w * t).cos(), 0.0, tau, quad_opts(panels))
        }
    };
    Quadrature {
        value: 2.0 / tau * q.value,
        error: 2.0 / tau * q.error,
    }
}

/// `a_k = (2/τ)∫_0^τ g(t)cos(kπt/τ) dt` for `k = 0..=N`, by adaptive
/// quadrature for analytic responses and the trapezoid rule on samples.
pub fn fourier_coeffs(g: &ImpulseResponse, tau: f64, harmonics: usize) -> Result<FourierCoefficients> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("recurrence time must be > 0, got {tau}")));
    }
    if let Some(end) = g.sample_horizon() {
        if end < tau {
            return Err(Error::InvalidGrid(format!("samples end at {end}, before τ = {tau}")));
        }
    }
    let quads = map_indexed(harmonics + 1, |k| coefficient(g, tau, k));
    Ok(FourierCoefficients {
        tau,
        coeffs: quads.iter().map(|q| q.value).collect(),
        max_error: quads.iter().map(|q| q.error).fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    /// Smallest acceptable recurrence time; enlarged as needed.
    pub requested_horizon: f64,
    pub max_harmonics: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            requested_horizon: 1.0,
            max_harmonics: DEFAULT_MAX_HARMONICS,
        }
    }
}

/// Certified lossless approximation data.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproximationCertificate {
    pub epsilon: f64,
    pub tau: f64,
    pub harmonics: usize,
    pub coeffs: Vec<f64>,
    /// Indices with `a_k < 0`; zero coefficients stay in `g⁺`.
    pub negative_set: Vec<usize>,
    pub sup_norm: f64,
    pub derivative_l1: f64,
    pub c_value: f64,
    pub delta_tau: f64,
    /// `‖g − g_{N,τ}‖_{L2[0,τ]}` from the Parseval residual.
    pub truncation_error: f64,
    /// `Σ_{k∈negative_set} w_k a_k²` with `w_0 = τ/4`, `w_k = τ/2`.
    pub negative_mass: f64,
    /// `‖g − g⁺_{N,τ}‖_{L2[0,τ]}` by direct quadrature.
    pub achieved_error: f64,
    pub coefficient_error: f64,
}

/// One inequality of a certificate with both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl ApproximationCertificate {
    /// `g⁺_{N,τ}(t)`: the series without the negative coefficients.
    pub fn positive_part(&self, t: f64) -> f64 {
        series_value(self.tau, &self.positive_coeffs(), t)
    }

    pub fn positive_coeffs(&self) -> Vec<f64> {
        self.coeffs.iter().map(|a| a.max(0.0)).collect()
    }

    /// The four defining inequalities, recomputed from the stored values.
    pub fn checks(&self) -> Vec<CertificateCheck> {
        let e2 = self.epsilon * self.epsilon;
        let row = |name, lhs: f64, rhs: f64| CertificateCheck {
            name,
            lhs,
            rhs,
            holds: lhs <= rhs,
        };
        vec![
            row(
                "tail mass δ(τ) <= ε²/(8C)",
                self.delta_tau,
                if self.c_value > 0.0 { e2 / (8.0 * self.c_value) } else { f64::INFINITY },
            ),
            row("truncation error <= ε/2", self.truncation_error, 0.5 * self.epsilon),
            row("negative mass <= ε²/4", self.negative_mass, 0.25 * e2),
            row("achieved error <= ε", self.achieved_error, self.epsilon),
        ]
    }

    pub fn holds(&self) -> bool {
        self.checks().iter().all(|c| c.holds)
    }

    /// Lossless realization of `g⁺`: harmonic `k` rotates at `kπ/τ` with
    /// gain `√a_k`, the constant state carries `√(a_0/2)`.
    pub fn realization(&self) -> Result<LosslessSystem> {
        let omega0 = PI / self.tau;
        let harmonics: Vec<(usize, f64)> = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, a)| **a >= 0.0)
            .map(|(k, a)| (k, *a))
            .collect();
        let constant = self.coeffs.first().map_or(0.0, |a0| 0.5 * a0.max(0.0));
        cosine_series_system(omega0, &harmonics, constant)
    }
}

/// Certificate together with its lossless realization.
#[derive(Debug, Clone)]
pub struct Certified {
    pub certificate: ApproximationCertificate,
    pub system: LosslessSystem,
}

/// Smallest `τ ≥ start` (to relative `1e-9`) with `δ(τ) ≤ target`.
fn choose_tau(g: &ImpulseResponse, start: f64, target: f64) -> Result<(f64, f64)> {
    let d0 = g.tail_mass(start)?;
    if d0 <= target {
        return Ok((start, d0));
    }
    let mut lo = start;
    let mut hi = start.max(1.0) * 2.0;
    let mut dh = g.tail_mass(hi)?;
    while dh > target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::ResourceLimit("tail mass does not fall below target".into()));
        }
        dh = g.tail_mass(hi)?;
    }
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        let dm = g.tail_mass(mid)?;
        if dm <= target {
            hi = mid;
            dh = dm;
        } else {
            lo = mid;
        }
    }
    Ok((hi, dh))
}

/// Builds a lossless approximation of `g` with certified `L2[0,τ]` error `ε`.
///
/// `τ` starts from the requested horizon and grows until
/// `δ(τ) ≤ ε²/(8C)`. `N` is the smallest truncation whose Parseval residual
/// is at most `ε²/4`. The negative coefficients are dropped and the
/// remainder is realized as a lossless system. Fails with
/// [`Error::CertificationFailed`] when the dropped mass or the final error
/// is too large, as happens for non-dissipative `g`.
pub fn build_certificate(g: &ImpulseResponse, epsilon: f64, options: &CertifyOptions) -> Result<Certified> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("ε must be > 0, got {epsilon}")));
    }
    if !(options.requested_horizon > 0.0) {
        return Err(Error::InvalidParameter("requested horizon must be > 0".into()));
    }
    let e2 = epsilon * epsilon;
    let sup_norm = g.sup_norm();
    let derivative_l1 = g.derivative_l1();
    let c_value = 2.0 / PI * (sup_norm + derivative_l1);
    let target = if c_value > 0.0 { e2 / (8.0 * c_value) } else { f64::INFINITY };
    let (tau, delta_tau) = choose_tau(g, options.requested_horizon, target)?;
    if let Some(end) = g.sample_horizon() {
        if tau > end {
            return Err(Error::Inconclusive(format!(
                "recurrence time {tau} needed for the tail bound exceeds the sample range {end}"
            )));
        }
    }

    let norm2 = g.l2_squared(tau).value;
    let residual_target = 0.25 * e2;
    let mut coeffs: Vec<f64> = Vec::new();
    let mut coefficient_error: f64 = 0.0;
    let mut captured = 0.0;
    let mut harmonics = None;
    const BATCH: usize = 64;
    'search: while coeffs.len() <= options.max_harmonics {
        let start = coeffs.len();
        let count = BATCH.min(options.max_harmonics + 1 - start);
        let batch = map_indexed(count, |i| coefficient(g, tau, start + i));
        for (i, q) in batch.into_iter().enumerate() {
            let k = start + i;
            captured += if k == 0 { 0.25 } else { 0.5 } * tau * q.value * q.value;
            coefficient_error = coefficient_error.max(q.error);
            coeffs.push(q.value);
            if norm2 - captured <= residual_target {
                harmonics = Some(k);
                break 'search;
            }
        }
    }
    let Some(harmonics) = harmonics else {
        return Err(Error::ResourceLimit(format!(
            "truncation error still {:e} at N = {} (cap); τ = {tau}, C = {c_value}",
            (norm2 - captured).max(0.0).sqrt(),
            options.max_harmonics
        )));
    };
    let truncation_error = (norm2 - parseval(tau, &coeffs)).max(0.0).sqrt();
    let negative_set: Vec<usize> = (0..coeffs.len()).filter(|&k| coeffs[k] < 0.0).collect();
    let negative_mass = pairwise_sum(
        &negative_set
            .iter()
            .map(|&k| if k == 0 { 0.25 } else { 0.5 } * tau * coeffs[k] * coeffs[k])
            .collect::<Vec<_>>(),
    );
    let positive: Vec<f64> = coeffs.iter().map(|a| a.max(0.0)).collect();
    let achieved_error = match &g.repr {
        Repr::Sampled(s) => {
            let (times, values) = s.window(0.0, tau);
            let d: Vec<f64> = times
                .iter()
                .zip(&values)
                .map(|(t, v)| (v - series_value(tau, &positive, *t)).powi(2))
                .collect();
            trapezoid(&times, &d).sqrt()
        }
        _ => {
            let panels = g.panels(0.0, tau) + 2 * harmonics;
            integrate(|t| (g.value(t) - series_value(tau, &positive, t)).powi(2), 0.0, tau, quad_opts(panels))
                .value
                .max(0.0)
                .sqrt()
        }
    };
    let certificate = ApproximationCertificate {
        epsilon,
        tau,
        harmonics,
        coeffs,
        negative_set,
        sup_norm,
        derivative_l1,
        c_value,
        delta_tau,
        truncation_error,
        negative_mass,
        achieved_error,
        coefficient_error,
    };
    if let Some(failed) = certificate.checks().into_iter().find(|c| !c.holds) {
        return Err(Error::CertificationFailed {
            inequality: failed.name.to_string(),
            lhs: failed.lhs,
            rhs: failed.rhs,
        });
    }
    let system = certificate.realization()?;
    Ok(Certified { certificate, system })
}

/// The two-regime estimate on the negative coefficients.
///
/// Below `K = ⌊4C²τ/ε²⌋` each negative coefficient is at least
/// `−ε²/(4Cτ)`; above it `|a_k| ≤ C/k`. Together these bound the dropped
/// mass by `(K+1)(τ/2)(ε²/(4Cτ))² + (τ/2)C²/K`.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeTailRegimes {
    pub split_index: usize,
    pub coefficient_floor: f64,
    pub low_mass: f64,
    pub high_mass: f64,
    pub low_bound: f64,
    pub high_bound: f64,
    /// `a_k ≥ −ε²/(4Cτ)` for every computed `k ≤ K`.
    pub floor_holds: bool,
    /// `|a_k| ≤ C/k` for every computed `k ≥ 1`.
    pub decay_holds: bool,
}

impl NegativeTailRegimes {
    pub fn holds(&self) -> bool {
        self.floor_holds && self.decay_holds && self.low_mass <= self.low_bound && self.high_mass <= self.high_bound
    }
}

pub fn negative_tail_regimes(cert: &ApproximationCertificate) -> NegativeTailRegimes {
    let (c, tau, e2) = (cert.c_value, cert.tau, cert.epsilon * cert.epsilon);
    let split = if c > 0.0 {
        (4.0 * c * c * tau / e2).floor() as usize
    } else {
        0
    };
    let floor = if c > 0.0 { -e2 / (4.0 * c * tau) } else { 0.0 };
    let weight = |k: usize| if k == 0 { 0.25 * tau } else { 0.5 * tau };
    let mut low = Vec::new();
    let mut high = Vec::new();
    for &k in &cert.negative_set {
        let m = weight(k) * cert.coeffs[k] * cert.coeffs[k];
        if k <= split {
            low.push(m);
        } else {
            high.push(m);
        }
    }
    let floor_holds = cert.coeffs.iter().take(split + 1).all(|a| *a >= floor - cert.coefficient_error);
    let decay_holds = cert
        .coeffs
        .iter()
        .enumerate()
        .skip(1)
        .all(|(k, a)| a.abs() <= c / k as f64 + cert.coefficient_error);
    let low_bound = (split + 1) as f64 * 0.5 * tau * floor * floor;
    let high_bound = if split > 0 { 0.5 * tau * c * c / split as f64 } else { f64::INFINITY };
    NegativeTailRegimes {
        split_index: split,
        coefficient_floor: floor,
        low_mass: pairwise_sum(&low),
        high_mass: pairwise_sum(&high),
        low_bound,
        high_bound,
        floor_holds,
        decay_holds,
    }
}

/// `u(t) = Σ_m c_m (1 − cos(mπt/T))` on `[0, T]`: smooth, `u(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineInput {
    pub horizon: f64,
    pub coefficients: Vec<f64>,
}

impl CosineInput {
    pub fn value(&self, t: f64) -> f64 {
        let w = PI * t / self.horizon;
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| c * (1.0 - ((i + 1) as f64 * w).cos()))
            .sum()
    }

    fn derivative(&self, t: f64) -> f64 {
        let w0 = PI / self.horizon;
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let w = (i + 1) as f64 * w0;
                c * w * (w * t).sin()
            })
            .sum()
    }

    fn second_derivative(&self, t: f64) -> f64 {
        let w0 = PI / self.horizon;
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let w = (i + 1) as f64 * w0;
                c * w * w * (w * t).cos()
            })
            .sum()
    }

    pub fn signal(&self) -> InputSignal {
        let (a, b, c) = (self.clone(), self.clone(), self.clone());
        InputSignal::closed_form(
            "cosine-family",
            move |t| a.value(t),
            move |t| b.derivative(t),
            move |t| c.second_derivative(t),
        )
        .on_horizon(self.horizon)
    }

    fn panels(&self) -> usize {
        4 + 2 * self.coefficients.len()
    }

    pub fn l1_norm(&self) -> f64 {
        integrate(|t| self.value(t).abs(), 0.0, self.horizon, quad_opts(self.panels())).value
    }

    pub fn l2_norm(&self) -> f64 {
        integrate(|t| self.value(t).powi(2), 0.0, self.horizon, quad_opts(self.panels()))
            .value
            .sqrt()
    }
}

/// `∫_a^b f` as a sum over the pieces cut by the sorted `interior` points.
/// With no interior points this is one adaptive integral on `panels`.
fn integrate_pieces(f: impl Fn(f64) -> f64, a: f64, b: f64, interior: &[f64], panels: usize) -> f64 {
    if interior.is_empty() {
        return integrate(f, a, b, quad_opts(panels)).value;
    }
    let mut total = 0.0;
    let mut lo = a;
    for &x in interior.iter().chain(std::iter::once(&b)) {
        if x > lo {
            total += integrate(&f, lo, x, quad_opts(1)).value;
            lo = x;
        }
    }
    total
}

/// `∫_0^L cos(k s + φ) ds`.
fn cos_integral(k: f64, phi: f64, len: f64) -> f64 {
    if k == 0.0 {
        len * phi.cos()
    } else {
        ((k * len + phi).sin() - phi.sin()) / k
    }
}

impl CosineInput {
    /// Windowed autocorrelation `Φ(r) = ∫_0^{T−r} u(s) u(s+r) ds`, in
    /// closed form; zero outside `[0, T]`.
    pub fn autocorrelation(&self, r: f64) -> f64 {
        if !(0.0..=self.horizon).contains(&r) {
            return 0.0;
        }
        let len = self.horizon - r;
        let w0 = PI / self.horizon;
        let total: f64 = self.coefficients.iter().sum();
        let mut acc = total * total * len;
        for (i, &ci) in self.coefficients.iter().enumerate() {
            let wi = (i + 1) as f64 * w0;
            acc -= total * ci * (cos_integral(wi, wi * r, len) + cos_integral(wi, 0.0, len));
            for (j, &cj) in self.coefficients.iter().enumerate() {
                let wj = (j + 1) as f64 * w0;
                let phi = wj * r;
                acc += 0.5 * ci * cj * (cos_integral(wi + wj, phi, len) + cos_integral(wi - wj, -phi, len));
            }
        }
        acc
    }
}

/// `(g * u)(t) = ∫_0^t g(t − s) u(s) ds`.
fn convolve(g: &ImpulseResponse, u: &CosineInput, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let mut kinks: Vec<f64> = g.knots(0.0, t).into_iter().map(|k| t - k).collect();
    kinks.reverse();
    let panels = 2 + g.panels(0.0, t) + u.panels();
    integrate_pieces(|s| g.value(t - s) * u.value(s), 0.0, t, &kinks, panels)
}

/// `∫_0^T (g * u)(t) u(t) dt`, evaluated as `∫_0^T g(r) Φ(r) dr` with the
/// closed-form autocorrelation `Φ` of the input.
pub fn supplied_energy(g: &ImpulseResponse, u: &CosineInput) -> f64 {
    let panels = 2 + g.panels(0.0, u.horizon) + u.panels();
    let knots = g.knots(0.0, u.horizon);
    integrate_pieces(|r| g.value(r) * u.autocorrelation(r), 0.0, u.horizon, &knots, panels)
}

/// Energy accounting of a lossless candidate driven from rest.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateCheck {
    /// `∫_0^T y_c u dt`, extrapolated from two grids.
    pub supplied_energy: f64,
    /// `½‖x(T)‖²`, extrapolated from the same two grids.
    pub stored_energy: f64,
    /// `|supplied − stored|`.
    pub defect: f64,
    /// `‖y_c − g * u‖_{L2[0,T]}` for the witness input, when one exists.
    pub output_mismatch: Option<f64>,
    /// `(K₁ + E_c)/K₃`.
    pub mismatch_lower_bound: Option<f64>,
    /// `‖g_c − g‖_{L2[0,T]}`.
    pub impulse_distance: Option<f64>,
    /// `(K₁ + E_c)/(K₂K₃)`.
    pub impulse_distance_lower_bound: Option<f64>,
}

/// An input that extracts energy from `g`: `∫ y u = −K₁ < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub input: CosineInput,
    /// `K₁ = −∫_0^T (g * u) u dt`.
    pub extracted: f64,
    /// `K₂ = ‖u‖_{L1[0,T]}`.
    pub l1_norm: f64,
    /// `K₃ = ‖u‖_{L2[0,T]}`.
    pub l2_norm: f64,
    pub trial: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FalsifierOptions {
    pub horizon: f64,
    pub budget: usize,
    /// Number of cosine terms in the random inputs.
    pub terms: usize,
    pub seed: u64,
    /// Grid points for the candidate simulations (the finer grid has
    /// twice as many intervals).
    pub grid_points: usize,
}

impl Default for FalsifierOptions {
    fn default() -> Self {
        Self {
            horizon: 2.0,
            budget: 1000,
            terms: 4,
            seed: 0,
            grid_points: 2001,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FalsifierReport {
    pub family: String,
    pub tried: usize,
    pub witness: Option<Witness>,
    /// The input used for the candidate checks: the witness, or the first
    /// input of the family when none was found.
    pub probe: CosineInput,
    pub candidates: Vec<CandidateCheck>,
}

fn family_input(options: &FalsifierOptions, trial: usize) -> CosineInput {
    let coefficients = if trial == 0 {
        vec![1.0]
    } else {
        let mut rng = trial_rng(options.seed, trial);
        (0..options.terms.max(1)).map(|_| StandardNormal.sample(&mut rng)).collect()
    };
    CosineInput {
        horizon: options.horizon,
        coefficients,
    }
}

fn run_candidate(sys: &LosslessSystem, u: &CosineInput, intervals: usize) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let grid = TimeGrid::uniform(0.0, u.horizon, intervals + 1)?;
    let traj = simulate(sys, &u.signal(), &DVector::zeros(sys.dim()), &grid)?;
    let stored = 0.5 * traj.final_state().norm_squared();
    Ok((traj.times, traj.outputs, stored))
}

fn check_candidate(
    g: &ImpulseResponse,
    sys: &LosslessSystem,
    u: &CosineInput,
    witness: Option<&Witness>,
    intervals: usize,
) -> Result<CandidateCheck> {
    let coarse = run_candidate(sys, u, intervals)?;
    let fine = run_candidate(sys, u, 2 * intervals)?;
    let supplied_of = |(times, outputs, _): &(Vec<f64>, Vec<f64>, f64)| {
        let f: Vec<f64> = times.iter().zip(outputs).map(|(t, y)| y * u.value(*t)).collect();
        trapezoid(times, &f)
    };
    // Both quantities carry second-order grid errors; extrapolate them away.
    let supplied = (4.0 * supplied_of(&fine) - supplied_of(&coarse)) / 3.0;
    let stored = (4.0 * fine.2 - coarse.2) / 3.0;
    let mut check = CandidateCheck {
        supplied_energy: supplied,
        stored_energy: stored,
        defect: (supplied - stored).abs(),
        output_mismatch: None,
        mismatch_lower_bound: None,
        impulse_distance: None,
        impulse_distance_lower_bound: None,
    };
    if let Some(w) = witness {
        let (times, outputs, _) = &coarse;
        let reference: Vec<f64> = map_indexed(times.len(), |i| convolve(g, u, times[i]));
        let sq: Vec<f64> = outputs.iter().zip(&reference).map(|(a, b)| (a - b).powi(2)).collect();
        let gap = w.extracted + supplied.max(0.0);
        check.output_mismatch = Some(trapezoid(times, &sq).sqrt());
        check.mismatch_lower_bound = Some(gap / w.l2_norm);
        let panels = 8 + ((u.horizon * sys.max_frequency().max(g.frequency())) / PI).ceil() as usize;
        let dist = integrate(|t| (sys.impulse_response(t) - g.value(t)).powi(2), 0.0, u.horizon, quad_opts(panels));
        check.impulse_distance = Some(dist.value.max(0.0).sqrt());
        check.impulse_distance_lower_bound = Some(gap / (w.l1_norm * w.l2_norm));
    }
    Ok(check)
}

/// Searches the cosine input family for an input with `∫_0^T y·u dt < 0`
/// under `g`, trying `1 − cos(πt/T)` first and then random combinations.
///
/// Every candidate is driven from rest by the witness (or by the first
/// family member when there is none) and its supplied energy is compared
/// with the stored energy `½‖x(T)‖²`.
pub fn falsify_if_direction(
    g: &ImpulseResponse,
    candidates: &[&LosslessSystem],
    options: &FalsifierOptions,
) -> Result<FalsifierReport> {
    if !(options.horizon > 0.0) || options.budget == 0 || options.grid_points < 3 {
        return Err(Error::InvalidParameter("falsifier needs horizon > 0, budget >= 1, grid_points >= 3".into()));
    }
    let mut witness = None;
    let mut tried = 0;
    const BATCH: usize = 32;
    while tried < options.budget && witness.is_none() {
        let count = BATCH.min(options.budget - tried);
        let base = tried;
        let energies = map_indexed(count, |i| {
            let u = family_input(options, base + i);
            (supplied_energy(g, &u), u)
        });
        for (i, (e, u)) in energies.into_iter().enumerate() {
            tried = base + i + 1;
            if e < 0.0 {
                witness = Some(Witness {
                    l1_norm: u.l1_norm(),
                    l2_norm: u.l2_norm(),
                    input: u,
                    extracted: -e,
                    trial: base + i,
                });
                break;
            }
        }
    }
    let probe = witness.as_ref().map_or_else(|| family_input(options, 0), |w| w.input.clone());
    let intervals = options.grid_points - 1;
    let candidates = candidates
        .iter()
        .map(|sys| check_candidate(g, sys, &probe, witness.as_ref(), intervals))
        .collect::<Result<Vec<_>>>()?;
    Ok(FalsifierReport {
        family: format!(
            "u(t) = sum_m c_m (1 - cos(m pi t / T)), T = {}, m = 1..{}, c ~ N(0,1) after c = (1)",
            options.horizon,
            options.terms.max(1)
        ),
        tried,
        witness,
        probe,
        candidates,
    })
}
