//! Lossless/causal linear systems `ẋ = Jx + Bu, y = Bᵀx` with `J = −Jᵀ`,
//! their internal energy `U = ½xᵀx`, the work rate `y·u` and deterministic
//! simulation.
//!
//! Simulation uses an exact first-order-hold discretisation: between grid
//! points the input is taken to be linear and the state transition is
//! integrated exactly. When the generator decouples into independent 2×2
//! rotation blocks (as the harmonic realizations do) each block is advanced
//! with closed-form `cos`/`sin` factors; otherwise the step map comes from a
//! scaling-and-squaring matrix exponential of an augmented generator.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::{cumulative_trapezoid, CubicSpline};

/// Entrywise tolerance on `J + Jᵀ` accepted by [`make_lossless`].
pub const SKEW_TOLERANCE: f64 = 1e-12;

/// Largest dimension for which the controllability rank test runs.
pub const CONTROLLABILITY_MAX_DIM: usize = 50;

/// Minimum grid points per shortest oscillation period before a driven
/// simulation warns about resolution.
pub const POINTS_PER_PERIOD: f64 = 20.0;

/// One decoupled 2×2 block: `ẋ_first = ω x_second`, `ẋ_second = −ω x_first`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RotationPair {
    pub first: usize,
    pub second: usize,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Structure {
    /// Generator is a direct sum of rotation blocks and zero rows.
    Rotations { pairs: Vec<RotationPair>, fixed: Vec<usize> },
    Dense,
}

impl Structure {
    /// Exact structural detection: every row holds at most one nonzero
    /// entry and the partner entry is its exact negative.
    pub(crate) fn detect(a: &DMatrix<f64>) -> Structure {
        let n = a.nrows();
        let mut partner = vec![None; n];
        for i in 0..n {
            let mut found = None;
            for j in 0..n {
                if a[(i, j)] != 0.0 {
                    if found.is_some() || i == j {
                        return Structure::Dense;
                    }
                    found = Some(j);
                }
            }
            partner[i] = found;
        }
        let mut pairs = Vec::new();
        let mut fixed = Vec::new();
        for i in 0..n {
            match partner[i] {
                None => fixed.push(i),
                Some(j) => {
                    if partner[j] != Some(i) || a[(j, i)] != -a[(i, j)] {
                        return Structure::Dense;
                    }
                    if i < j {
                        pairs.push(RotationPair { first: i, second: j, omega: a[(i, j)] });
                    }
                }
            }
        }
        Structure::Rotations { pairs, fixed }
    }
}

/// `ẋ = Ax + bu` with cached structure; shared by lossless and noisy models.
#[derive(Debug, Clone)]
pub(crate) struct Dynamics {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub structure: Structure,
}

impl Dynamics {
    pub(crate) fn new(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        let structure = Structure::detect(&a);
        Self { a, b, structure }
    }

    pub(crate) fn dim(&self) -> usize {
        self.b.len()
    }

    /// `e^{At} x`.
    pub(crate) fn propagate(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        match &self.structure {
            Structure::Rotations { pairs, .. } => {
                let mut out = x.clone();
                for p in pairs {
                    let (c, s) = ((p.omega * t).cos(), (p.omega * t).sin());
                    let (u, v) = (x[p.first], x[p.second]);
                    out[p.first] = c * u + s * v;
                    out[p.second] = -s * u + c * v;
                }
                out
            }
            Structure::Dense => {
                if self.dim() == 0 {
                    return x.clone();
                }
                (&self.a * t).exp() * x
            }
        }
    }

    pub(crate) fn transition(&self, t: f64) -> DMatrix<f64> {
        match &self.structure {
            Structure::Rotations { .. } => {
                let n = self.dim();
                let mut m = DMatrix::zeros(n, n);
                for i in 0..n {
                    let mut e = DVector::zeros(n);
                    e[i] = 1.0;
                    m.set_column(i, &self.propagate(&e, t));
                }
                m
            }
            Structure::Dense => {
                if self.dim() == 0 {
                    return DMatrix::zeros(0, 0);
                }
                (&self.a * t).exp()
            }
        }
    }
}

/// `∫₀ʰ e^{cr} dr` and `∫₀ʰ r e^{cr} dr` for complex `c`.
fn hold_integrals(c: Complex64, h: f64) -> (Complex64, Complex64) {
    let z = c * h;
    if z.norm() < 0.5 {
        // Series: I0 = h Σ zⁿ/(n+1)!, I1 = h² Σ zⁿ/(n!(n+2)).
        let mut i0 = Complex64::new(0.0, 0.0);
        let mut i1 = Complex64::new(0.0, 0.0);
        let mut power_over_fact = Complex64::new(1.0, 0.0);
        for n in 0..30 {
            let nf = n as f64;
            i0 += power_over_fact / (nf + 1.0);
            i1 += power_over_fact / (nf + 2.0);
            power_over_fact = power_over_fact * z / (nf + 1.0);
        }
        (i0 * h, i1 * h * h)
    } else {
        let ez = z.exp();
        let i0 = (ez - 1.0) / c;
        let i1 = (ez * (z - 1.0) + 1.0) / (c * c);
        (i0, i1)
    }
}

/// One first-order-hold step of fixed length `h`:
/// `x⁺ = Φx + g₀u₀ + g₁u₁`.
#[derive(Debug, Clone)]
pub(crate) enum StepMap {
    Rotations {
        pairs: Vec<RotationPair>,
        phase: Vec<Complex64>,
        drive0: Vec<Complex64>,
        drive1: Vec<Complex64>,
        fixed: Vec<(usize, f64)>,
    },
    Dense {
        phi: DMatrix<f64>,
        g0: DVector<f64>,
        g1: DVector<f64>,
    },
}

impl StepMap {
    pub(crate) fn new(dynamics: &Dynamics, h: f64) -> Self {
        match &dynamics.structure {
            Structure::Rotations { pairs, fixed } => {
                let b = &dynamics.b;
                let mut phase = Vec::with_capacity(pairs.len());
                let mut drive0 = Vec::with_capacity(pairs.len());
                let mut drive1 = Vec::with_capacity(pairs.len());
                for p in pairs {
                    // z = x_first + i x_second obeys ż = −iωz + βu.
                    let c = Complex64::new(0.0, -p.omega);
                    let beta = Complex64::new(b[p.first], b[p.second]);
                    let (i0, i1) = hold_integrals(c, h);
                    phase.push((c * h).exp());
                    drive0.push(beta * i1 / h);
                    drive1.push(beta * (i0 - i1 / h));
                }
                let fixed = fixed.iter().map(|&i| (i, 0.5 * h * b[i])).collect();
                StepMap::Rotations {
                    pairs: pairs.clone(),
                    phase,
                    drive0,
                    drive1,
                    fixed,
                }
            }
            Structure::Dense => {
                let n = dynamics.dim();
                let mut aug = DMatrix::zeros(n + 2, n + 2);
                aug.view_mut((0, 0), (n, n)).copy_from(&(&dynamics.a * h));
                for i in 0..n {
                    aug[(i, n)] = dynamics.b[i] * h;
                }
                aug[(n, n + 1)] = 1.0;
                let e = aug.exp();
                let phi = e.view((0, 0), (n, n)).into_owned();
                // Column n holds ∫e^{Ar}b dr, column n+1 holds ∫e^{Ar}b(h−r)dr / h.
                let gamma = e.view((0, n), (n, 1)).column(0).into_owned();
                let ramp = e.view((0, n + 1), (n, 1)).column(0).into_owned();
                let g0 = &gamma - &ramp;
                StepMap::Dense { phi, g0, g1: ramp }
            }
        }
    }

    pub(crate) fn step(&self, x: &DVector<f64>, u0: f64, u1: f64) -> DVector<f64> {
        match self {
            StepMap::Rotations {
                pairs,
                phase,
                drive0,
                drive1,
                fixed,
            } => {
                let mut out = x.clone();
                for (k, p) in pairs.iter().enumerate() {
                    let z = Complex64::new(x[p.first], x[p.second]);
                    let next = phase[k] * z + drive0[k] * u0 + drive1[k] * u1;
                    out[p.first] = next.re;
                    out[p.second] = next.im;
                }
                for &(i, half_hb) in fixed {
                    out[i] += half_hb * (u0 + u1);
                }
                out
            }
            StepMap::Dense { phi, g0, g1 } => {
                let mut out = phi * x;
                if u0 != 0.0 {
                    out.axpy(u0, g0, 1.0);
                }
                if u1 != 0.0 {
                    out.axpy(u1, g1, 1.0);
                }
                out
            }
        }
    }
}

/// Advances `x0` along `times` with input samples `inputs`, calling `visit`
/// with each grid index and state (including index 0).
pub(crate) fn integrate_grid(
    dynamics: &Dynamics,
    x0: &DVector<f64>,
    times: &[f64],
    inputs: &[f64],
    mut visit: impl FnMut(usize, &DVector<f64>),
) {
    let mut x = x0.clone();
    if times.is_empty() {
        return;
    }
    visit(0, &x);
    let mut cached: Option<(f64, StepMap)> = None;
    for i in 1..times.len() {
        let h = times[i] - times[i - 1];
        let reuse = matches!(&cached, Some((ch, _)) if (ch - h).abs() <= 1e-12 * h);
        if !reuse {
            cached = Some((h, StepMap::new(dynamics, h)));
        }
        let map = &cached.as_ref().unwrap().1;
        x = map.step(&x, inputs[i - 1], inputs[i]);
        visit(i, &x);
    }
}

/// Skew-symmetric generator `J` with scalar input/output vector `B`.
#[derive(Clone)]
pub struct LosslessSystem {
    dynamics: Dynamics,
    controllable: Option<bool>,
}

impl fmt::Debug for LosslessSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LosslessSystem")
            .field("dim", &self.dim())
            .field("rotation_blocks", &matches!(self.dynamics.structure, Structure::Rotations { .. }))
            .field("controllable", &self.controllable)
            .finish()
    }
}

/// Validates `(J, B)` and builds a [`LosslessSystem`].
pub fn make_lossless(j: DMatrix<f64>, b: DVector<f64>) -> Result<LosslessSystem> {
    LosslessSystem::new(j, b)
}

impl LosslessSystem {
    pub fn new(j: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        Self::with_tolerance(j, b, SKEW_TOLERANCE)
    }

    pub fn with_tolerance(j: DMatrix<f64>, b: DVector<f64>, skew_tol: f64) -> Result<Self> {
        if j.nrows() != j.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "generator is {}x{}, expected square",
                j.nrows(),
                j.ncols()
            )));
        }
        if b.len() != j.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "coupling vector has length {}, generator has dimension {}",
                b.len(),
                j.nrows()
            )));
        }
        if j.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite entry in (J, B)".into()));
        }
        let asym = &j + j.transpose();
        let max_asymmetry = asym.amax();
        if max_asymmetry > skew_tol {
            return Err(Error::NotSkewSymmetric { max_asymmetry });
        }
        // Project onto the skew-symmetric part; exact when J already is.
        let j = if max_asymmetry == 0.0 { j } else { (&j - j.transpose()) * 0.5 };
        Ok(Self::from_skew_unchecked(j, b))
    }

    /// Caller guarantees exact skew-symmetry (block assembly, realizations).
    pub(crate) fn from_skew_unchecked(j: DMatrix<f64>, b: DVector<f64>) -> Self {
        let controllable = if b.len() <= CONTROLLABILITY_MAX_DIM {
            Some(krylov_rank(&j, &b) == b.len())
        } else {
            None
        };
        if controllable == Some(false) {
            log::warn!("(J, B) is not controllable (dimension {})", b.len());
        }
        Self {
            dynamics: Dynamics::new(j, b),
            controllable,
        }
    }

    pub fn dim(&self) -> usize {
        self.dynamics.dim()
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.dynamics.a
    }

    pub fn coupling(&self) -> &DVector<f64> {
        &self.dynamics.b
    }

    /// `Some(rank test result)` for dimensions up to
    /// [`CONTROLLABILITY_MAX_DIM`], `None` above.
    pub fn is_controllable(&self) -> Option<bool> {
        self.controllable
    }

    /// True when the generator decouples into 2×2 rotation blocks.
    pub fn has_rotation_blocks(&self) -> bool {
        matches!(self.dynamics.structure, Structure::Rotations { .. })
    }

    pub(crate) fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub(crate) fn rotation_blocks(&self) -> Option<(&[RotationPair], &[usize])> {
        match &self.dynamics.structure {
            Structure::Rotations { pairs, fixed } => Some((pairs, fixed)),
            Structure::Dense => None,
        }
    }

    /// `e^{Jt}x`; defined for negative `t` as well.
    pub fn propagate(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        self.dynamics.propagate(x, t)
    }

    /// Dense `e^{Jt}`.
    pub fn transition_matrix(&self, t: f64) -> DMatrix<f64> {
        self.dynamics.transition(t)
    }

    /// `Bᵀe^{Jt}B`.
    pub fn impulse_response(&self, t: f64) -> f64 {
        let b = self.coupling();
        b.dot(&self.propagate(b, t))
    }

    pub fn output(&self, x: &DVector<f64>) -> f64 {
        self.coupling().dot(x)
    }

    /// Largest oscillation frequency of the free response.
    pub fn max_frequency(&self) -> f64 {
        match &self.dynamics.structure {
            Structure::Rotations { pairs, .. } => pairs.iter().map(|p| p.omega.abs()).fold(0.0, f64::max),
            Structure::Dense => {
                if self.dim() == 0 {
                    return 0.0;
                }
                // JᵀJ = −J² has eigenvalues ω².
                let gram = self.generator().transpose() * self.generator();
                let eig = gram.symmetric_eigenvalues();
                eig.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt()
            }
        }
    }

    /// The negated-time system `(−J, −B)`: driving it with `u(T − t)` undoes
    /// a forward run of length `T`.
    pub fn time_reversed(&self) -> LosslessSystem {
        LosslessSystem::from_skew_unchecked(-self.generator().clone(), -self.coupling().clone())
    }
}

impl AsRef<LosslessSystem> for LosslessSystem {
    fn as_ref(&self) -> &LosslessSystem {
        self
    }
}

/// `U(x) = ½xᵀx`.
pub fn energy(x: &DVector<f64>) -> f64 {
    0.5 * x.dot(x)
}

/// Dimension of the Krylov space spanned by `b, Jb, J²b, …`, built with
/// re-orthogonalised Arnoldi steps.
fn krylov_rank(j: &DMatrix<f64>, b: &DVector<f64>) -> usize {
    let n = b.len();
    let bn = b.norm();
    if n == 0 {
        return 0;
    }
    if bn == 0.0 {
        return 0;
    }
    let scale = j.amax().max(1.0);
    let mut basis: Vec<DVector<f64>> = vec![b / bn];
    while basis.len() < n {
        let mut w = j * basis.last().unwrap();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let norm = w.norm();
        if norm <= 1e-10 * scale {
            break;
        }
        basis.push(w / norm);
    }
    basis.len()
}

/// Strictly increasing simulation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid("non-finite time".into()));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "not strictly increasing at index {}: {} then {}",
                i + 1,
                times[i],
                times[i + 1]
            )));
        }
        Ok(Self { times })
    }

    pub fn uniform(start: f64, end: f64, points: usize) -> Result<Self> {
        if points < 2 || end <= start {
            return Err(Error::InvalidGrid(format!(
                "uniform grid needs end > start and >= 2 points (got [{start}, {end}], {points})"
            )));
        }
        Self::new(crate::numeric::linspace(start, end, points))
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Common step when the grid is uniform to relative precision 1e-9.
    pub fn uniform_step(&self) -> Option<f64> {
        if self.times.len() < 2 {
            return None;
        }
        let h = (self.end() - self.start()) / (self.times.len() - 1) as f64;
        let uniform = self.times.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs());
        uniform.then_some(h)
    }

    pub fn max_step(&self) -> f64 {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Splits every interval into `factor` equal parts.
    pub fn refined(&self, factor: usize) -> TimeGrid {
        let factor = factor.max(1);
        let mut times = Vec::with_capacity((self.times.len() - 1) * factor + 1);
        for w in self.times.windows(2) {
            let h = (w[1] - w[0]) / factor as f64;
            for k in 0..factor {
                times.push(w[0] + h * k as f64);
            }
        }
        times.push(self.end());
        TimeGrid { times }
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Closed-form input with optional derivative handles.
#[derive(Clone)]
pub struct ClosedFormInput {
    label: String,
    value: ScalarFn,
    first: Option<ScalarFn>,
    second: Option<ScalarFn>,
    end: f64,
}

/// Sampled input, linearly interpolated between samples.
#[derive(Clone)]
pub struct SampledInput {
    times: Vec<f64>,
    values: Vec<f64>,
    spline: Arc<CubicSpline>,
}

/// Scalar input signal `u(t)`.
#[derive(Clone)]
pub enum InputSignal {
    Zero,
    Sampled(SampledInput),
    ClosedForm(ClosedFormInput),
}

impl fmt::Debug for InputSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputSignal::Zero => write!(f, "InputSignal::Zero"),
            InputSignal::Sampled(s) => write!(f, "InputSignal::Sampled({} samples)", s.times.len()),
            InputSignal::ClosedForm(c) => write!(f, "InputSignal::ClosedForm({})", c.label),
        }
    }
}

impl InputSignal {
    /// Closed-form input with its first and second derivatives.
    pub fn closed_form<U, D1, D2>(label: &str, value: U, first: D1, second: D2) -> Self
    where
        U: Fn(f64) -> f64 + Send + Sync + 'static,
        D1: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        InputSignal::ClosedForm(ClosedFormInput {
            label: label.to_string(),
            value: Arc::new(value),
            first: Some(Arc::new(first)),
            second: Some(Arc::new(second)),
            end: f64::INFINITY,
        })
    }

    /// Closed-form input without derivative handles.
    pub fn from_fn<U>(label: &str, value: U) -> Self
    where
        U: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        InputSignal::ClosedForm(ClosedFormInput {
            label: label.to_string(),
            value: Arc::new(value),
            first: None,
            second: None,
            end: f64::INFINITY,
        })
    }

    /// Restricts a closed-form input to `[0, end]`.
    pub fn on_horizon(self, end: f64) -> Self {
        match self {
            InputSignal::ClosedForm(mut c) => {
                c.end = end;
                InputSignal::ClosedForm(c)
            }
            other => other,
        }
    }

    pub fn sampled(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} sample times vs {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidGrid("sampled input needs at least two samples".into()));
        }
        TimeGrid::new(times.clone())?;
        let spline = Arc::new(CubicSpline::natural(&times, &values));
        Ok(InputSignal::Sampled(SampledInput { times, values, spline }))
    }

    /// `sin(ωt)`.
    pub fn sine(omega: f64) -> Self {
        Self::closed_form(
            &format!("sin({omega} t)"),
            move |t| (omega * t).sin(),
            move |t| omega * (omega * t).cos(),
            move |t| -omega * omega * (omega * t).sin(),
        )
    }

    /// `cos(ωt)`.
    pub fn cosine(omega: f64) -> Self {
        Self::closed_form(
            &format!("cos({omega} t)"),
            move |t| (omega * t).cos(),
            move |t| -omega * (omega * t).sin(),
            move |t| -omega * omega * (omega * t).cos(),
        )
    }

    /// `1 − cos(ωt)`.
    pub fn one_minus_cos(omega: f64) -> Self {
        Self::closed_form(
            &format!("1 - cos({omega} t)"),
            move |t| 1.0 - (omega * t).cos(),
            move |t| omega * (omega * t).sin(),
            move |t| omega * omega * (omega * t).cos(),
        )
    }

    /// `sin²(ωt)`.
    pub fn sin_squared(omega: f64) -> Self {
        Self::closed_form(
            &format!("sin^2({omega} t)"),
            move |t| (omega * t).sin().powi(2),
            move |t| omega * (2.0 * omega * t).sin(),
            move |t| 2.0 * omega * omega * (2.0 * omega * t).cos(),
        )
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        match self {
            InputSignal::Zero => Ok(0.0),
            InputSignal::ClosedForm(c) => {
                if t < -1e-12 || t > c.end * (1.0 + 1e-12) + 1e-12 {
                    return Err(Error::InputUndefined { t });
                }
                Ok((c.value)(t))
            }
            InputSignal::Sampled(s) => {
                let (lo, hi) = (s.times[0], *s.times.last().unwrap());
                let slack = 1e-12 * (hi - lo).abs().max(1.0);
                if t < lo - slack || t > hi + slack {
                    return Err(Error::InputUndefined { t });
                }
                let t = t.clamp(lo, hi);
                let i = match s.times.binary_search_by(|k| k.total_cmp(&t)) {
                    Ok(i) => return Ok(s.values[i]),
                    Err(i) => i,
                };
                let (t0, t1) = (s.times[i - 1], s.times[i]);
                let w = (t - t0) / (t1 - t0);
                Ok(s.values[i - 1] * (1.0 - w) + s.values[i] * w)
            }
        }
    }

    /// `u̇(t)`: exact for closed forms with a derivative handle, from the
    /// cubic interpolant for sampled inputs.
    pub fn first_derivative(&self, t: f64) -> Option<f64> {
        match self {
            InputSignal::Zero => Some(0.0),
            InputSignal::ClosedForm(c) => c.first.as_ref().map(|f| f(t)),
            InputSignal::Sampled(s) => Some(s.spline.derivative(t)),
        }
    }

    pub fn second_derivative(&self, t: f64) -> Option<f64> {
        match self {
            InputSignal::Zero => Some(0.0),
            InputSignal::ClosedForm(c) => c.second.as_ref().map(|f| f(t)),
            InputSignal::Sampled(s) => Some(s.spline.second_derivative(t)),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, InputSignal::Zero)
    }

    pub fn samples(&self) -> Option<(&[f64], &[f64])> {
        match self {
            InputSignal::Sampled(s) => Some((&s.times, &s.values)),
            _ => None,
        }
    }

    pub fn evaluate_on(&self, times: &[f64]) -> Result<Vec<f64>> {
        times.iter().map(|&t| self.value(t)).collect()
    }
}

/// Simulated states and outputs on a time grid. Energies are recomputed
/// from the states on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn energy(&self, i: usize) -> f64 {
        energy(&self.states[i])
    }

    pub fn energies(&self) -> Vec<f64> {
        self.states.iter().map(energy).collect()
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Simulates `sys` from `x0` at `grid[0]` over the grid.
pub fn simulate(sys: &LosslessSystem, u: &InputSignal, x0: &DVector<f64>, grid: &TimeGrid) -> Result<Trajectory> {
    if x0.len() != sys.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, system dimension is {}",
            x0.len(),
            sys.dim()
        )));
    }
    let inputs = u.evaluate_on(grid.times())?;
    if !u.is_zero() {
        let omega = sys.max_frequency();
        if omega > 0.0 {
            let per_period = 2.0 * std::f64::consts::PI / omega / grid.max_step();
            if per_period < POINTS_PER_PERIOD {
                log::warn!(
                    "grid resolves the fastest mode with {per_period:.1} points per period (< {POINTS_PER_PERIOD})"
                );
            }
        }
    }
    let n = grid.len();
    let mut states = Vec::with_capacity(n);
    let mut outputs = Vec::with_capacity(n);
    integrate_grid(sys.dynamics(), x0, grid.times(), &inputs, |_, x| {
        outputs.push(sys.output(x));
        states.push(x.clone());
    });
    Ok(Trajectory {
        times: grid.times().to_vec(),
        states,
        outputs,
    })
}

/// Outputs only, without retaining states.
pub fn simulate_outputs(sys: &LosslessSystem, u: &InputSignal, x0: &DVector<f64>, grid: &TimeGrid) -> Result<Vec<f64>> {
    if x0.len() != sys.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, system dimension is {}",
            x0.len(),
            sys.dim()
        )));
    }
    let inputs = u.evaluate_on(grid.times())?;
    let mut outputs = Vec::with_capacity(grid.len());
    integrate_grid(sys.dynamics(), x0, grid.times(), &inputs, |_, x| outputs.push(sys.output(x)));
    Ok(outputs)
}

/// Work rate `w(t_i) = y(t_i)·u(t_i)` along a trajectory.
pub fn work_rate(traj: &Trajectory, u: &InputSignal) -> Result<Vec<f64>> {
    let inputs = u.evaluate_on(&traj.times)?;
    if inputs.len() != traj.outputs.len() {
        return Err(Error::DimensionMismatch("trajectory and input grids differ".into()));
    }
    Ok(traj.outputs.iter().zip(&inputs).map(|(y, u)| y * u).collect())
}

/// Trapezoidal cumulative work `∫₀ᵗ y·u`.
pub fn cumulative_work(traj: &Trajectory, u: &InputSignal) -> Result<Vec<f64>> {
    let w = work_rate(traj, u)?;
    Ok(cumulative_trapezoid(&traj.times, &w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn rotation() -> LosslessSystem {
        make_lossless(dmatrix![0.0, 1.0; -1.0, 0.0], dvector![1.0, 0.0]).unwrap()
    }

    #[test]
    fn accepts_smallest_skew_pair() {
        let sys = rotation();
        assert_eq!(sys.dim(), 2);
        assert_eq!(sys.is_controllable(), Some(true));
        assert!(sys.has_rotation_blocks());
    }

    #[test]
    fn rejects_symmetric_generator() {
        let err = make_lossless(dmatrix![0.0, 1.0; 1.0, 0.0], dvector![1.0, 0.0]).unwrap_err();
        match err {
            Error::NotSkewSymmetric { max_asymmetry } => assert_eq!(max_asymmetry, 2.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_dimension_mismatch() {
        assert!(matches!(
            make_lossless(dmatrix![0.0, 1.0; -1.0, 0.0], dvector![1.0]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            make_lossless(DMatrix::zeros(2, 3), dvector![1.0, 0.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn tiny_asymmetry_is_projected_away() {
        let sys = make_lossless(dmatrix![0.0, 1.0; -1.0 + 1e-13, 0.0], dvector![1.0, 0.0]).unwrap();
        let j = sys.generator();
        assert_eq!(j[(0, 1)], -j[(1, 0)]);
    }

    #[test]
    fn lc_circuit_is_lossless() {
        // Inductor-capacitor ladder with C1 = 1, L1 = 0.5, C2 = 2.
        let (c1, l1, c2): (f64, f64, f64) = (1.0, 0.5, 2.0);
        let a = 1.0 / (c1 * l1).sqrt();
        let b = 1.0 / (l1 * c2).sqrt();
        let j = dmatrix![0.0, -a, 0.0; a, 0.0, -b; 0.0, b, 0.0];
        let sys = make_lossless(j, dvector![1.0 / c1.sqrt(), 0.0, 0.0]).unwrap();
        assert_eq!(sys.is_controllable(), Some(true));
        assert!(!sys.has_rotation_blocks());
        let grid = TimeGrid::uniform(0.0, 20.0, 2001).unwrap();
        let traj = simulate(&sys, &InputSignal::Zero, &dvector![1.0, 0.5, -0.2], &grid).unwrap();
        let e = traj.energies();
        for v in &e {
            assert!((v - e[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn free_rotation_matches_closed_form() {
        let sys = rotation();
        let grid = TimeGrid::uniform(0.0, 10.0, 1001).unwrap();
        let traj = simulate(&sys, &InputSignal::Zero, &dvector![1.0, 0.0], &grid).unwrap();
        for (i, &t) in traj.times.iter().enumerate() {
            assert!((traj.states[i][0] - t.cos()).abs() < 1e-12);
            assert!((traj.states[i][1] + t.sin()).abs() < 1e-12);
            assert!((traj.outputs[i] - t.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_and_rotation_paths_agree() {
        let j = dmatrix![0.0, 2.0, 0.0, 0.0; -2.0, 0.0, 0.0, 0.0; 0.0, 0.0, 0.0, 0.7; 0.0, 0.0, -0.7, 0.0];
        let b = dvector![0.4, -0.3, 1.0, 0.2];
        let rot = Dynamics::new(j.clone(), b.clone());
        assert!(matches!(rot.structure, Structure::Rotations { .. }));
        let dense = Dynamics { a: j, b, structure: Structure::Dense };
        let times = crate::numeric::linspace(0.0, 5.0, 501);
        let inputs: Vec<f64> = times.iter().map(|t| (1.3 * t).sin()).collect();
        let x0 = dvector![0.1, 0.2, -0.3, 0.05];
        let mut a = Vec::new();
        let mut c = Vec::new();
        integrate_grid(&rot, &x0, &times, &inputs, |_, x| a.push(x.clone()));
        integrate_grid(&dense, &x0, &times, &inputs, |_, x| c.push(x.clone()));
        for (p, q) in a.iter().zip(&c) {
            assert!((p - q).amax() < 1e-12);
        }
    }

    #[test]
    fn first_order_hold_is_exact_for_linear_input() {
        // ẋ = u with u = t on an integrator: x = t²/2 exactly.
        let sys = make_lossless(dmatrix![0.0], dvector![1.0]).unwrap();
        let u = InputSignal::closed_form("t", |t| t, |_| 1.0, |_| 0.0);
        let grid = TimeGrid::uniform(0.0, 3.0, 7).unwrap();
        let traj = simulate(&sys, &u, &dvector![0.0], &grid).unwrap();
        for (x, t) in traj.states.iter().zip(&traj.times) {
            assert!((x[0] - t * t / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_input_gives_zero_work() {
        let sys = rotation();
        let grid = TimeGrid::uniform(0.0, 3.0, 31).unwrap();
        let traj = simulate(&sys, &InputSignal::Zero, &dvector![0.3, 0.1], &grid).unwrap();
        assert!(work_rate(&traj, &InputSignal::Zero).unwrap().iter().all(|w| *w == 0.0));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![]).is_err());
        assert!(TimeGrid::uniform(1.0, 0.0, 10).is_err());
    }

    #[test]
    fn input_outside_its_domain_is_an_error() {
        let u = InputSignal::sampled(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let sys = rotation();
        let grid = TimeGrid::uniform(0.0, 2.0, 5).unwrap();
        assert!(matches!(
            simulate(&sys, &u, &DVector::zeros(2), &grid),
            Err(Error::InputUndefined { .. })
        ));
        let c = InputSignal::sine(1.0).on_horizon(1.0);
        assert!(c.value(1.5).is_err());
        assert!(c.value(0.5).is_ok());
    }

    #[test]
    fn sampled_input_interpolates_linearly() {
        let u = InputSignal::sampled(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(u.value(0.5).unwrap(), 1.0);
        assert_eq!(u.value(2.0).unwrap(), 1.0);
        assert_eq!(u.value(3.0).unwrap(), 0.0);
    }

    #[test]
    fn uncontrollable_pair_is_recorded_not_rejected() {
        let sys = make_lossless(dmatrix![0.0, 1.0, 0.0; -1.0, 0.0, 0.0; 0.0, 0.0, 0.0], dvector![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(sys.is_controllable(), Some(false));
    }

    #[test]
    fn hold_integrals_agree_between_branches() {
        for &w in &[0.2, 0.49, 0.51, 3.0] {
            let c = Complex64::new(0.0, -w);
            let (s0, s1) = hold_integrals(c, 1.0);
            let z = c;
            let e0 = (z.exp() - 1.0) / c;
            let e1 = (z.exp() * (z - 1.0) + 1.0) / (c * c);
            assert!((s0 - e0).norm() < 1e-13);
            assert!((s1 - e1).norm() < 1e-13);
        }
    }
}
