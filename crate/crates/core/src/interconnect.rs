//! Interconnection of lossless systems, heat-bath closure and measurement
//! back-action.
//!
//! Closing a lossless system `(J, B)` on a heat bath of strength `k` and
//! temperature `T` gives
//!
//! ```text
//! ẋ = (J − kBBᵀ)x + Bu − B√(2kT)·w,    y = Bᵀx
//! ```
//!
//! with `w` unit-intensity white noise. A measurement device of gain `k_m`
//! and temperature `T_m` produces the same damping together with the
//! estimate `ŷ = Bᵀx + √(2T_m/k_m)·w`, where one noise path `w` drives both
//! the process noise and the measurement noise.
//!
//! White noise is discretized on a uniform step `Δ` as independent samples
//! `w_j = ξ_j/√Δ` held constant over each step, so `E[w_j²] = 1/Δ`.

use nalgebra::{DMatrix, DVector};

use crate::ensemble::trial_rng;
use crate::error::{Error, Result};
use crate::lti::{Dynamics, InputSignal, LosslessSystem, StepMap, TimeGrid};
use crate::numeric::pairwise_mean;
use rand_distr::{Distribution, StandardNormal};

/// Tolerance on the spectral abscissa of a damped closure.
pub const ABSCISSA_TOLERANCE: f64 = 1e-10;

/// Couples `sys2` in feedback around `sys1`:
/// `J = [[J₁, −B₁B₂ᵀ], [B₂B₁ᵀ, J₂]]`, `B = [B₁; 0]`.
///
/// The off-diagonal blocks are exact negative transposes, so the result is
/// skew-symmetric bit for bit.
pub fn interconnect(sys1: &LosslessSystem, sys2: &LosslessSystem) -> Result<LosslessSystem> {
    let (n1, n2) = (sys1.dim(), sys2.dim());
    if n2 == 0 {
        return Ok(sys1.clone());
    }
    let n = n1 + n2;
    let (b1, b2) = (sys1.coupling(), sys2.coupling());
    let mut j = DMatrix::zeros(n, n);
    j.view_mut((0, 0), (n1, n1)).copy_from(sys1.generator());
    j.view_mut((n1, n1), (n2, n2)).copy_from(sys2.generator());
    for r in 0..n2 {
        for c in 0..n1 {
            let v = b2[r] * b1[c];
            j[(n1 + r, c)] = v;
            j[(c, n1 + r)] = -v;
        }
    }
    let mut b = DVector::zeros(n);
    b.rows_mut(0, n1).copy_from(b1);
    Ok(LosslessSystem::from_skew_unchecked(j, b))
}

/// Dissipative white-noise environment `y = ku + √(2Tk)·w`, valid on `[0, τ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatBath {
    strength: f64,
    temperature: f64,
    tau: f64,
}

impl HeatBath {
    pub fn new(strength: f64, temperature: f64, tau: f64) -> Result<Self> {
        if !(strength > 0.0 && strength.is_finite()) {
            return Err(Error::InvalidParameter(format!("bath strength must be > 0, got {strength}")));
        }
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidParameter(format!("bath temperature must be >= 0, got {temperature}")));
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!("recurrence time must be > 0, got {tau}")));
        }
        Ok(Self {
            strength,
            temperature,
            tau,
        })
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// White-noise intensity `2kT` of the bath output.
    pub fn noise_intensity(&self) -> f64 {
        2.0 * self.strength * self.temperature
    }
}

/// `ẋ = Ax + b_in·u + b_noise·√q·w`, `y = cᵀx + d_noise·√q·w`.
#[derive(Debug, Clone)]
pub struct NoisyLinearSystem {
    input: Dynamics,
    noise: Dynamics,
    c: DVector<f64>,
    d_noise: f64,
    noise_intensity: f64,
    horizon: Option<f64>,
}

impl NoisyLinearSystem {
    pub fn new(
        a: DMatrix<f64>,
        b_in: DVector<f64>,
        b_noise: DVector<f64>,
        c: DVector<f64>,
        d_noise: f64,
        noise_intensity: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b_in.len() != n || b_noise.len() != n || c.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{}, b_in {}, b_noise {}, c {}",
                a.nrows(),
                a.ncols(),
                b_in.len(),
                b_noise.len(),
                c.len()
            )));
        }
        if !(noise_intensity >= 0.0 && noise_intensity.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise intensity must be >= 0, got {noise_intensity}")));
        }
        Ok(Self {
            input: Dynamics::new(a.clone(), b_in),
            noise: Dynamics::new(a, b_noise),
            c,
            d_noise,
            noise_intensity,
            horizon: None,
        })
    }

    /// Simulations past `horizon` log a warning.
    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.input.a
    }

    pub fn b_in(&self) -> &DVector<f64> {
        &self.input.b
    }

    pub fn b_noise(&self) -> &DVector<f64> {
        &self.noise.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn d_noise(&self) -> f64 {
        self.d_noise
    }

    pub fn noise_intensity(&self) -> f64 {
        self.noise_intensity
    }

    pub fn horizon(&self) -> Option<f64> {
        self.horizon
    }

    pub fn spectral_abscissa(&self) -> f64 {
        spectral_abscissa(self.a())
    }

    /// Solves `AP + PAᵀ + q·b_noise·b_noiseᵀ = 0` by vectorization.
    ///
    /// Requires a Hurwitz `A`; fails with [`Error::Precondition`] when the
    /// Kronecker system is singular.
    pub fn stationary_covariance(&self) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let a = self.a();
        let eye = DMatrix::<f64>::identity(n, n);
        let lhs = eye.kronecker(a) + a.kronecker(&eye);
        let q = self.b_noise() * self.b_noise().transpose() * self.noise_intensity;
        let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
        let sol = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Precondition("Lyapunov equation is singular; A is not Hurwitz".into()))?;
        let p = DMatrix::from_column_slice(n, n, sol.as_slice());
        Ok((&p + p.transpose()) * 0.5)
    }

    /// State covariance at `t` from a deterministic start:
    /// `∫₀ᵗ e^{As} q b bᵀ e^{Aᵀs} ds`, via the block exponential of
    /// `[[−A, Q], [0, Aᵀ]]`.
    pub fn transient_covariance(&self, t: f64) -> DMatrix<f64> {
        let n = self.dim();
        let a = self.a();
        let q = self.b_noise() * self.b_noise().transpose() * self.noise_intensity;
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&(-a * t));
        m.view_mut((0, n), (n, n)).copy_from(&(q * t));
        m.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * t));
        let e = m.exp();
        let f22t = e.view((n, n), (n, n)).transpose();
        let p = &f22t * e.view((0, n), (n, n));
        (&p + p.transpose()) * 0.5
    }

    /// Covariance of the discretized state in steady state:
    /// `P = ΦPΦᵀ + (q/Δ)·ggᵀ` with `g = ∫₀^Δ e^{Ar} b_noise dr`.
    pub fn discrete_stationary_covariance(&self, step: f64) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let phi = self.input.transition(step);
        let g = noise_gain(&self.noise, step);
        let q = &g * g.transpose() * (self.noise_intensity / step);
        let eye = DMatrix::<f64>::identity(n * n, n * n);
        let lhs = eye - phi.kronecker(&phi);
        let rhs = DVector::from_column_slice(q.as_slice());
        let sol = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Precondition("discrete Lyapunov equation is singular".into()))?;
        let p = DMatrix::from_column_slice(n, n, sol.as_slice());
        Ok((&p + p.transpose()) * 0.5)
    }
}

/// Largest real part among the eigenvalues of `a`.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn damped(sys: &LosslessSystem, k: f64) -> DMatrix<f64> {
    let b = sys.coupling();
    sys.generator() - b * b.transpose() * k
}

fn check_abscissa(a: &DMatrix<f64>) -> Result<()> {
    let abscissa = spectral_abscissa(a);
    let scale = a.amax().max(1.0);
    if abscissa > ABSCISSA_TOLERANCE * scale {
        return Err(Error::Precondition(format!("damped generator has spectral abscissa {abscissa:e}")));
    }
    Ok(())
}

/// `A = J − kBBᵀ`, `b_in = B`, `b_noise = −B√(2kT)`, `c = B`, valid on `[0, τ]`.
pub fn connect_heat_bath(sys: &LosslessSystem, bath: &HeatBath) -> Result<NoisyLinearSystem> {
    let a = damped(sys, bath.strength);
    check_abscissa(&a)?;
    let b = sys.coupling().clone();
    let b_noise = -&b * bath.noise_intensity().sqrt();
    Ok(NoisyLinearSystem::new(a, b.clone(), b_noise, b, 0.0, 1.0)?.with_horizon(bath.tau))
}

/// A lossless system under continuous measurement.
#[derive(Debug, Clone)]
pub struct MeasuredSystem {
    system: NoisyLinearSystem,
    gain: f64,
    temperature: f64,
}

/// `A = J − k_mBBᵀ`, process noise `p = √(2k_mT_m)·w` entering through `−B`,
/// estimate `ŷ = Bᵀx + m` with `m = √(2T_m/k_m)·w` on the same `w`.
///
/// An external input may still drive the system through `B`.
pub fn measure(sys: &LosslessSystem, k_m: f64, t_m: f64) -> Result<MeasuredSystem> {
    if !(k_m > 0.0 && k_m.is_finite()) {
        return Err(Error::InvalidParameter(format!("measurement gain must be > 0, got {k_m}")));
    }
    if !(t_m >= 0.0 && t_m.is_finite()) {
        return Err(Error::InvalidParameter(format!("measurement temperature must be >= 0, got {t_m}")));
    }
    let a = damped(sys, k_m);
    check_abscissa(&a)?;
    let b = sys.coupling().clone();
    let b_noise = -&b * (2.0 * k_m * t_m).sqrt();
    let d_noise = (2.0 * t_m / k_m).sqrt();
    Ok(MeasuredSystem {
        system: NoisyLinearSystem::new(a, b.clone(), b_noise, b, d_noise, 1.0)?,
        gain: k_m,
        temperature: t_m,
    })
}

impl MeasuredSystem {
    pub fn system(&self) -> &NoisyLinearSystem {
        &self.system
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// `2k_mT_m`.
    pub fn process_intensity(&self) -> f64 {
        2.0 * self.gain * self.temperature
    }

    /// `2T_m/k_m`.
    pub fn measurement_intensity(&self) -> f64 {
        2.0 * self.temperature / self.gain
    }

    /// `2T_m`, independent of `k_m`.
    pub fn cross_intensity(&self) -> f64 {
        2.0 * self.temperature
    }

    /// Process-noise samples `p_j` from a run of this system.
    pub fn process_noise(&self, run: &NoisyTrajectory) -> Vec<f64> {
        let scale = (2.0 * self.gain * self.temperature).sqrt();
        run.noise.iter().map(|w| scale * w).collect()
    }

    /// Measurement-noise samples `m_j = ŷ_j − Bᵀx_j`.
    pub fn measurement_noise(&self, run: &NoisyTrajectory) -> Vec<f64> {
        run.outputs
            .iter()
            .zip(&run.states)
            .map(|(y, x)| y - self.system.c.dot(x))
            .collect()
    }
}

/// Sample intensities of a measured run: each is a lag-0 product mean
/// times `Δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityEstimate {
    pub cross: f64,
    pub process: f64,
    pub measurement: f64,
}

pub fn estimate_intensities(measured: &MeasuredSystem, run: &NoisyTrajectory) -> Result<IntensityEstimate> {
    let step = run.step;
    let p = measured.process_noise(run);
    let m = measured.measurement_noise(run);
    let mean = |f: &dyn Fn(usize) -> f64| pairwise_mean(&(0..p.len()).map(f).collect::<Vec<_>>()) * step;
    if p.is_empty() {
        return Err(Error::InvalidGrid("empty run".into()));
    }
    Ok(IntensityEstimate {
        cross: mean(&|j| p[j] * m[j]),
        process: mean(&|j| p[j] * p[j]),
        measurement: mean(&|j| m[j] * m[j]),
    })
}

/// A noisy simulation with its noise record.
#[derive(Debug, Clone)]
pub struct NoisyTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<f64>,
    /// Unit-intensity samples `w_j = ξ_j/√Δ`, held on `[t_j, t_{j+1})`.
    pub noise: Vec<f64>,
    pub step: f64,
}

/// `∫₀^h e^{Ar} b dr` for the noise direction.
fn noise_gain(noise: &Dynamics, h: f64) -> DVector<f64> {
    StepMap::new(noise, h).step(&DVector::zeros(noise.dim()), 1.0, 1.0)
}

/// Integrates a noisy system on a uniform grid from `x0`.
///
/// The drift uses the exact first-order-hold propagator; each white-noise
/// sample is held over its step and integrated exactly, which is
/// consistent with Euler–Maruyama to first order. Noise comes from the
/// ChaCha8 stream seeded with `seed`.
pub fn simulate_noisy(
    nsys: &NoisyLinearSystem,
    u: &InputSignal,
    x0: &DVector<f64>,
    grid: &TimeGrid,
    seed: u64,
) -> Result<NoisyTrajectory> {
    if x0.len() != nsys.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, system dimension is {}",
            x0.len(),
            nsys.dim()
        )));
    }
    let step = grid
        .uniform_step()
        .ok_or_else(|| Error::InvalidGrid("stochastic integration needs a uniform grid".into()))?;
    if let Some(h) = nsys.horizon {
        if grid.end() > h {
            log::warn!("simulating to t = {} beyond the heat-bath validity horizon {h}", grid.end());
        }
    }
    let inputs = u.evaluate_on(grid.times())?;
    let n = grid.len();
    let mut rng = trial_rng(seed, 0);
    let scale = 1.0 / step.sqrt();
    let noise: Vec<f64> = (0..n)
        .map(|_| {
            let xi: f64 = StandardNormal.sample(&mut rng);
            xi * scale
        })
        .collect();
    let root_q = nsys.noise_intensity.sqrt();
    let drift = StepMap::new(&nsys.input, step);
    let kick = noise_gain(&nsys.noise, step) * root_q;
    let mut states = Vec::with_capacity(n);
    let mut outputs = Vec::with_capacity(n);
    let mut x = x0.clone();
    for j in 0..n {
        outputs.push(nsys.c.dot(&x) + nsys.d_noise * root_q * noise[j]);
        states.push(x.clone());
        if j + 1 < n {
            x = drift.step(&x, inputs[j], inputs[j + 1]);
            x.axpy(noise[j], &kick, 1.0);
        }
    }
    Ok(NoisyTrajectory {
        times: grid.times().to_vec(),
        states,
        outputs,
        noise,
        step,
    })
}
