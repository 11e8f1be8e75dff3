//! Initial-state uncertainty in lossless systems.
//!
//! With a random initial state of covariance `X` the output covariance of
//! a lossless system is `R(s,t) = Bᵀe^{Jt}Xe^{−Js}B`. A system "has
//! temperature `T`" when this equals `T·Bᵀe^{J(t−s)}B`, which makes the
//! fluctuation (covariance) proportional to the dissipation (impulse
//! response). For `K_N` at temperature `T` the output approaches white
//! noise of intensity `2Tk`.
//!
//! Initial states are Gaussian. Trial `j` of an ensemble draws from a
//! ChaCha8 stream seeded with `base_seed + j`, so serial and parallel runs
//! produce identical numbers.

use std::f64::consts::{E, PI};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::harmonic::HarmonicRealization;
use crate::lti::{integrate_grid, simulate_outputs, InputSignal, LosslessSystem, TimeGrid};
use crate::numeric::{integrate, map_indexed, mean_and_stderr, pairwise_sum, QuadratureOptions};

/// Symmetry / PSD tolerance for covariance matrices.
pub const COVARIANCE_TOLERANCE: f64 = 1e-10;

/// Defect below which an output covariance counts as thermal.
pub const THERMAL_TOLERANCE: f64 = 1e-8;

/// Temperature in energy units (Boltzmann's constant absorbed).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(value: f64) -> Result<Self> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::InvalidParameter(format!("temperature must be >= 0, got {value}")));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Factor {
    Diagonal(DVector<f64>),
    Full(DMatrix<f64>),
}

/// Gaussian initial-state law and trial budget.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    mean0: DVector<f64>,
    covariance: DMatrix<f64>,
    trials: usize,
    base_seed: u64,
    factor: Factor,
}

impl EnsembleSpec {
    pub fn new(mean0: DVector<f64>, covariance: DMatrix<f64>, trials: usize, base_seed: u64) -> Result<Self> {
        if trials < 2 {
            return Err(Error::InvalidParameter(format!("ensemble needs at least 2 trials, got {trials}")));
        }
        if covariance.nrows() != covariance.ncols() || covariance.nrows() != mean0.len() {
            return Err(Error::DimensionMismatch(format!(
                "mean has length {}, covariance is {}x{}",
                mean0.len(),
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        let factor = covariance_factor(&covariance)?;
        Ok(Self {
            mean0,
            covariance,
            trials,
            base_seed,
            factor,
        })
    }

    /// Zero-mean equipartition law `X = T·I`.
    pub fn thermal(dim: usize, temperature: Temperature, trials: usize, base_seed: u64) -> Result<Self> {
        Self::new(
            DVector::zeros(dim),
            DMatrix::identity(dim, dim) * temperature.value(),
            trials,
            base_seed,
        )
    }

    pub fn mean0(&self) -> &DVector<f64> {
        &self.mean0
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn with_trials(mut self, trials: usize) -> Result<Self> {
        if trials < 2 {
            return Err(Error::InvalidParameter(format!("ensemble needs at least 2 trials, got {trials}")));
        }
        self.trials = trials;
        Ok(self)
    }

    /// Deviation `x(0) − E x(0)` for trial `j`.
    pub fn sample_deviation(&self, trial: usize) -> DVector<f64> {
        let mut rng = trial_rng(self.base_seed, trial);
        let n = self.mean0.len();
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        match &self.factor {
            Factor::Diagonal(d) => d.component_mul(&z),
            Factor::Full(l) => l * z,
        }
    }

    pub fn sample(&self, trial: usize) -> DVector<f64> {
        &self.mean0 + self.sample_deviation(trial)
    }
}

/// RNG for trial `j`: ChaCha8 seeded with `base_seed + j` (wrapping).
pub fn trial_rng(base_seed: u64, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(trial as u64))
}

fn validate_covariance(x: &DMatrix<f64>) -> Result<()> {
    if x.nrows() != x.ncols() {
        return Err(Error::InvalidCovariance("matrix is not square".into()));
    }
    let asym = (x - x.transpose()).amax();
    if asym > COVARIANCE_TOLERANCE {
        return Err(Error::InvalidCovariance(format!("asymmetry {asym:e}")));
    }
    Ok(())
}

fn covariance_factor(x: &DMatrix<f64>) -> Result<Factor> {
    validate_covariance(x)?;
    let n = x.nrows();
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || x[(i, j)] == 0.0));
    let scale = x.amax().max(1.0);
    if diagonal {
        let d = x.diagonal();
        if let Some(v) = d.iter().find(|v| **v < -COVARIANCE_TOLERANCE * scale) {
            return Err(Error::InvalidCovariance(format!("negative variance {v}")));
        }
        return Ok(Factor::Diagonal(d.map(|v| v.max(0.0).sqrt())));
    }
    let sym = (x + x.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    if let Some(v) = eig.eigenvalues.iter().find(|v| **v < -COVARIANCE_TOLERANCE * scale) {
        return Err(Error::InvalidCovariance(format!("negative eigenvalue {v:e}")));
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let mut l = eig.eigenvectors.clone();
    for (j, r) in roots.iter().enumerate() {
        l.column_mut(j).scale_mut(*r);
    }
    Ok(Factor::Full(l))
}

/// `e^{−Jt}B`; the output covariance is `p(t)ᵀ X p(s)`.
fn backward_coupling(sys: &LosslessSystem, t: f64) -> DVector<f64> {
    sys.propagate(sys.coupling(), -t)
}

/// Closed-form output covariance `R(s,t) = Bᵀe^{Jt}Xe^{−Js}B`.
///
/// For a harmonic realization the coupling vector already carries the
/// factor `√2`, so this is `2B_Nᵀe^{J_N t}Xe^{−J_N s}B_N`.
pub fn covariance_exact(sys: impl AsRef<LosslessSystem>, x: &DMatrix<f64>, s: f64, t: f64) -> Result<f64> {
    let sys = sys.as_ref();
    if x.nrows() != sys.dim() || x.ncols() != sys.dim() {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}x{}, system dimension is {}",
            x.nrows(),
            x.ncols(),
            sys.dim()
        )));
    }
    let ps = backward_coupling(sys, s);
    let pt = backward_coupling(sys, t);
    Ok(pt.dot(&(x * ps)))
}

/// Empirical output statistics of an ensemble run.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub times: Vec<f64>,
    /// Output with the mean initial state and the given input.
    pub deterministic_mean: Vec<f64>,
    pub mean: Vec<f64>,
    pub mean_stderr: Vec<f64>,
    /// Unbiased empirical covariance `R̂(s,t)` over grid pairs.
    pub covariance: DMatrix<f64>,
    pub stderr: DMatrix<f64>,
    pub trials: usize,
}

impl CovarianceEstimate {
    /// Largest `|R̂ − R|/stderr` against a reference covariance matrix;
    /// entries with zero stderr must match exactly.
    pub fn max_z_score(&self, exact: &DMatrix<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..exact.nrows() {
            for j in 0..exact.ncols() {
                let d = (self.covariance[(i, j)] - exact[(i, j)]).abs();
                let se = self.stderr[(i, j)];
                let z = if se > 0.0 {
                    d / se
                } else if d <= 1e-300 {
                    0.0
                } else {
                    f64::INFINITY
                };
                worst = worst.max(z);
            }
        }
        worst
    }
}

/// Exact covariance matrix over the grid pairs.
pub fn covariance_matrix_exact(sys: impl AsRef<LosslessSystem>, x: &DMatrix<f64>, times: &[f64]) -> Result<DMatrix<f64>> {
    let sys = sys.as_ref();
    if x.nrows() != sys.dim() {
        return Err(Error::DimensionMismatch("covariance and system dimensions differ".into()));
    }
    let p: Vec<DVector<f64>> = times.iter().map(|&t| backward_coupling(sys, t)).collect();
    let xp: Vec<DVector<f64>> = p.iter().map(|v| x * v).collect();
    Ok(DMatrix::from_fn(times.len(), times.len(), |i, j| p[i].dot(&xp[j])))
}

/// Monte Carlo over random initial states with a deterministic input.
pub fn ensemble_simulate(
    sys: impl AsRef<LosslessSystem>,
    spec: &EnsembleSpec,
    u: &InputSignal,
    grid: &TimeGrid,
) -> Result<CovarianceEstimate> {
    let sys = sys.as_ref();
    if spec.mean0.len() != sys.dim() {
        return Err(Error::DimensionMismatch(format!(
            "ensemble dimension {} vs system dimension {}",
            spec.mean0.len(),
            sys.dim()
        )));
    }
    let deterministic = simulate_outputs(sys, u, &spec.mean0, grid)?;
    let times = grid.times();
    let g = times.len();
    let zeros = vec![0.0; g];
    // By linearity each trial is the deterministic path plus the free
    // response of its initial deviation.
    let deviations: Vec<Vec<f64>> = map_indexed(spec.trials, |j| {
        let dx = spec.sample_deviation(j);
        let mut out = Vec::with_capacity(g);
        integrate_grid(sys.dynamics(), &dx, times, &zeros, |_, x| out.push(sys.output(x)));
        out
    });
    let n = spec.trials;
    let column = |i: usize| -> Vec<f64> { deviations.iter().map(|d| d[i]).collect() };
    let mut mean = Vec::with_capacity(g);
    let mut mean_stderr = Vec::with_capacity(g);
    let mut centered: Vec<Vec<f64>> = Vec::with_capacity(g);
    for i in 0..g {
        let col = column(i);
        let (m, se) = mean_and_stderr(&col);
        mean.push(deterministic[i] + m);
        mean_stderr.push(se);
        centered.push(col.iter().map(|v| v - m).collect());
    }
    let mut covariance = DMatrix::zeros(g, g);
    let mut stderr = DMatrix::zeros(g, g);
    for a in 0..g {
        for b in a..g {
            let products: Vec<f64> = centered[a].iter().zip(&centered[b]).map(|(p, q)| p * q).collect();
            let r = pairwise_sum(&products) / (n - 1) as f64;
            let (_, se) = mean_and_stderr(&products);
            covariance[(a, b)] = r;
            covariance[(b, a)] = r;
            stderr[(a, b)] = se;
            stderr[(b, a)] = se;
        }
    }
    Ok(CovarianceEstimate {
        times: times.to_vec(),
        deterministic_mean: deterministic,
        mean,
        mean_stderr,
        covariance,
        stderr,
        trials: n,
    })
}

/// Outcome of the temperature test.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureCheck {
    pub is_thermal: bool,
    /// Least-squares temperature when thermal.
    pub temperature: Option<f64>,
    /// Fitted temperature regardless of the verdict.
    pub fitted_temperature: f64,
    /// `sup |Bᵀe^{Jt}Xe^{−Js}B − T·Bᵀe^{J(t−s)}B|` over the probe grid.
    pub max_defect: f64,
    /// Sufficient condition, part one: `XJ = JX`.
    pub commutes_with_generator: bool,
    /// Sufficient condition, part two: `XB = λB`, reporting `λ`.
    pub coupling_eigenvalue: Option<f64>,
}

impl TemperatureCheck {
    pub fn sufficient_condition(&self) -> bool {
        self.commutes_with_generator && self.coupling_eigenvalue.is_some()
    }
}

/// Tests whether `X` gives `sys` a temperature, probing all `(s, t)` pairs
/// drawn from `probe_times`.
pub fn check_temperature(sys: impl AsRef<LosslessSystem>, x: &DMatrix<f64>, probe_times: &[f64]) -> Result<TemperatureCheck> {
    let sys = sys.as_ref();
    validate_covariance(x)?;
    if x.nrows() != sys.dim() {
        return Err(Error::DimensionMismatch("covariance and system dimensions differ".into()));
    }
    let p: Vec<DVector<f64>> = probe_times.iter().map(|&t| backward_coupling(sys, t)).collect();
    let xp: Vec<DVector<f64>> = p.iter().map(|v| x * v).collect();
    let mut cov = Vec::new();
    let mut imp = Vec::new();
    for s in 0..p.len() {
        for t in 0..p.len() {
            cov.push(p[t].dot(&xp[s]));
            imp.push(p[t].dot(&p[s]));
        }
    }
    let num = pairwise_sum(&cov.iter().zip(&imp).map(|(f, h)| f * h).collect::<Vec<_>>());
    let den = pairwise_sum(&imp.iter().map(|h| h * h).collect::<Vec<_>>());
    let fitted = if den > 0.0 { num / den } else { 0.0 };
    let max_defect = cov
        .iter()
        .zip(&imp)
        .map(|(f, h)| (f - fitted * h).abs())
        .fold(0.0, f64::max);
    let scale = cov.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = THERMAL_TOLERANCE * scale;
    let is_thermal = max_defect <= tol && fitted >= -tol;

    let j = sys.generator();
    let xscale = x.amax().max(1.0);
    let commutes = (x * j - j * x).amax() <= COVARIANCE_TOLERANCE * xscale * j.amax().max(1.0);
    let b = sys.coupling();
    let bb = b.dot(b);
    let coupling_eigenvalue = if bb > 0.0 {
        let xb = x * b;
        let lambda = b.dot(&xb) / bb;
        ((xb - b * lambda).amax() <= COVARIANCE_TOLERANCE * xscale * b.amax()).then_some(lambda)
    } else {
        None
    };
    Ok(TemperatureCheck {
        is_thermal,
        temperature: is_thermal.then_some(fitted.max(0.0)),
        fitted_temperature: fitted,
        max_defect,
        commutes_with_generator: commutes,
        coupling_eigenvalue,
    })
}

/// Maximum-entropy initial law for expected energy `energy` in dimension
/// `dim`: zero mean, `X = (2E/n)·I`, temperature `T = 2E/n`.
pub fn maxent_covariance(energy: f64, dim: usize) -> Result<(DMatrix<f64>, Temperature)> {
    if !(energy >= 0.0 && energy.is_finite()) {
        return Err(Error::InvalidParameter(format!("energy must be >= 0, got {energy}")));
    }
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let t = 2.0 * energy / dim as f64;
    Ok((DMatrix::identity(dim, dim) * t, Temperature::new(t)?))
}

/// Differential entropy of `N(0, X)`; `-inf` for singular `X`.
pub fn gaussian_entropy(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows() as f64;
    let eig = x.clone().symmetric_eigenvalues();
    if eig.iter().any(|v| *v <= 0.0) {
        return f64::NEG_INFINITY;
    }
    let logdet: f64 = eig.iter().map(|v| v.ln()).sum();
    0.5 * (n * (2.0 * PI * E).ln() + logdet)
}

/// `a cos(ωs) + b sin(ωs)`.
#[derive(Debug, Clone, Copy)]
struct TrigTerm {
    omega: f64,
    cos: f64,
    sin: f64,
}

/// `∫_{−h}^0 cos(νs) ds`.
fn window_cos(nu: f64, h: f64) -> f64 {
    if nu == 0.0 {
        h
    } else {
        (nu * h).sin() / nu
    }
}

/// `∫_{−h}^0 sin(νs) ds`.
fn window_sin(nu: f64, h: f64) -> f64 {
    if nu == 0.0 {
        0.0
    } else {
        let half = (0.5 * nu * h).sin();
        -2.0 * half * half / nu
    }
}

fn window_product(a: TrigTerm, b: TrigTerm, h: f64) -> f64 {
    let (d, s) = (a.omega - b.omega, a.omega + b.omega);
    0.5 * (a.cos * b.cos * (window_cos(d, h) + window_cos(s, h))
        + a.sin * b.sin * (window_cos(d, h) - window_cos(s, h))
        + a.cos * b.sin * (window_sin(s, h) - window_sin(d, h))
        + a.sin * b.cos * (window_sin(s, h) + window_sin(d, h)))
}

/// `∫_{−h}^0 e^{−Js} B Bᵀ e^{Js} ds` from exact antiderivatives, for
/// rotation-block generators.
fn window_gramian(sys: &LosslessSystem, h: f64) -> Result<DMatrix<f64>> {
    let Some((pairs, fixed)) = sys.rotation_blocks() else {
        return Err(Error::Precondition(
            "closed-form window Gramian needs a rotation-block generator".into(),
        ));
    };
    let b = sys.coupling();
    let n = sys.dim();
    let mut terms = vec![
        TrigTerm {
            omega: 0.0,
            cos: 0.0,
            sin: 0.0
        };
        n
    ];
    for p in pairs {
        let (b1, b2) = (b[p.first], b[p.second]);
        // e^{−Js}(b1, b2) = (b1 cos ωs − b2 sin ωs, b1 sin ωs + b2 cos ωs).
        terms[p.first] = TrigTerm {
            omega: p.omega,
            cos: b1,
            sin: -b2,
        };
        terms[p.second] = TrigTerm {
            omega: p.omega,
            cos: b2,
            sin: b1,
        };
    }
    for &i in fixed.iter() {
        terms[i] = TrigTerm {
            omega: 0.0,
            cos: b[i],
            sin: 0.0,
        };
    }
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = window_product(terms[i], terms[j], h);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Initial covariance of `K_N` after white-noise input of intensity `i/h`
/// over `[−h, 0]`: `X = (2i/h)∫_{−h}^0 e^{−J_N s}B_N B_Nᵀe^{J_N s} ds`.
pub fn whitenoise_covariance(real: &HarmonicRealization, intensity: f64, h: f64) -> Result<DMatrix<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("window length must be positive, got {h}")));
    }
    if !intensity.is_finite() {
        return Err(Error::InvalidParameter("intensity must be finite".into()));
    }
    // The coupling vector is √2·B_N, which supplies the factor 2.
    Ok(window_gramian(real.system(), h)? * (intensity / h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdtStatus {
    Passed,
    Failed,
    SkippedNonThermal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdtRow {
    pub anchor: f64,
    pub lag: f64,
    pub covariance: f64,
    pub impulse: f64,
    pub defect: f64,
}

/// Fluctuation (covariance) against dissipation (impulse response).
#[derive(Debug, Clone, PartialEq)]
pub struct FdtReport {
    pub status: FdtStatus,
    pub temperature: Option<f64>,
    pub thermal: TemperatureCheck,
    pub rows: Vec<FdtRow>,
    pub max_defect: f64,
}

/// Checks `R(s, s+Δ)/T = Bᵀe^{JΔ}B` on the lags, at each anchor `s`, with
/// the impulse response taken from a free simulation started at `x₀ = B`.
pub fn fluctuation_dissipation_check(
    sys: impl AsRef<LosslessSystem>,
    x: &DMatrix<f64>,
    lags: &TimeGrid,
    anchors: &[f64],
) -> Result<FdtReport> {
    let sys = sys.as_ref();
    if lags.start() < 0.0 {
        return Err(Error::InvalidGrid("lags must be non-negative".into()));
    }
    let mut probe: Vec<f64> = anchors.to_vec();
    probe.extend(lags.times().iter().take(16));
    let thermal = check_temperature(sys, x, &probe)?;
    let Some(temperature) = thermal.temperature else {
        return Ok(FdtReport {
            status: FdtStatus::SkippedNonThermal,
            temperature: None,
            thermal,
            rows: Vec::new(),
            max_defect: f64::NAN,
        });
    };
    let mut sim_times = Vec::with_capacity(lags.len() + 1);
    if lags.start() > 0.0 {
        sim_times.push(0.0);
    }
    sim_times.extend_from_slice(lags.times());
    let offset = sim_times.len() - lags.len();
    let impulse = simulate_outputs(sys, &InputSignal::Zero, sys.coupling(), &TimeGrid::new(sim_times)?)?;
    let mut rows = Vec::with_capacity(anchors.len() * lags.len());
    for &s in anchors {
        for (k, &lag) in lags.times().iter().enumerate() {
            let r = covariance_exact(sys, x, s, s + lag)?;
            let h = impulse[offset + k];
            let defect = if temperature > 0.0 {
                (r / temperature - h).abs()
            } else {
                r.abs()
            };
            rows.push(FdtRow {
                anchor: s,
                lag,
                covariance: r,
                impulse: h,
                defect,
            });
        }
    }
    let max_defect = rows.iter().map(|r| r.defect).fold(0.0, f64::max);
    Ok(FdtReport {
        status: if max_defect <= THERMAL_TOLERANCE {
            FdtStatus::Passed
        } else {
            FdtStatus::Failed
        },
        temperature: Some(temperature),
        thermal,
        rows,
        max_defect,
    })
}

/// `∫_{−L}^{L} R(0, Δ) φ(Δ) dΔ`: pairs the lag covariance with a test
/// function. For `K_N` at temperature `T` it tends to `2Tk·φ(0)`.
pub fn lag_pairing<F>(sys: impl AsRef<LosslessSystem>, x: &DMatrix<f64>, phi: F, half_width: f64, panels: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let sys = sys.as_ref();
    let p0 = x * backward_coupling(sys, 0.0);
    let q = integrate(
        |lag| backward_coupling(sys, lag).dot(&p0) * phi(lag),
        -half_width,
        half_width,
        QuadratureOptions {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_segments: 50_000,
            initial_panels: panels.max(1),
        },
    );
    Ok(q.value)
}

/// `4TkB`: band-limited thermal variance with `B` in cycles per time unit.
pub fn johnson_nyquist_variance(temperature: f64, gain: f64, bandwidth: f64) -> f64 {
    4.0 * temperature * gain * bandwidth
}

/// Monte Carlo estimate of the band-limited output variance.
#[derive(Debug, Clone, PartialEq)]
pub struct BandLimitedVariance {
    pub variance: f64,
    pub stderr: f64,
    pub trials: usize,
    pub bandwidth: f64,
    pub window: f64,
    pub samples_per_path: usize,
    /// Number of non-negative frequency bins (including DC) in the band.
    pub passband_bins: usize,
}

fn in_band(bin: usize, samples: usize, window: f64, bandwidth: f64) -> bool {
    let k = bin.min(samples - bin);
    k as f64 / window <= bandwidth * (1.0 + 1e-12)
}

/// Variance of the `K_N` output (zero input) through an ideal brick-wall
/// low-pass that keeps `|f| ≤ bandwidth` cycles per time unit, i.e.
/// angular frequencies `|ω| ≤ 2π·bandwidth`.
///
/// Each trial samples one full period `2τ` of the free output and filters
/// it with a discrete Fourier transform; the period makes the transform
/// exact. The estimate is the ensemble mean of the time-averaged squared
/// filtered deviation.
pub fn band_limited_variance(real: &HarmonicRealization, spec: &EnsembleSpec, bandwidth: f64) -> Result<BandLimitedVariance> {
    if !(bandwidth >= 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidParameter(format!("bandwidth must be >= 0, got {bandwidth}")));
    }
    let sys = real.system();
    if spec.mean0.len() != sys.dim() {
        return Err(Error::DimensionMismatch("ensemble and realization dimensions differ".into()));
    }
    let window = 2.0 * real.tau();
    let samples = (4 * (real.harmonics() + 1)).max(64).next_power_of_two();
    let h = window / samples as f64;
    let times: Vec<f64> = (0..samples).map(|m| m as f64 * h).collect();
    let zeros = vec![0.0; samples];
    let fft = FftPlanner::<f64>::new().plan_fft_forward(samples);
    let kept: Vec<usize> = (0..samples).filter(|&m| in_band(m, samples, window, bandwidth)).collect();
    let per_trial: Vec<f64> = map_indexed(spec.trials, |j| {
        let dx = spec.sample_deviation(j);
        let mut buf: Vec<Complex<f64>> = Vec::with_capacity(samples);
        integrate_grid(sys.dynamics(), &dx, &times, &zeros, |_, x| buf.push(Complex::new(sys.output(x), 0.0)));
        fft.process(&mut buf);
        let power: Vec<f64> = kept.iter().map(|&m| buf[m].norm_sqr()).collect();
        pairwise_sum(&power) / (samples as f64 * samples as f64)
    });
    let (variance, stderr) = mean_and_stderr(&per_trial);
    Ok(BandLimitedVariance {
        variance,
        stderr,
        trials: spec.trials,
        bandwidth,
        window,
        samples_per_path: samples,
        passband_bins: kept.iter().filter(|&&m| m <= samples / 2).count(),
    })
}

/// Expected value of [`band_limited_variance`] for `X = T·I`: the constant
/// state contributes `Tk/τ` and each in-band harmonic `2Tk/τ`.
pub fn band_limited_variance_thermal(real: &HarmonicRealization, temperature: f64, bandwidth: f64) -> f64 {
    let window = 2.0 * real.tau();
    let base = temperature * real.gain() / real.tau();
    let in_band = (1..=real.harmonics())
        .filter(|&l| l as f64 / window <= bandwidth * (1.0 + 1e-12))
        .count();
    base * (1.0 + 2.0 * in_band as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::build_kn;
    use crate::lti::make_lossless;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn zero_covariance_gives_zero() {
        let r = build_kn(1.0, 10.0, 5).unwrap();
        let x = DMatrix::zeros(11, 11);
        assert_eq!(covariance_exact(&r, &x, 0.3, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn thermal_covariance_on_bare_system_is_stationary() {
        let sys = make_lossless(dmatrix![0.0, 1.0; -1.0, 0.0], dvector![1.0, 0.5]).unwrap();
        let x = DMatrix::identity(2, 2) * 0.7;
        for &(s, t) in &[(0.0, 1.0), (2.0, 3.0), (5.5, 6.5)] {
            let r = covariance_exact(&sys, &x, s, t).unwrap();
            assert!((r - 0.7 * sys.impulse_response(t - s)).abs() < 1e-14);
        }
    }

    #[test]
    fn equal_time_variance_of_kn() {
        // T·‖√2 B_N‖² = T·k(2N+1)/τ.
        let (k, tau, n, t) = (1.3, 7.0, 12, 0.4);
        let r = build_kn(k, tau, n).unwrap();
        let x = DMatrix::identity(2 * n + 1, 2 * n + 1) * t;
        let v = covariance_exact(&r, &x, 2.1, 2.1).unwrap();
        assert!((v - t * k * (2 * n + 1) as f64 / tau).abs() < 1e-13);
    }

    #[test]
    fn rejects_too_few_trials_and_bad_covariance() {
        assert!(EnsembleSpec::new(DVector::zeros(2), DMatrix::identity(2, 2), 1, 0).is_err());
        assert!(EnsembleSpec::new(DVector::zeros(2), dmatrix![1.0, 2.0; 0.0, 1.0], 10, 0).is_err());
        assert!(EnsembleSpec::new(DVector::zeros(2), dmatrix![1.0, 2.0; 2.0, 1.0], 10, 0).is_err());
        assert!(EnsembleSpec::new(DVector::zeros(3), DMatrix::identity(2, 2), 10, 0).is_err());
    }

    #[test]
    fn zero_covariance_ensemble_has_zero_variance() {
        let r = build_kn(1.0, 10.0, 4).unwrap();
        let spec = EnsembleSpec::new(DVector::zeros(9), DMatrix::zeros(9, 9), 20, 3).unwrap();
        let grid = TimeGrid::uniform(0.0, 5.0, 11).unwrap();
        let est = ensemble_simulate(&r, &spec, &InputSignal::sine(1.0), &grid).unwrap();
        assert!(est.covariance.amax() == 0.0);
    }

    #[test]
    fn sampling_is_reproducible_per_trial() {
        let spec = EnsembleSpec::thermal(5, Temperature::new(2.0).unwrap(), 10, 99).unwrap();
        assert_eq!(spec.sample(3), spec.sample(3));
        assert_ne!(spec.sample(3), spec.sample(4));
    }

    #[test]
    fn identity_covariance_is_thermal() {
        let r = build_kn(1.0, 10.0, 6).unwrap();
        let x = DMatrix::identity(13, 13) * 2.0;
        let probe = crate::numeric::linspace(0.0, 10.0, 9);
        let c = check_temperature(&r, &x, &probe).unwrap();
        assert!(c.is_thermal);
        assert!((c.temperature.unwrap() - 2.0).abs() < 1e-12);
        assert!(c.sufficient_condition());
        assert_eq!(c.coupling_eigenvalue, Some(2.0));
    }

    #[test]
    fn generic_diagonal_covariance_is_not_thermal() {
        let r = build_kn(1.0, 10.0, 6).unwrap();
        let x = DMatrix::from_diagonal(&DVector::from_fn(13, |i, _| (i + 1) as f64));
        let probe = crate::numeric::linspace(0.0, 10.0, 9);
        let c = check_temperature(&r, &x, &probe).unwrap();
        assert!(!c.is_thermal);
        assert_eq!(c.temperature, None);
        assert!(!c.commutes_with_generator);
    }

    #[test]
    fn maxent_substitution() {
        let (x, t) = maxent_covariance(10.5, 21).unwrap();
        assert_eq!(t.value(), 1.0);
        assert_eq!(x, DMatrix::identity(21, 21));
        let (x0, t0) = maxent_covariance(0.0, 5).unwrap();
        assert_eq!(t0.value(), 0.0);
        assert_eq!(x0, DMatrix::zeros(5, 5));
        assert!(maxent_covariance(-1.0, 3).is_err());
    }

    #[test]
    fn whitenoise_zero_intensity_is_zero() {
        let r = build_kn(1.0, PI, 3).unwrap();
        let x = whitenoise_covariance(&r, 0.0, 2.0 * PI).unwrap();
        assert_eq!(x.amax(), 0.0);
    }

    #[test]
    fn window_integrals_match_quadrature() {
        let a = TrigTerm { omega: 1.3, cos: 0.4, sin: -0.7 };
        let b = TrigTerm { omega: 2.9, cos: -1.1, sin: 0.25 };
        let h = 3.7;
        let f = |s: f64| (a.cos * (a.omega * s).cos() + a.sin * (a.omega * s).sin()) * (b.cos * (b.omega * s).cos() + b.sin * (b.omega * s).sin());
        let q = integrate(f, -h, 0.0, QuadratureOptions::default().with_panels(8));
        assert!((window_product(a, b, h) - q.value).abs() < 1e-13);
        let q = integrate(|s: f64| f(s) * 0.0 + (a.cos * (a.omega * s).cos() + a.sin * (a.omega * s).sin()).powi(2), -h, 0.0, QuadratureOptions::default().with_panels(8));
        assert!((window_product(a, a, h) - q.value).abs() < 1e-13);
    }

    #[test]
    fn non_thermal_covariance_skips_fdt() {
        let r = build_kn(1.0, 10.0, 3).unwrap();
        let x = DMatrix::from_diagonal(&DVector::from_fn(7, |i, _| (i + 1) as f64));
        let lags = TimeGrid::uniform(0.0, 5.0, 11).unwrap();
        let rep = fluctuation_dissipation_check(&r, &x, &lags, &[0.0]).unwrap();
        assert_eq!(rep.status, FdtStatus::SkippedNonThermal);
    }

    #[test]
    fn zero_temperature_fdt_has_both_sides_zero() {
        let r = build_kn(1.0, 10.0, 3).unwrap();
        let x = DMatrix::zeros(7, 7);
        let lags = TimeGrid::uniform(0.0, 5.0, 11).unwrap();
        let rep = fluctuation_dissipation_check(&r, &x, &lags, &[0.0, 1.0]).unwrap();
        assert_eq!(rep.status, FdtStatus::Passed);
        assert_eq!(rep.temperature, Some(0.0));
        assert!(rep.rows.iter().all(|r| r.covariance == 0.0));
    }

    #[test]
    fn thermal_band_prediction_counts_harmonics() {
        let r = build_kn(2.0, 10.0, 200).unwrap();
        // One period is 20 time units: harmonics 1..=20 sit at or below 1 cycle/unit.
        let v = band_limited_variance_thermal(&r, 0.5, 1.0);
        assert!((v - 0.1 * 41.0).abs() < 1e-12);
    }
}
