//! Lossless/causal state-space approximations of dissipative linear
//! systems.
//!
//! * [`lti`]: skew-symmetric systems, energy, work rate, simulation.
//! * [`harmonic`]: the harmonic realization `K_N` of a memoryless gain and
//!   its pointwise error bound.
//! * [`ensemble`]: initial-state uncertainty, temperature, equipartition,
//!   thermal noise and the fluctuation-dissipation identity.
//! * [`interconnect`]: physical interconnection, heat-bath closure and the
//!   measurement back-action model.
//! * [`memory`]: positive-real checks, cosine-series certificates and
//!   lossless approximations of systems with memory.

pub mod ensemble;
pub mod error;
pub mod harmonic;
pub mod interconnect;
pub mod lti;
pub mod memory;
pub mod numeric;

pub use ensemble::{
    check_temperature, covariance_exact, ensemble_simulate, fluctuation_dissipation_check, maxent_covariance,
    whitenoise_covariance, EnsembleSpec, Temperature,
};
pub use error::{Error, Result};
pub use harmonic::{apply_kn, build_kn, prop1_bound, ErrorBoundReport, HarmonicRealization};
pub use interconnect::{connect_heat_bath, interconnect, measure, simulate_noisy, HeatBath, NoisyLinearSystem};
pub use lti::{make_lossless, simulate, work_rate, InputSignal, LosslessSystem, TimeGrid, Trajectory};

pub use memory::{
    build_certificate, check_positive_real, falsify_if_direction, fourier_coeffs, ApproximationCertificate,
    ImpulseResponse,
};
pub use nalgebra::{DMatrix, DVector};
