//! Experiment configuration.
//!
//! A TOML file holds top-level keys shared by all subcommands and optional
//! `[approx]`, `[noise]`, `[equipartition]`, `[interconnect]`, `[measure]`
//! and `[certify]` tables. Precedence, lowest first: built-in defaults,
//! top-level keys, the subcommand's table, command-line flags.
//!
//! ```toml
//! seed = 7
//! out = "results"
//!
//! [approx]
//! harmonics = [25, 50, 100, 200]
//!
//! [certify]
//! family = "exp"
//! epsilon = 0.05
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SUBCOMMANDS: [&str; 6] = ["approx", "noise", "equipartition", "interconnect", "measure", "certify"];

/// Every configurable parameter; `None` means "not set at this layer".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub trials: Option<usize>,
    pub grid_points: Option<usize>,
    pub epsilon: Option<f64>,
    pub tau: Option<f64>,
    pub harmonics: Option<Vec<usize>>,
    pub bandwidth: Option<f64>,
    pub km: Option<Vec<f64>>,
    pub temperature: Option<f64>,
    /// Dissipative gain `k` (bath strength for `interconnect`).
    pub gain: Option<f64>,
    /// Angular frequency `ω` of the input `1 − cos(ωt)` for `approx`.
    pub input_omega: Option<f64>,
    pub energy: Option<f64>,
    pub dim: Option<usize>,
    /// White-noise intensity `i` for `equipartition`.
    pub intensity: Option<f64>,
    pub step: Option<f64>,
    pub steps: Option<usize>,
    /// Simulation end time for `interconnect`, requested τ for `certify`.
    pub horizon: Option<f64>,
    pub shell_harmonics: Option<usize>,
    /// `exp`, `neg-exp`, `damped-cos`, `zero` or `samples`.
    pub family: Option<String>,
    pub amplitude: Option<f64>,
    pub rate: Option<f64>,
    pub frequency: Option<f64>,
    /// Two-column CSV `t,g` for `family = "samples"`.
    pub samples: Option<PathBuf>,
    pub budget: Option<usize>,
    /// Input horizon `T` of the energy-extraction search.
    pub falsifier_horizon: Option<f64>,
    pub omega_max: Option<f64>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),* $(,)?) => {
        Params { $($field: $top.$field.or($base.$field)),* }
    };
}

impl Params {
    /// Fields set in `top` win over those in `self`.
    pub fn overlay(self, top: Params) -> Params {
        overlay!(
            self, top, seed, out, trials, grid_points, epsilon, tau, harmonics, bandwidth, km, temperature, gain,
            input_omega, energy, dim, intensity, step, steps, horizon, shell_harmonics, family, amplitude, rate,
            frequency, samples, budget, falsifier_horizon, omega_max,
        )
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}

/// Reads `path` and returns the layers that apply to `command`.
pub fn load_file(path: &Path, command: &str) -> Result<Params, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text, command)
}

pub fn parse_config(text: &str, command: &str) -> Result<Params, CliError> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Usage(format!("config is not valid TOML: {e}")))?;
    let mut section = None;
    for name in SUBCOMMANDS {
        if let Some(value) = table.remove(name) {
            if name == command {
                section = Some(value);
            }
        }
    }
    let common: Params = toml::Value::Table(table)
        .try_into()
        .map_err(|e| CliError::Usage(format!("config: {e}")))?;
    let specific: Params = match section {
        Some(v) => v
            .try_into()
            .map_err(|e| CliError::Usage(format!("config [{command}]: {e}")))?,
        None => Params::default(),
    };
    Ok(common.overlay(specific))
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("{name} must be positive, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<f64, CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("{name} must be non-negative, got {v}")))
    }
}

fn seed(p: &Params, command: &str) -> Result<u64, CliError> {
    p.seed
        .ok_or_else(|| CliError::Usage(format!("`{command}` is stochastic and needs --seed (or `seed` in the config)")))
}

fn trials(v: usize) -> Result<usize, CliError> {
    if v < 2 {
        Err(CliError::Usage(format!("trials must be at least 2, got {v}")))
    } else {
        Ok(v)
    }
}

fn grid_points(v: usize) -> Result<usize, CliError> {
    if v < 2 {
        Err(CliError::Usage(format!("grid-points must be at least 2, got {v}")))
    } else {
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxSettings {
    pub gain: f64,
    pub tau: f64,
    pub harmonics: Vec<usize>,
    pub input_omega: f64,
    pub grid_points: usize,
}

impl ApproxSettings {
    pub fn resolve(p: &Params) -> Result<Self, CliError> {
        let mut harmonics = p.harmonics.clone().unwrap_or_else(|| vec![25, 50, 100, 200]);
        if harmonics.is_empty() {
            return Err(CliError::Usage("harmonics list is empty".into()));
        }
        harmonics.sort_unstable();
        harmonics.dedup();
        Ok(Self {
            gain: positive("gain", p.gain.unwrap_or(1.0))?,
            tau: positive("tau", p.tau.unwrap_or(10.0))?,
            harmonics,
            input_omega: positive("input_omega", p.input_omega.unwrap_or(1.0))?,
            grid_points: grid_points(p.grid_points.unwrap_or(2001))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSettings {
    pub gain: f64,
    pub tau: f64,
    pub harmonics: usize,
    pub temperature: f64,
    pub bandwidth: f64,
    pub trials: usize,
    pub grid_points: usize,
    pub seed: u64,
}

impl NoiseSettings {
    pub fn resolve(p: &Params) -> Result<Self, CliError> {
        Ok(Self {
            gain: positive("gain", p.gain.unwrap_or(2.0))?,
            tau: positive("tau", p.tau.unwrap_or(10.0))?,
            harmonics: single_harmonics(p, 200)?,
            temperature: non_negative("temperature", p.temperature.unwrap_or(0.5))?,
            bandwidth: non_negative("bandwidth", p.bandwidth.unwrap_or(1.0))?,
            trials: trials(p.trials.unwrap_or(10_000))?,
            grid_points: grid_points(p.grid_points.unwrap_or(11))?,
            seed: seed(p, "noise")?,
        })
    }
}

fn single_harmonics(p: &Params, default: usize) -> Result<usize, CliError> {
    match p.harmonics.as_deref() {
        None => Ok(default),
        Some([n]) => Ok(*n),
        Some(list) => Err(CliError::Usage(format!("expected one harmonic count, got {list:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquipartitionSettings {
    pub energy: f64,
    pub dim: usize,
    pub gain: f64,
    pub tau: f64,
    pub harmonics: usize,
    pub intensity: f64,
}

impl EquipartitionSettings {
    pub fn resolve(p: &Params) -> Result<Self, CliError> {
        let dim = p.dim.unwrap_or(21);
        if dim == 0 {
            return Err(CliError::Usage("dim must be positive".into()));
        }
        Ok(Self {
            energy: non_negative("energy", p.energy.unwrap_or(10.5))?,
            dim,
            gain: positive("gain", p.gain.unwrap_or(1.0))?,
            tau: positive("tau", p.tau.unwrap_or(10.0))?,
            harmonics: single_harmonics(p, 10)?,
            intensity: non_negative("intensity", p.intensity.unwrap_or(1.0))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterconnectSettings {
    pub gain: f64,
    pub temperature: f64,
    pub tau: f64,
    pub shell_harmonics: usize,
    pub step: f64,
    pub horizon: f64,
    pub trials: usize,
    pub seed: u64,
}

impl InterconnectSettings {
    pub fn resolve(p: &Params) -> Result<Self, CliError> {
        let s = Self {
            gain: positive("gain", p.gain.unwrap_or(1.0))?,
            temperature: non_negative("temperature", p.temperature.unwrap_or(0.5))?,
            tau: positive("tau", p.tau.unwrap_or(20.0))?,
            shell_harmonics: p.shell_harmonics.unwrap_or(200),
            step: positive("step", p.step.unwrap_or(0.01))?,
            horizon: positive("horizon", p.horizon.unwrap_or(5.0))?,
            trials: trials(p.trials.unwrap_or(2000))?,
            seed: seed(p, "interconnect")?,
        };
        if s.horizon / s.step > 1e7 {
            return Err(CliError::Usage("horizon/step exceeds 1e7 steps".into()));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSettings {
    pub km: Vec<f64>,
    pub temperature: f64,
    pub step: f64,
    pub steps: usize,
    pub seed: u64,
}

impl MeasureSettings {
    pub fn resolve(p: &Params) -> Result<Self, CliError> {
        let km = p.km.clone().unwrap_or_else(|| vec![0.1, 1.0, 10.0]);
        if km.is_empty() {
            return Err(CliError::Usage("km list is empty".into()));
        }
        for k in &km {
            positive("km", *k)?;
        }
        let steps = p.steps.unwrap_or(100_000);
        if steps < 2 {
            return Err(CliError::Usage("steps must be at least 2".into()));
        }
        Ok(Self {
            km,
            temperature: non_negative("temperature", p.temperature.unwrap_or(1.0))?,
            step: positive("step", p.step.unwrap_or(1e-3))?,
            steps,
            seed: seed(p, "measure")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Exponential { amplitude: f64, rate: f64 },
    DampedCosine { amplitude: f64, rate: f64, frequency: f64 },
    Zero,
    Samples(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifySettings {
    pub family: Family,
    pub epsilon: f64,
    pub horizon: f64,
    pub omega_max: f64,
    pub grid_points: usize,
    pub budget: usize,
    pub falsifier_horizon: f64,
    pub seed: u64,
}

impl CertifySettings {
    pub fn resolve(p: &Params) -> Result<Self, CliError> {
        let amplitude = p.amplitude.unwrap_or(1.0);
        let rate = p.rate.unwrap_or(1.0);
        let family = match p.family.as_deref().unwrap_or("exp") {
            "exp" => Family::Exponential { amplitude, rate },
            "neg-exp" => Family::Exponential {
                amplitude: -amplitude,
                rate,
            },
            "damped-cos" => Family::DampedCosine {
                amplitude,
                rate,
                frequency: p.frequency.unwrap_or(1.0),
            },
            "zero" => Family::Zero,
            "samples" => Family::Samples(
                p.samples
                    .clone()
                    .ok_or_else(|| CliError::Usage("family = samples needs `samples = PATH`".into()))?,
            ),
            other => {
                return Err(CliError::Usage(format!(
                    "unknown family `{other}` (exp, neg-exp, damped-cos, zero, samples)"
                )))
            }
        };
        let budget = p.budget.unwrap_or(1000);
        if budget == 0 {
            return Err(CliError::Usage("budget must be at least 1".into()));
        }
        Ok(Self {
            family,
            epsilon: positive("epsilon", p.epsilon.unwrap_or(0.05))?,
            horizon: positive("horizon", p.horizon.or(p.tau).unwrap_or(5.0))?,
            omega_max: positive("omega_max", p.omega_max.unwrap_or(50.0))?,
            grid_points: grid_points(p.grid_points.unwrap_or(201))?,
            budget,
            falsifier_horizon: positive("falsifier_horizon", p.falsifier_horizon.unwrap_or(2.0))?,
            seed: seed(p, "certify")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn section_overrides_top_level() {
        let p = parse_config("seed = 1\ntrials = 10\n[noise]\ntrials = 20\n[measure]\ntrials = 30\n", "noise").unwrap();
        assert_eq!(p.seed, Some(1));
        assert_eq!(p.trials, Some(20));
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        assert!(matches!(parse_config("sed = 1\n", "noise"), Err(CliError::Usage(_))));
    }

    #[test]
    fn stochastic_commands_need_a_seed() {
        assert!(NoiseSettings::resolve(&Params::default()).is_err());
        assert!(ApproxSettings::resolve(&Params::default()).is_ok());
    }

    #[test]
    fn rejects_single_trial_and_bad_gain() {
        let p = Params {
            seed: Some(1),
            trials: Some(1),
            ..Default::default()
        };
        assert!(NoiseSettings::resolve(&p).is_err());
        let p = Params {
            seed: Some(1),
            km: Some(vec![1.0, 0.0]),
            ..Default::default()
        };
        assert!(MeasureSettings::resolve(&p).is_err());
    }
}
