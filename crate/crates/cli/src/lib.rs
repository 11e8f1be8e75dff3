//! Command-line driver for the lossless-approximation experiments.
//!
//! [`run_from`] parses arguments, runs one subcommand into a locked output
//! directory and returns the process exit code:
//! 0 all checks passed, 1 a check failed, 2 usage error, 3 inconclusive.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use config::Params;
use error::CliError;
use output::OutputDir;

pub const THREADS_ENV: &str = "LOSSLESS_APPROX_THREADS";

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("LOSSLESS_GIT_DESCRIBE"), ")");

#[derive(Debug, Parser)]
#[command(name = "lossless-approx", version = VERSION, about = "Lossless approximation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Finite-harmonic approximation of a constant gain and its error bound.
    Approx,
    /// Thermal ensemble covariance and band-limited output variance.
    Noise,
    /// Maximum-entropy ensemble and white-noise equipartition.
    Equipartition,
    /// Lossless interconnection and the heat-bath closure.
    Interconnect,
    /// Measurement noise intensities across gains.
    Measure,
    /// Positive-real test, certificate and energy-extraction search.
    Certify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Approx => "approx",
            Command::Noise => "noise",
            Command::Equipartition => "equipartition",
            Command::Interconnect => "interconnect",
            Command::Measure => "measure",
            Command::Certify => "certify",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML configuration; flags take precedence over it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Base seed; trial j uses seed + j.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Monte Carlo trials.
    #[arg(long, global = true, value_name = "N")]
    pub trials: Option<usize>,
    /// Points of the evaluation grid.
    #[arg(long, global = true, value_name = "N")]
    pub grid_points: Option<usize>,
    /// Target L2 error of the certificate.
    #[arg(long, global = true, value_name = "F")]
    pub epsilon: Option<f64>,
    /// Approximation window length.
    #[arg(long, global = true, value_name = "F")]
    pub tau: Option<f64>,
    /// Harmonic counts N; a list where the command sweeps.
    #[arg(long, global = true, value_name = "N[,N...]", value_delimiter = ',')]
    pub harmonics: Option<Vec<usize>>,
    /// Band edge in cycles per time unit.
    #[arg(long, global = true, value_name = "F")]
    pub bandwidth: Option<f64>,
    /// Measurement gains, one run each.
    #[arg(long, global = true, value_name = "F[,F...]", value_delimiter = ',', allow_negative_numbers = true)]
    pub km: Option<Vec<f64>>,
    /// Bath temperature (energy units).
    #[arg(long, global = true, value_name = "F")]
    pub temperature: Option<f64>,
}

impl Flags {
    fn params(&self) -> Params {
        Params {
            seed: self.seed,
            out: self.out.clone(),
            trials: self.trials,
            grid_points: self.grid_points,
            epsilon: self.epsilon,
            tau: self.tau,
            harmonics: self.harmonics.clone(),
            bandwidth: self.bandwidth,
            km: self.km.clone(),
            temperature: self.temperature,
            ..Params::default()
        }
    }
}

/// Final parameters for `command`: config file layers, then flags.
pub fn resolve_params(command: Command, flags: &Flags) -> Result<Params, CliError> {
    let file = match &flags.config {
        Some(path) => config::load_file(path, command.name())?,
        None => Params::default(),
    };
    Ok(file.overlay(flags.params()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Outcome {
    Pass,
    Inconclusive,
    Fail,
}

impl Outcome {
    pub fn label(self) -> &'static str {
        match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Inconclusive => "INCONCLUSIVE",
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 1,
            Outcome::Inconclusive => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub outcome: Outcome,
    pub detail: String,
}

/// Checks and free-form notes gathered by a subcommand.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.push(name, if pass { Outcome::Pass } else { Outcome::Fail }, detail);
    }

    pub fn push(&mut self, name: &str, outcome: Outcome, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            outcome,
            detail: detail.into(),
        });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Worst outcome; a run without checks passes.
    pub fn outcome(&self) -> Outcome {
        self.checks.iter().map(|c| c.outcome).max().unwrap_or(Outcome::Pass)
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    // A second call in the same process finds the pool already built.
    if rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().is_err() {
        log::debug!("global thread pool already initialised");
    }
    Ok(())
}

fn render_report(command: Command, params: &Params, report: &Report, files: &[String], elapsed: f64) -> String {
    let mut s = String::new();
    s.push_str(&format!("lossless-approx {VERSION}\n"));
    s.push_str(&format!("command: {}\n\n[configuration]\n", command.name()));
    s.push_str(&params.to_toml());
    s.push_str("\n[checks]\n");
    for c in &report.checks {
        s.push_str(&format!("{:<13} {}: {}\n", c.outcome.label(), c.name, c.detail));
    }
    if !report.notes.is_empty() {
        s.push_str("\n[notes]\n");
        for n in &report.notes {
            s.push_str(&format!("{n}\n"));
        }
    }
    s.push_str("\n[files]\n");
    for f in files {
        s.push_str(&format!("{f}\n"));
    }
    s.push_str(&format!("\noverall: {}\nwall-clock: {elapsed:.3} s\n", report.outcome().label()));
    s
}

/// Runs one subcommand and returns its report; files go under `--out`.
pub fn execute(command: Command, flags: &Flags) -> Result<(Params, Report, PathBuf), CliError> {
    let started = Instant::now();
    configure_threads()?;
    let mut params = resolve_params(command, flags)?;
    let root = params.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    params.out = Some(root.clone());
    let mut out = OutputDir::acquire(&root)?;
    let mut report = Report::default();
    commands::run(command, &params, &mut out, &mut report)?;
    let mut files = out.written().to_vec();
    files.push("report.txt".to_string());
    let text = render_report(command, &params, &report, &files, started.elapsed().as_secs_f64());
    out.write_text("report.txt", &text)?;
    Ok((params, report, root))
}

/// Parses `args` (including the program name), runs, prints a summary
/// and returns the exit code.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command, &cli.flags) {
        Ok((_, report, root)) => {
            for c in &report.checks {
                println!("{:<13} {}: {}", c.outcome.label(), c.name, c.detail);
            }
            println!("results in {}", root.display());
            report.outcome().exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
