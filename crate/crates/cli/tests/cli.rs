use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command as Process;

use clap::Parser;
use lossless_cli::config::Params;
use lossless_cli::output::{parse_matrix, LOCK_FILE};
use lossless_cli::{resolve_params, Cli, Command, Flags};

fn binary() -> Process {
    Process::new(env!("CARGO_BIN_EXE_lossless-approx"))
}

fn exit_code(args: &[&str]) -> i32 {
    binary()
        .args(args)
        .env_remove("LOSSLESS_APPROX_THREADS")
        .output()
        .expect("binary runs")
        .status
        .code()
        .expect("exit code")
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).expect("csv file");
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn out(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

#[test]
fn exit_codes_follow_the_outcome() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(exit_code(&["approx", "--out", &out(dir.path(), "a")]), 0);
    assert_eq!(exit_code(&["noise", "--out", &out(dir.path(), "b")]), 2, "missing seed");
    assert_eq!(exit_code(&["approx", "--no-such-flag"]), 2);
    assert_eq!(exit_code(&["approx", "--tau", "-1", "--out", &out(dir.path(), "c")]), 2);
    assert_eq!(exit_code(&["measure", "--seed", "1", "--km", "1,-2", "--out", &out(dir.path(), "d")]), 2);

    let neg = dir.path().join("neg.toml");
    fs::write(&neg, "[certify]\nfamily = \"neg-exp\"\nbudget = 4\n").unwrap();
    let code = exit_code(&["certify", "--seed", "1", "--config", neg.to_str().unwrap(), "--out", &out(dir.path(), "e")]);
    assert_eq!(code, 1, "a non-positive-real response fails certification");

    // Samples ending at t = 2 cannot bound the tail needed for certification.
    let samples = dir.path().join("short.csv");
    let body: String = (0..=200).map(|i| format!("{},{}\n", i as f64 * 0.01, (-(i as f64) * 0.01).exp())).collect();
    fs::write(&samples, format!("t,g\n{body}")).unwrap();
    let cfg = dir.path().join("short.toml");
    fs::write(&cfg, format!("family = \"samples\"\nsamples = {:?}\nbudget = 2\n", samples.to_str().unwrap())).unwrap();
    let code = exit_code(&["certify", "--seed", "1", "--config", cfg.to_str().unwrap(), "--out", &out(dir.path(), "f")]);
    assert_eq!(code, 3);
}

#[test]
fn thread_cap_must_be_a_positive_integer() {
    let dir = tempfile::tempdir().unwrap();
    let status = binary()
        .args(["approx", "--harmonics", "5", "--out", &out(dir.path(), "t")])
        .env("LOSSLESS_APPROX_THREADS", "0")
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(2));
    let status = binary()
        .args(["approx", "--harmonics", "5", "--out", &out(dir.path(), "u")])
        .env("LOSSLESS_APPROX_THREADS", "1")
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
}

#[test]
fn flags_override_config_sections_which_override_top_level() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "seed = 5\ntrials = 10\ntau = 3.0\n[noise]\ntrials = 20\nbandwidth = 0.5\n[measure]\ntrials = 99\n",
    )
    .unwrap();
    let cli = Cli::try_parse_from(["x", "noise", "--config", cfg.to_str().unwrap(), "--trials", "30"]).unwrap();
    let p = resolve_params(Command::Noise, &cli.flags).unwrap();
    assert_eq!(p.trials, Some(30));
    assert_eq!(p.seed, Some(5));
    assert_eq!(p.tau, Some(3.0));
    assert_eq!(p.bandwidth, Some(0.5));

    let p = resolve_params(
        Command::Noise,
        &Flags {
            config: Some(cfg.clone()),
            ..Flags::default()
        },
    )
    .unwrap();
    assert_eq!(p.trials, Some(20));
    assert_eq!(Params::default().overlay(p.clone()), p);
}

#[test]
fn harmonics_and_gains_accept_comma_lists() {
    let cli = Cli::try_parse_from(["x", "approx", "--harmonics", "4,8,16", "--km", "0.5,2"]).unwrap();
    assert_eq!(cli.flags.harmonics, Some(vec![4, 8, 16]));
    assert_eq!(cli.flags.km, Some(vec![0.5, 2.0]));
    // Global flags may precede the subcommand.
    let cli = Cli::try_parse_from(["x", "--seed", "9", "measure"]).unwrap();
    assert_eq!(cli.flags.seed, Some(9));
}

#[test]
fn locked_output_directory_is_refused_and_lock_is_released() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join(LOCK_FILE), "12345\n").unwrap();
    let target = dir.path().display().to_string();
    assert_eq!(exit_code(&["approx", "--harmonics", "5", "--out", &target]), 2);
    assert!(!dir.path().join("approx_errors.csv").exists());

    fs::remove_file(dir.path().join(LOCK_FILE)).unwrap();
    assert_eq!(exit_code(&["approx", "--harmonics", "5", "--out", &target]), 0);
    assert!(!dir.path().join(LOCK_FILE).exists());
    assert!(dir.path().join("report.txt").exists());
}

#[test]
fn identical_seed_gives_identical_csv_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let target = out(dir.path(), name);
        let code = exit_code(&[
            "noise", "--seed", seed, "--harmonics", "20", "--trials", "300", "--grid-points", "5", "--out", &target,
        ]);
        assert_eq!(code, 0);
        fs::read(dir.path().join(name).join("noise_covariance.csv")).unwrap()
    };
    let (a, b, c) = (run("a", "11"), run("b", "11"), run("c", "12"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn bound_column_matches_independent_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let target = out(dir.path(), "approx");
    assert_eq!(exit_code(&["approx", "--harmonics", "0,10,40", "--tau", "6", "--out", &target]), 0);
    let table = rows(&dir.path().join("approx").join("approx_errors.csv"));
    assert_eq!(table.len(), 3);

    // N = 0 has an infinite coefficient and still a single, passing row.
    assert_eq!(table[0][0], "0");
    assert_eq!(table[0][1], "inf");
    assert_eq!(table[0][6], "true");

    // For u = 1 − cos t the bound is c(|sin t| + ∫_0^t |cos s| ds) with
    // c = 2kτ/(π²N); its sup on [0, 6] is taken over a fine midpoint sum.
    let (tau, m) = (6.0, 600_000);
    let h = tau / m as f64;
    let mut l1 = 0.0;
    let mut sup: f64 = 0.0;
    for i in 0..m {
        let t = (i as f64 + 1.0) * h;
        l1 += ((i as f64 + 0.5) * h).cos().abs() * h;
        sup = sup.max(t.sin().abs() + l1);
    }
    for row in &table[1..] {
        let n: f64 = row[0].parse().unwrap();
        let coef = 2.0 * tau / (PI * PI * n);
        let reported_coef: f64 = row[1].parse().unwrap();
        assert!((reported_coef - coef).abs() <= 1e-15 * coef);
        let sup_bound: f64 = row[3].parse().unwrap();
        assert!((sup_bound - coef * sup).abs() < 1e-4 * coef, "N = {n}: {sup_bound} vs {}", coef * sup);
        let sup_error: f64 = row[2].parse().unwrap();
        assert!(sup_error <= sup_bound);
    }
}

#[test]
fn output_files_use_declared_formats() {
    let dir = tempfile::tempdir().unwrap();
    let target = out(dir.path(), "eq");
    assert_eq!(exit_code(&["equipartition", "--harmonics", "3", "--out", &target]), 0);
    let root = dir.path().join("eq");
    let mat = fs::read_to_string(root.join("whitenoise_covariance.mat")).unwrap();
    assert!(mat.starts_with("7 7\n"));
    let x = parse_matrix(&mat).unwrap();
    assert_eq!(x.nrows(), 7);
    assert!((x[(3, 3)] - 0.1).abs() < 1e-15);

    let csv = fs::read(root.join("equipartition_fdt.csv")).unwrap();
    assert!(csv.windows(2).any(|w| w == b"\r\n"), "CRLF record terminator");
    let header = String::from_utf8_lossy(&csv).lines().next().unwrap().to_string();
    assert!(header.split(',').all(|h| h.contains('[') && h.ends_with(']')), "{header}");

    let report = fs::read_to_string(root.join("report.txt")).unwrap();
    assert!(report.contains(env!("CARGO_PKG_VERSION")));
    assert!(report.contains("overall: PASS"));
    assert!(report.contains("settings: EquipartitionSettings"));

    let target = out(dir.path(), "ap");
    assert_eq!(exit_code(&["approx", "--harmonics", "7", "--grid-points", "11", "--out", &target]), 0);
    let curve = fs::read_to_string(dir.path().join("ap").join("approx_error_N7.dat")).unwrap();
    let mut lines = curve.lines();
    assert!(lines.next().unwrap().starts_with('#'));
    let data: Vec<&str> = lines.collect();
    assert_eq!(data.len(), 11);
    assert!(data.iter().all(|l| l.split(' ').count() == 2));
}
