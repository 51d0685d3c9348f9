use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kknled_cli::config::{RunConfig, Subcommand};
use kknled_cli::{resolve, Cli, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK};

use clap::Parser;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_kknled"));
    c.env_remove("KKNLED_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    v.sort();
    v
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (h, rows) = read_csv(path);
    let i = h.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name} in {h:?}"));
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

const THIN_PLANE: &[&str] = &["--set", "nx=32", "--set", "ny=4", "--set", "nz=4", "--set", "ly=0.125", "--set", "lz=0.125"];

#[test]
fn curvature_check_writes_one_row_per_draw() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let o = run(&["curvature-check", "--draws", "100", "--seed", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    let (header, rows) = read_csv(&out.join("curvature_check.csv"));
    assert_eq!(&header[..4], ["draw", "gauss_bonnet", "i2_closed_form", "relative_error"]);
    assert_eq!(rows.len(), 100);
    assert!(column(&out.join("curvature_check.csv"), "relative_error").iter().all(|e| *e <= 1e-10));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains(&format!("tool = kknled {}", env!("CARGO_PKG_VERSION"))));
    assert!(manifest.contains("seed = 7"));
    assert!(manifest.contains("draws = 100"));
}

#[test]
fn plane_wave_period_reports_error_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e");
    let mut args = vec!["evolve", "--out", out.to_str().unwrap(), "--set", "stencil=sixth", "--set", "amplitude=1"];
    args.extend_from_slice(THIN_PLANE);
    // CFL 0.4 at n = 32 makes one period exactly 80 steps
    args.extend_from_slice(&["--set", "steps=80", "--set", "cadence=40"]);
    let o = run(&args);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    let csv = out.join("diagnostics.csv");
    let t = column(&csv, "t");
    let err = column(&csv, "l2_error");
    assert_eq!(t.len(), 3);
    assert!((t[2] - 1.0).abs() < 1e-12);
    assert!(err[2] > 0.0 && err[2] < 1e-4, "error after one period {}", err[2]);
    assert!(column(&csv, "total_charge").iter().all(|q| *q == 0.0));
    assert!(out.join("snapshot_000080.bin").exists());
}

#[test]
fn static_zero_seed_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = run(&["static", "--out", out.to_str().unwrap(), "--set", "modes=none"]);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    let it = out.join("static_iterations.csv");
    assert!(column(&it, "trivial").iter().all(|v| *v == 1.0));
    assert!(column(&it, "certified_smooth").iter().all(|v| *v == 0.0));
    assert!(column(&out.join("static_modes.csv"), "max_abs").iter().all(|v| *v == 0.0));
    assert!(column(&out.join("charge_profile.csv"), "q").iter().all(|v| *v == 0.0));
}

#[test]
fn config_file_flags_and_environment_layer_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let file_out = dir.path().join("from-file");
    fs::write(&cfg, format!("# comment line\ndraws = 5   # trailing comment\n\nout = {}\nseed = 3\n", file_out.display())).unwrap();

    // file beats the environment
    let o = bin().env("KKNLED_OUT", dir.path().join("env")).args(["curvature-check", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    assert_eq!(read_csv(&file_out.join("curvature_check.csv")).1.len(), 5);

    // --set beats the file, dedicated flags beat --set
    let o = run(&["curvature-check", "--config", cfg.to_str().unwrap(), "--set", "draws=6", "--set", "seed=4", "--seed", "9"]);
    assert_eq!(code(&o), EXIT_OK);
    assert_eq!(read_csv(&file_out.join("curvature_check.csv")).1.len(), 6);
    assert!(fs::read_to_string(file_out.join("manifest.txt")).unwrap().contains("seed = 9"));

    // environment replaces the built-in default
    let env_out = dir.path().join("env");
    let o = bin().env("KKNLED_OUT", &env_out).args(["legendre", "--set", "mu_points=3"]).output().unwrap();
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    assert!(env_out.join("legendre.csv").exists());
}

/// Precedence table checked without touching the filesystem.
#[test]
fn precedence_table() {
    let parse = |args: &[&str]| {
        let mut full = vec!["kknled"];
        full.extend_from_slice(args);
        resolve(&Cli::parse_from(full), Some("env-dir")).unwrap()
    };
    let c: RunConfig = parse(&["asymptotics", "--qtotal", "1", "--mu", "2"]);
    assert_eq!(c.subcommand, Subcommand::Asymptotics);
    assert_eq!((c.f64("qtotal"), c.f64("mu"), c.text("out")), (1.0, 2.0, "env-dir"));
    let c = parse(&["asymptotics", "--set", "qtotal=5", "--qtotal", "1", "--mu", "2", "--out", "flag-dir"]);
    assert_eq!((c.f64("qtotal"), c.text("out")), (1.0, "flag-dir"));
    let c = parse(&["asymptotics", "--set", "qtotal=5", "--set", "mu=3"]);
    assert_eq!((c.f64("qtotal"), c.f64("mu")), (5.0, 3.0));
}

#[test]
fn config_errors_exit_with_distinct_messages() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "epsilno=1\n").unwrap();
    let unknown = run(&["evolve", "--out", out, "--config", cfg.to_str().unwrap()]);
    let mismatch = run(&["evolve", "--out", out, "--set", "steps=ten"]);
    let missing = run(&["asymptotics", "--out", out, "--mu", "1"]);
    let invalid = run(&["evolve", "--out", out, "--set", "scenario=nothing"]);
    let messages: Vec<String> = [&unknown, &mismatch, &missing, &invalid]
        .iter()
        .map(|o| {
            assert_eq!(code(o), EXIT_CONFIG, "{}", stderr(o));
            stderr(o)
        })
        .collect();
    assert!(messages[0].contains("unknown key `epsilno`") && messages[0].contains("bad.cfg:1"));
    assert!(messages[1].contains("expects a non-negative integer"));
    assert!(messages[2].contains("missing required key `qtotal`"));
    assert!(messages[3].contains("unknown scenario"));
    assert_eq!(code(&run(&["no-such-command"])), EXIT_CONFIG);
    assert_eq!(code(&run(&["evolve", "--config", "/nonexistent/kknled.cfg"])), EXIT_CONFIG);
}

#[test]
fn numeric_blow_up_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = run(&[
        "evolve", "--out", out.to_str().unwrap(),
        "--set", "nx=8", "--set", "ny=8", "--set", "nz=8", "--set", "scenario=parallel_pulse",
        "--set", "amplitude=1e150", "--set", "dt=1", "--set", "steps=20",
    ]);
    assert_eq!(code(&o), EXIT_NUMERIC);
    assert!(stderr(&o).contains("non-finite"));
    assert!(out.join("manifest.txt").exists());
}

#[test]
fn every_csv_has_a_header_and_every_run_one_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["curvature-check", "--draws", "3"],
        vec!["asymptotics", "--qtotal", "1", "--mu", "1"],
        vec!["legendre", "--set", "mu_points=2"],
        vec!["static", "--set", "iterations=1", "--set", "mu_points=64"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let out = dir.path().join(i.to_string());
        let mut a = args.clone();
        a.extend_from_slice(&["--out", out.to_str().unwrap()]);
        let o = run(&a);
        assert_eq!(code(&o), EXIT_OK, "{args:?}: {}", stderr(&o));
        let manifests = fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().file_name() == "manifest.txt").count();
        assert_eq!(manifests, 1);
        for csv in csv_files(&out) {
            let (h, rows) = read_csv(&csv);
            assert!(h.iter().all(|c| !c.is_empty() && c.parse::<f64>().is_err()), "{csv:?} header {h:?}");
            assert!(rows.iter().all(|r| r.len() == h.len()));
        }
    }
}

#[test]
fn outputs_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut evolve = vec!["evolve", "--set", "scenario=quadruplet_seed", "--set", "steps=4", "--set", "cadence=2"];
    evolve.extend_from_slice(&["--set", "nx=12", "--set", "ny=12", "--set", "nz=12"]);
    let cases: Vec<Vec<&str>> = vec![
        vec!["curvature-check", "--draws", "50", "--seed", "42"],
        vec!["asymptotics", "--qtotal", "1.5", "--mu", "0.5"],
        vec!["static", "--set", "iterations=2", "--set", "mu_points=96"],
        evolve,
    ];
    for (i, args) in cases.iter().enumerate() {
        let mut seen: Option<Vec<Vec<u8>>> = None;
        for threads in ["1", "3", "1"] {
            let out = dir.path().join(format!("{i}-{threads}"));
            let mut a = args.clone();
            a.extend_from_slice(&["--threads", threads, "--out", out.to_str().unwrap()]);
            let o = run(&a);
            assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
            let bytes: Vec<Vec<u8>> = csv_files(&out).iter().map(|p| fs::read(p).unwrap()).collect();
            assert!(!bytes.is_empty());
            match &seen {
                Some(prev) => assert!(prev == &bytes, "{args:?} differs with {threads} threads"),
                None => seen = Some(bytes),
            }
        }
    }
}
