//! Command-line runner: argument parsing, configuration layering, the worker
//! pool and the exit-code contract.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser};

use crate::config::{split_pair, Assignment, ConfigError, RunConfig, Subcommand, OUT_ENV};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERIC: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "kknled", version, about = "Nonlinear electrodynamics from a five-dimensional Gauss-Bonnet term")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $KKNLED_OUT, else ./kknled-out).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 means one per core.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Override a config key, e.g. `--set steps=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, clap::Subcommand)]
pub enum Command {
    /// Compare the Gauss-Bonnet contraction with its closed form on random constant fields.
    CurvatureCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        draws: Option<u64>,
    },
    /// Evolve one of the built-in initial-data families in a periodic box.
    Evolve {
        #[command(flatten)]
        common: Common,
    },
    /// Successive approximations for static toroidal configurations.
    Static {
        #[command(flatten)]
        common: Common,
    },
    /// First-order far-field sources around a charge plus dipole.
    Asymptotics {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        qtotal: Option<f64>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        rmin: Option<f64>,
        #[arg(long)]
        rmax: Option<f64>,
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Tabulate half-integer degree Legendre functions.
    Legendre {
        #[command(flatten)]
        common: Common,
    },
}

fn flag<T: ToString>(out: &mut Vec<Assignment>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        out.push(Assignment { origin: format!("--{key}"), key: key.to_string(), value: v.to_string() });
    }
}

/// Resolves the configuration for a parsed command line. `env_out` is the
/// value of `KKNLED_OUT`, passed in so tests need not touch the process
/// environment.
pub fn resolve(cli: &Cli, env_out: Option<&str>) -> Result<RunConfig, ConfigError> {
    let (sub, common, mut extra) = match &cli.command {
        Command::CurvatureCheck { common, draws } => {
            let mut v = vec![];
            flag(&mut v, "draws", *draws);
            (Subcommand::CurvatureCheck, common, v)
        }
        Command::Evolve { common } => (Subcommand::Evolve, common, vec![]),
        Command::Static { common } => (Subcommand::Static, common, vec![]),
        Command::Asymptotics { common, qtotal, mu, rmin, rmax, samples } => {
            let mut v = vec![];
            flag(&mut v, "qtotal", *qtotal);
            flag(&mut v, "mu", *mu);
            flag(&mut v, "rmin", *rmin);
            flag(&mut v, "rmax", *rmax);
            flag(&mut v, "samples", *samples);
            (Subcommand::Asymptotics, common, v)
        }
        Command::Legendre { common } => (Subcommand::Legendre, common, vec![]),
    };
    let mut layers = match &common.config {
        Some(path) => config::read_file(path)?,
        None => vec![],
    };
    for s in &common.set {
        layers.push(split_pair(s, "--set")?);
    }
    flag(&mut layers, "out", common.out.as_ref().map(|p| p.display().to_string()));
    flag(&mut layers, "seed", common.seed);
    flag(&mut layers, "threads", common.threads);
    layers.append(&mut extra);
    RunConfig::resolve(sub, env_out, &layers)
}

/// Runs a resolved configuration inside a dedicated pool and writes the
/// manifest. Returns the files produced.
pub fn execute(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads()).build()?;
    let threads = pool.current_num_threads();
    let result = pool.install(|| commands::run(cfg, &dir));
    // the manifest is written even when the run fails part-way
    let files = match &result {
        Ok(f) => f.clone(),
        Err(_) => vec![],
    };
    output::write_manifest(&dir, cfg, threads, &files)?;
    result
}

/// Maps an error to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.is::<ConfigError>()) {
        EXIT_CONFIG
    } else {
        EXIT_NUMERIC
    }
}

/// Full entry point; prints errors to stderr and returns the exit code.
pub fn main_with<I, T>(args: I, env_out: Option<&str>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = resolve(&cli, env_out).map_err(anyhow::Error::from).and_then(|cfg| execute(&cfg));
    match outcome {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

pub fn env_out() -> Option<String> {
    std::env::var(OUT_ENV).ok()
}
