//! The five subcommands. Each writes its tables into the output directory
//! and returns the paths it produced.

use std::path::{Path, PathBuf};

use anyhow::Result;
use kknled_core::asymptotics::{self, ZerothOrderParams};
use kknled_core::curvature::{assemble_curvature, gauss_bonnet, i2_closed_form};
use kknled_core::evolution::{
    self, diagnostics, init_scenario, plane_wave_error, rk4_step, stable_dt, ConservationMonitor, DiagnosticsRecord,
    ScenarioConfig,
};
use kknled_core::grid::Snapshot;
use kknled_core::special::{toroidal_with_derivative, LegendreKind};
use kknled_core::toroidal::{
    self, consistent_degree, ApproximationConfig, FnProfile, HarmonicProfile, Parity, Radial, RadialProfile,
    StaticAnsatz, ToroidalMode,
};
use kknled_core::{CouplingParams, FieldTensor4, GridSpec, Stencil, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig, Subcommand};
use crate::output::{Cell, CsvWriter};

/// A run that finished but missed one of its own acceptance thresholds.
#[derive(Debug, Error)]
#[error("{what} = {value:e} exceeds the limit {limit:e}")]
pub struct ThresholdError {
    pub what: String,
    pub value: f64,
    pub limit: f64,
}

pub const GAUSS_BONNET_TOL: f64 = 1e-10;
pub const SCALAR_CURVATURE_TOL: f64 = 1e-13;
pub const SHAPE_RATIO_TOL: f64 = 1e-8;
pub const SLOPE_TOL: f64 = 0.1;
pub const WRONSKIAN_TOL: f64 = 1e-12;

fn invalid(key: &str) -> impl FnOnce(kknled_core::Error) -> ConfigError + '_ {
    move |e| ConfigError::Invalid { key: key.to_string(), reason: e.to_string() }
}

fn check(what: &str, value: f64, limit: f64) -> Result<()> {
    if value <= limit {
        Ok(())
    } else {
        Err(ThresholdError { what: what.to_string(), value, limit }.into())
    }
}

pub fn run(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    match cfg.subcommand {
        Subcommand::CurvatureCheck => curvature_check(cfg, dir),
        Subcommand::Evolve => evolve(cfg, dir),
        Subcommand::Static => static_report(cfg, dir),
        Subcommand::Asymptotics => asymptotics(cfg, dir),
        Subcommand::Legendre => legendre(cfg, dir),
    }
}

fn curvature_check(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let amp = cfg.f64("amplitude");
    if amp <= 0.0 {
        return Err(ConfigError::Invalid { key: "amplitude".into(), reason: "must be positive".into() }.into());
    }
    // draws are generated serially so the stream does not depend on the pool
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
    let mut sample = || Vec3::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp), rng.gen_range(-amp..amp));
    let fields: Vec<(Vec3, Vec3)> = (0..cfg.usize("draws")).map(|_| (sample(), sample())).collect();
    let rows: Vec<[f64; 6]> = fields
        .par_iter()
        .map(|&(e, b)| {
            let f = FieldTensor4::from_eb(e, b);
            let c = assemble_curvature(&f);
            let (gb, i2) = (gauss_bonnet(&c), i2_closed_form(&f));
            let maxwell = 0.5 * (e.norm_sq() - b.norm_sq());
            let rel = (gb - i2).abs() / i2.abs().max(1.0);
            let scalar_err = (c.scalar - maxwell).abs() / maxwell.abs().max(1.0);
            [gb, i2, rel, c.scalar, maxwell, scalar_err]
        })
        .collect();

    let path = dir.join("curvature_check.csv");
    let mut w = CsvWriter::create(
        &path,
        &["draw", "gauss_bonnet", "i2_closed_form", "relative_error", "scalar_curvature", "maxwell_lagrangian", "scalar_error"],
    )?;
    for (i, r) in rows.iter().enumerate() {
        let mut cells = vec![Cell::from(i)];
        cells.extend(r.iter().map(|&v| Cell::from(v)));
        w.row(&cells)?;
    }
    let files = vec![w.finish()?];
    let worst = rows.iter().fold(0.0_f64, |m, r| m.max(r[2]));
    let worst_scalar = rows.iter().fold(0.0_f64, |m, r| m.max(r[5]));
    check("max Gauss-Bonnet relative error", worst, GAUSS_BONNET_TOL)?;
    check("max scalar-curvature error", worst_scalar, SCALAR_CURVATURE_TOL)?;
    Ok(files)
}

fn parse_stencil(name: &str) -> Result<Stencil, ConfigError> {
    Stencil::ALL
        .into_iter()
        .find(|s| stencil_name(*s) == name)
        .ok_or_else(|| ConfigError::Invalid {
            key: "stencil".into(),
            reason: format!("`{name}` is not one of second, fourth, sixth, eighth"),
        })
}

fn stencil_name(s: Stencil) -> &'static str {
    match s.order() {
        2 => "second",
        4 => "fourth",
        6 => "sixth",
        _ => "eighth",
    }
}

fn coupling(cfg: &RunConfig) -> Result<CouplingParams, ConfigError> {
    let a = if cfg.subcommand == Subcommand::Static { cfg.f64("a") } else { 1.0 };
    CouplingParams::new(cfg.f64("epsilon"), cfg.f64("e2"), a).map_err(invalid("epsilon"))
}

fn evolve(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let grid = GridSpec::new(
        cfg.usize("nx"),
        cfg.usize("ny"),
        cfg.usize("nz"),
        cfg.f64("lx"),
        cfg.f64("ly"),
        cfg.f64("lz"),
    )
    .map_err(invalid("nx"))?;
    let params = coupling(cfg)?;
    let stencil = parse_stencil(cfg.text("stencil"))?;
    let scenario = cfg.text("scenario");
    let modes = u32::try_from(cfg.u64("modes")).map_err(|_| ConfigError::Invalid { key: "modes".into(), reason: "too large".into() })?;
    let sc = ScenarioConfig {
        amplitude: cfg.f64("amplitude"),
        width: cfg.f64("width"),
        ratio: cfg.f64("ratio"),
        modes,
        tube: cfg.bool("tube"),
        flip_e: cfg.bool("flip_e"),
        flip_b: cfg.bool("flip_b"),
    };
    let mut state = init_scenario(scenario, grid, params, stencil, &sc).map_err(invalid("scenario"))?;
    let dt = match cfg.opt_f64("dt") {
        Some(dt) => dt,
        None => stable_dt(&grid, cfg.f64("cfl")),
    };
    if dt <= 0.0 {
        return Err(ConfigError::Invalid { key: "dt".into(), reason: "time step must be positive".into() }.into());
    }
    let centre = grid.center();
    let origin = Vec3::new(
        cfg.opt_f64("origin_x").unwrap_or(centre.x()),
        cfg.opt_f64("origin_y").unwrap_or(centre.y()),
        cfg.opt_f64("origin_z").unwrap_or(centre.z()),
    );
    let steps = cfg.u64("steps");
    let cadence = cfg.u64("cadence").max(1);
    let snap_every = cfg.u64("snapshot_every");
    let plane = scenario == "plane_wave";

    let mut header: Vec<&str> = DiagnosticsRecord::HEADER.to_vec();
    if plane {
        header.push("l2_error");
    }
    let csv = dir.join("diagnostics.csv");
    let mut w = CsvWriter::create(&csv, &header)?;
    let mut files = vec![];
    let mut monitor = ConservationMonitor::new();
    let snapshot = |state: &evolution::SimState, files: &mut Vec<PathBuf>| -> Result<()> {
        let p = dir.join(format!("snapshot_{:06}.bin", state.step));
        Snapshot::from_fields(&[&state.d, &state.b])?.write_file(&p)?;
        files.push(p);
        Ok(())
    };
    let mut record = |state: &evolution::SimState, res| -> Result<()> {
        let rec = diagnostics(state, res, origin)?;
        let mut cells = vec![Cell::from(rec.step)];
        cells.extend(rec.values().iter().map(|&v| Cell::from(v)));
        if plane {
            cells.push(Cell::from(plane_wave_error(state, &sc)?));
        }
        w.row(&cells)
    };

    let res = monitor.observe(&state)?;
    record(&state, res)?;
    for step in 1..=steps {
        state = rk4_step(&state, dt)?;
        let res = monitor.observe(&state)?;
        if step % cadence == 0 || step == steps {
            record(&state, res)?;
        }
        if snap_every > 0 && step % snap_every == 0 && step != steps {
            snapshot(&state, &mut files)?;
        }
    }
    snapshot(&state, &mut files)?;
    files.insert(0, w.finish()?);
    Ok(files)
}

/// Parses `kind/parity/n/coef` tokens separated by commas, where `kind` is
/// `P`, `Q` or `matched@MU`. `none` or an empty string gives no modes.
pub fn parse_modes(text: &str) -> Result<Vec<ToroidalMode>, ConfigError> {
    let bad = |reason: String| ConfigError::Invalid { key: "modes".into(), reason };
    let text = text.trim();
    if text.is_empty() || text == "none" {
        return Ok(vec![]);
    }
    text.split(',')
        .map(|tok| {
            let parts: Vec<&str> = tok.trim().split('/').collect();
            let [kind, parity, n, coef] = parts[..] else {
                return Err(bad(format!("`{tok}` is not kind/parity/n/coef")));
            };
            let radial = match kind {
                "P" => Radial::P,
                "Q" => Radial::Q,
                k => match k.strip_prefix("matched@").map(str::parse::<f64>) {
                    Some(Ok(mu_m)) => Radial::Matched { mu_m },
                    _ => return Err(bad(format!("unknown radial kind `{k}`"))),
                },
            };
            let parity = match parity {
                "cos" => Parity::Cos,
                "sin" => Parity::Sin,
                p => return Err(bad(format!("unknown parity `{p}`"))),
            };
            let n = n.parse().map_err(|_| bad(format!("bad mode number `{n}`")))?;
            let coef = coef.parse().map_err(|_| bad(format!("bad coefficient `{coef}`")))?;
            ToroidalMode::new(n, parity, radial, coef).map_err(|e| bad(e.to_string()))
        })
        .collect()
}

fn magnetic_profile(name: &str, c: f64) -> Result<Box<dyn RadialProfile>, ConfigError> {
    Ok(match name {
        "tanh_sech" => Box::new(FnProfile::new(
            move |m: f64| c * m.tanh() / m.cosh(),
            move |m: f64| c * (1.0 - 2.0 * m.tanh().powi(2)) / m.cosh(),
        )),
        "p_harmonic" => Box::new(HarmonicProfile { kind: LegendreKind::P, degree: consistent_degree(1), scale: c }),
        "q_harmonic" => Box::new(HarmonicProfile { kind: LegendreKind::Q, degree: consistent_degree(1), scale: c }),
        other => {
            return Err(ConfigError::Invalid {
                key: "g_profile".into(),
                reason: format!("`{other}` is not one of tanh_sech, p_harmonic, q_harmonic"),
            })
        }
    })
}

fn parity_name(p: Parity) -> &'static str {
    match p {
        Parity::Cos => "cos",
        Parity::Sin => "sin",
    }
}

fn static_report(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let params = coupling(cfg)?;
    let seeds = parse_modes(cfg.text("modes"))?;
    let g = magnetic_profile(cfg.text("g_profile"), cfg.f64("g_amplitude"))?;
    let n_max = u32::try_from(cfg.u64("n_max")).map_err(|_| ConfigError::Invalid { key: "n_max".into(), reason: "too large".into() })?;
    let ac = ApproximationConfig {
        mu_min: cfg.f64("mu_min"),
        mu_max: cfg.f64("mu_max"),
        mu_points: cfg.usize("mu_points"),
        eta_points: cfg.usize("eta_points"),
        n_max,
        iterations: cfg.usize("iterations"),
    };
    let report = toroidal::successive_approximation(&seeds, g.as_ref(), &params, &ac).map_err(invalid("modes"))?;

    let modes_path = dir.join("static_modes.csv");
    let mut w = CsvWriter::create(
        &modes_path,
        &[
            "iteration",
            "n",
            "parity",
            "branch",
            "axis_indicator",
            "ring_indicator",
            "axis_branch",
            "ring_branch",
            "singular",
            "jump",
            "jump_contrast",
            "jump_branch",
            "discontinuous",
            "quadrature_mismatch",
            "max_abs",
        ],
    )?;
    for it in &report.iterations {
        for m in &it.modes {
            w.row(&[
                it.iteration.into(),
                m.n.into(),
                parity_name(m.parity).into(),
                m.branch().into(),
                m.axis_indicator.into(),
                m.ring_indicator.into(),
                m.axis_branch.into(),
                m.ring_branch.into(),
                (m.axis_singular() || m.ring_singular()).into(),
                m.jump.into(),
                m.jump_contrast.into(),
                m.jump_branch.into(),
                m.discontinuous().into(),
                m.quadrature_mismatch.into(),
                m.max_abs.into(),
            ])?;
        }
    }
    let modes_path = w.finish()?;

    let iter_path = dir.join("static_iterations.csv");
    let mut w = CsvWriter::create(
        &iter_path,
        &[
            "iteration",
            "singular_axis",
            "singular_ring",
            "discontinuous",
            "quadrature_failed",
            "magnetic_singular",
            "trivial",
            "update_norm",
            "diverging",
            "certified_smooth",
        ],
    )?;
    for it in &report.iterations {
        w.row(&[
            it.iteration.into(),
            it.singular_axis.into(),
            it.singular_ring.into(),
            it.discontinuous.into(),
            it.quadrature_failed.into(),
            it.magnetic.singular().into(),
            it.trivial.into(),
            it.update_norm.into(),
            it.diverging.into(),
            it.certified_smooth().into(),
        ])?;
    }
    let iter_path = w.finish()?;

    let ansatz = StaticAnsatz { g: g.as_ref(), v_modes: seeds, params };
    let profile = toroidal::charge_profile(&ansatz, cfg.f64("profile_mu"), cfg.usize("profile_samples"))
        .map_err(invalid("profile_mu"))?;
    let prof_path = dir.join("charge_profile.csv");
    let mut w = CsvWriter::create(&prof_path, &["eta", "q"])?;
    for (eta, q) in profile {
        w.row(&[eta.into(), q.into()])?;
    }
    Ok(vec![modes_path, iter_path, w.finish()?])
}

fn asymptotics(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let z0 = ZerothOrderParams::new(cfg.f64("qtotal"), cfg.f64("mu"), cfg.f64("rmin"), cfg.f64("rmax"))
        .map_err(invalid("rmin"))?;
    let e2 = cfg.f64("e2");
    if e2 <= 0.0 {
        return Err(ConfigError::Invalid { key: "e2".into(), reason: "must be positive".into() }.into());
    }
    let n = cfg.usize("samples");
    if n < 2 {
        return Err(ConfigError::Invalid { key: "samples".into(), reason: "need at least two points".into() }.into());
    }
    let pts = asymptotics::ray_points(&z0, cfg.f64("theta"), n);
    let src = asymptotics::first_order_sources(&z0, &pts)?;
    let path = dir.join("asymptotics.csv");
    let mut w = CsvWriter::create(
        &path,
        &[
            "rho",
            "z",
            "radius",
            "div_e1",
            "rot_b1_phi",
            "div_e1_over_e2",
            "rot_b1_phi_over_e2",
            "charge_shape_ratio",
            "current_shape_ratio",
        ],
    )?;
    let mut ratios = (vec![], vec![]);
    for s in &src {
        let (c, j) = s.with_coupling(e2);
        let rc = s.div_e1 / asymptotics::charge_shape(&s.point);
        let rj = s.rot_b1_phi / asymptotics::current_shape(&s.point);
        ratios.0.push(rc);
        ratios.1.push(rj);
        w.row(&[
            s.point.rho.into(),
            s.point.z.into(),
            s.point.radius().into(),
            s.div_e1.into(),
            s.rot_b1_phi.into(),
            c.into(),
            j.into(),
            rc.into(),
            rj.into(),
        ])?;
    }
    let path = w.finish()?;

    let radii: Vec<f64> = pts.iter().map(|p| p.radius()).collect();
    let (pc, pj) = asymptotics::closed_form_prefactors(&z0);
    let fit_path = dir.join("asymptotics_fit.csv");
    let mut w = CsvWriter::create(
        &fit_path,
        &["quantity", "fitted_slope", "expected_slope", "mean_shape_ratio", "max_ratio_deviation", "closed_form_prefactor"],
    )?;
    let mut checks = vec![];
    for (name, values, ratio, expected, pref) in [
        ("div_e1", src.iter().map(|s| s.div_e1).collect::<Vec<_>>(), &ratios.0, -9.0, pc),
        ("rot_b1_phi", src.iter().map(|s| s.rot_b1_phi).collect(), &ratios.1, -8.0, pj),
    ] {
        let live = values.iter().all(|v| *v != 0.0);
        let slope = if live { asymptotics::falloff_fit(&radii, &values)? } else { f64::NAN };
        let mean = ratio.iter().sum::<f64>() / ratio.len() as f64;
        let dev = ratio.iter().fold(0.0_f64, |m, r| m.max((r / pref - 1.0).abs()));
        w.row(&[name.into(), slope.into(), expected.into(), mean.into(), dev.into(), pref.into()])?;
        if live {
            checks.push((format!("{name} slope deviation"), (slope - expected).abs(), SLOPE_TOL));
            checks.push((format!("{name} shape ratio deviation"), dev, SHAPE_RATIO_TOL));
        }
    }
    let files = vec![path, w.finish()?];
    for (what, v, lim) in checks {
        check(&what, v, lim)?;
    }
    Ok(files)
}

fn legendre(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let (lo, hi, m) = (cfg.f64("mu_min"), cfg.f64("mu_max"), cfg.usize("mu_points"));
    if !(lo > 0.0 && hi >= lo && m >= 1) {
        return Err(ConfigError::Invalid { key: "mu_min".into(), reason: "need 0 < mu_min <= mu_max and mu_points >= 1".into() }.into());
    }
    let n_max = u32::try_from(cfg.u64("n_max")).map_err(|_| ConfigError::Invalid { key: "n_max".into(), reason: "too large".into() })?;
    let mus: Vec<f64> = (0..m).map(|i| if m == 1 { lo } else { lo + (hi - lo) * i as f64 / (m - 1) as f64 }).collect();
    let path = dir.join("legendre.csv");
    let mut w = CsvWriter::create(&path, &["n", "degree", "mu", "p", "dp", "q", "dq", "wronskian_residual"])?;
    let mut worst = 0.0_f64;
    for n in 0..=n_max {
        let (deg, up) = (consistent_degree(n), consistent_degree(n + 1));
        for &mu in &mus {
            let (p, dp) = toroidal_with_derivative(LegendreKind::P, deg, mu)?;
            let (q, dq) = toroidal_with_derivative(LegendreKind::Q, deg, mu)?;
            let (p1, _) = toroidal_with_derivative(LegendreKind::P, up, mu)?;
            let (q1, _) = toroidal_with_derivative(LegendreKind::Q, up, mu)?;
            // P_ν Q_{ν+1} - P_{ν+1} Q_ν = -1/(ν+1)
            let nu1 = deg.value() + 1.0;
            let res = ((p * q1 - p1 * q) * nu1 + 1.0).abs();
            worst = worst.max(res);
            w.row(&[n.into(), deg.value().into(), mu.into(), p.into(), dp.into(), q.into(), dq.into(), res.into()])?;
        }
    }
    let files = vec![w.finish()?];
    check("max relative Wronskian residual", worst, WRONSKIAN_TOL)?;
    Ok(files)
}
