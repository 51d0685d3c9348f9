//! Time evolution of the vacuum equations in `(D, B)` variables.
//!
//! ```text
//! E = e_from_d(D, B)    H = h_from_b(E, B)
//! ∂B/∂t = -curl E       ∂D/∂t = curl H
//! ```
//!
//! Both constraints `div D = 0` and `div B = 0` are preserved to rounding
//! because the discrete divergence annihilates the discrete curl.
//!
//! The induced sources used for diagnostics are written in flux form,
//!
//! ```text
//! ρ = -k div((E·B) B)
//! j =  k [curl((E·B) E) + ∂t((E·B) B)]
//! ```
//!
//! which agree with `-k B·∇(E·B)` and `k[B ∂t(E·B) - E × ∇(E·B)]` whenever
//! `div B = 0` and `∂B/∂t = -curl E`, and satisfy the discrete continuity
//! equation exactly.

use std::collections::VecDeque;
use std::f64::consts::PI;

use crate::constitutive::{self, pointwise, CouplingParams};
use crate::error::{Error, Result};
use crate::grid::{integrate, integrate_vec, rms_difference, same_grid, GridSpec, ScalarField, Stencil, Vec3Field};
use crate::vec3::Vec3;

/// Default Courant number `dt / min(dx, dy, dz)`.
pub const DEFAULT_CFL: f64 = 0.4;

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub d: Vec3Field,
    pub b: Vec3Field,
    pub params: CouplingParams,
    pub stencil: Stencil,
    pub step: u64,
}

impl SimState {
    pub fn new(d: Vec3Field, b: Vec3Field, params: CouplingParams, stencil: Stencil) -> Result<Self> {
        same_grid(&d.grid, &b.grid)?;
        Ok(Self { t: 0.0, d, b, params, stencil, step: 0 })
    }

    pub fn grid(&self) -> GridSpec {
        self.d.grid
    }

    pub fn electric(&self) -> Result<Vec3Field> {
        constitutive::e_from_d(&self.d, &self.b, &self.params)
    }

    /// `(D, B) -> (-D, -B)`.
    pub fn negated(&self) -> Self {
        Self { d: self.d.negated(), b: self.b.negated(), ..self.clone() }
    }

    pub fn total_energy(&self) -> Result<f64> {
        let e = self.electric()?;
        Ok(integrate(&constitutive::energy_density(&e, &self.b, &self.params)?))
    }
}

/// Largest time step allowed by the Courant number `cfl`.
pub fn stable_dt(grid: &GridSpec, cfl: f64) -> f64 {
    cfl * grid.min_spacing()
}

/// Time derivatives `(∂D/∂t, ∂B/∂t)`.
pub fn rhs(state: &SimState) -> Result<(Vec3Field, Vec3Field)> {
    let e = state.electric()?;
    let h = constitutive::h_from_b(&e, &state.b, &state.params)?;
    let s = state.stencil;
    Ok((s.curl(&h), s.curl(&e).negated()))
}

fn check_finite(f: &Vec3Field, what: &str) -> Result<()> {
    if f.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step(state: &SimState, dt: f64) -> Result<SimState> {
    let stage = |d: Vec3Field, b: Vec3Field| SimState { d, b, ..state.clone() };
    let (k1d, k1b) = rhs(state)?;
    let s2 = stage(state.d.axpy(0.5 * dt, &k1d)?, state.b.axpy(0.5 * dt, &k1b)?);
    check_finite(&s2.d, "RK stage 2")?;
    check_finite(&s2.b, "RK stage 2")?;
    let (k2d, k2b) = rhs(&s2)?;
    let s3 = stage(state.d.axpy(0.5 * dt, &k2d)?, state.b.axpy(0.5 * dt, &k2b)?);
    check_finite(&s3.d, "RK stage 3")?;
    check_finite(&s3.b, "RK stage 3")?;
    let (k3d, k3b) = rhs(&s3)?;
    let s4 = stage(state.d.axpy(dt, &k3d)?, state.b.axpy(dt, &k3b)?);
    check_finite(&s4.d, "RK stage 4")?;
    check_finite(&s4.b, "RK stage 4")?;
    let (k4d, k4b) = rhs(&s4)?;

    let combine = |y: &Vec3Field, k1: &Vec3Field, k2: &Vec3Field, k3: &Vec3Field, k4: &Vec3Field| {
        y.axpy(dt / 6.0, k1)?.axpy(dt / 3.0, k2)?.axpy(dt / 3.0, k3)?.axpy(dt / 6.0, k4)
    };
    let d = combine(&state.d, &k1d, &k2d, &k3d, &k4d)?;
    let b = combine(&state.b, &k1b, &k2b, &k3b, &k4b)?;
    check_finite(&d, "RK update")?;
    check_finite(&b, "RK update")?;
    Ok(SimState { t: state.t + dt, d, b, step: state.step + 1, ..state.clone() })
}

/// `div D`, the residual of the modified Gauss law.
pub fn gauss_residual(state: &SimState) -> ScalarField {
    state.stencil.div(&state.d)
}

pub fn div_b(state: &SimState) -> ScalarField {
    state.stencil.div(&state.b)
}

/// Fields and their time derivatives at one instant.
#[derive(Debug, Clone)]
pub struct FieldRates {
    pub e: Vec3Field,
    pub dedt: Vec3Field,
    pub dbdt: Vec3Field,
}

pub fn field_rates(state: &SimState) -> Result<FieldRates> {
    let p = state.params;
    let k = p.k();
    let e = state.electric()?;
    let (ddot, bdot) = rhs(state)?;
    // Differentiating D = E + k(E·B)B at fixed structure gives
    // (1 + k B Bᵀ) Ė = Ḋ - k(E·Ḃ)B - k(E·B)Ḃ.
    let n = e.grid.len();
    let mut dedt = Vec3Field::zeros(e.grid);
    for i in 0..n {
        let (ei, bi, bd) = (e.get(i), state.b.get(i), bdot.get(i));
        let r = ddot.get(i) - bi * (k * ei.dot(&bd)) - bd * (k * ei.dot(&bi));
        dedt.set(i, pointwise::e_from_d(r, bi, &p));
    }
    Ok(FieldRates { e, dedt, dbdt: bdot })
}

/// Flux-form induced charge `-k div((E·B) B)`.
pub fn flux_charge(state: &SimState, e: &Vec3Field) -> Result<ScalarField> {
    let k = state.params.k();
    let flux = e.zip_map(&state.b, |e, b| b * (-k * e.dot(&b)))?;
    Ok(state.stencil.div(&flux))
}

/// Flux-form induced current `k [curl((E·B) E) + ∂t((E·B) B)]`.
pub fn flux_current(state: &SimState, rates: &FieldRates) -> Result<Vec3Field> {
    let k = state.params.k();
    let e = &rates.e;
    let eb_e = e.zip_map(&state.b, |e, b| e * (k * e.dot(&b)))?;
    let mut j = state.stencil.curl(&eb_e);
    for i in 0..e.grid.len() {
        let (ei, bi) = (e.get(i), state.b.get(i));
        let (ed, bd) = (rates.dedt.get(i), rates.dbdt.get(i));
        let rate = bi * (ed.dot(&bi) + ei.dot(&bd)) + bd * ei.dot(&bi);
        j.set(i, j.get(i) + rate * k);
    }
    Ok(j)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConservationResiduals {
    /// `max |∂ρ/∂t + div j|`.
    pub charge: f64,
    /// `|d/dt ∫ℋ|`.
    pub energy: f64,
}

struct Sample {
    t: f64,
    rho: ScalarField,
    energy: f64,
}

/// Tracks the induced charge and total energy over consecutive equal time
/// steps and evaluates their time derivatives with one-sided backward
/// differences of up to fourth order.
///
/// The monitor must see every step; the first observation reports zero.
#[derive(Default)]
pub struct ConservationMonitor {
    history: VecDeque<Sample>,
}

const BACKWARD: [&[f64]; 4] = [
    &[1.0, -1.0],
    &[1.5, -2.0, 0.5],
    &[11.0 / 6.0, -3.0, 1.5, -1.0 / 3.0],
    &[25.0 / 12.0, -4.0, 3.0, -4.0 / 3.0, 0.25],
];

impl ConservationMonitor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, state: &SimState) -> Result<ConservationResiduals> {
        let rates = field_rates(state)?;
        let rho = flux_charge(state, &rates.e)?;
        let energy = integrate(&constitutive::energy_density(&rates.e, &state.b, &state.params)?);
        let div_j = state.stencil.div(&flux_current(state, &rates)?);

        if let Some(last) = self.history.front() {
            let dt = state.t - last.t;
            let uneven = self.history.iter().zip(self.history.iter().skip(1)).any(|(a, b)| {
                ((a.t - b.t) - dt).abs() > 1e-9 * dt.abs()
            });
            if uneven || dt <= 0.0 {
                self.history.clear();
            }
        }
        self.history.push_front(Sample { t: state.t, rho, energy });
        self.history.truncate(5);

        let order = self.history.len() - 1;
        if order == 0 {
            return Ok(ConservationResiduals::default());
        }
        let dt = self.history[0].t - self.history[1].t;
        let w = BACKWARD[order - 1];
        let n = state.grid().len();
        let mut charge = 0.0_f64;
        for i in 0..n {
            let drho: f64 = w.iter().zip(&self.history).map(|(c, s)| c * s.rho.values[i]).sum::<f64>() / dt;
            charge = charge.max((drho + div_j.values[i]).abs());
        }
        let de: f64 = w.iter().zip(&self.history).map(|(c, s)| c * s.energy).sum::<f64>() / dt;
        Ok(ConservationResiduals { charge, energy: de.abs() })
    }
}

/// One row of the evolution diagnostics table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: u64,
    pub t: f64,
    pub total_energy: f64,
    pub total_charge: f64,
    pub magnetic_moment: f64,
    pub angular_momentum: f64,
    pub max_div_b: f64,
    pub max_gauss_residual: f64,
    pub charge_conservation_residual: f64,
    pub energy_balance_residual: f64,
}

impl DiagnosticsRecord {
    pub const HEADER: [&'static str; 10] = [
        "step",
        "t",
        "total_energy",
        "total_charge",
        "abs_magnetic_moment",
        "abs_angular_momentum",
        "max_div_b",
        "max_gauss_residual",
        "charge_conservation_residual",
        "energy_balance_residual",
    ];

    pub fn values(&self) -> [f64; 9] {
        [
            self.t,
            self.total_energy,
            self.total_charge,
            self.magnetic_moment,
            self.angular_momentum,
            self.max_div_b,
            self.max_gauss_residual,
            self.charge_conservation_residual,
            self.energy_balance_residual,
        ]
    }
}

/// Evaluates all diagnostics; moments are taken about `origin`.
pub fn diagnostics(state: &SimState, residuals: ConservationResiduals, origin: Vec3) -> Result<DiagnosticsRecord> {
    let rates = field_rates(state)?;
    let e = &rates.e;
    let grid = state.grid();
    let rho = flux_charge(state, e)?;
    let j = flux_current(state, &rates)?;
    let mut torque = Vec3Field::zeros(grid);
    let mut spin = Vec3Field::zeros(grid);
    for i in 0..grid.len() {
        let r = grid.position(i) - origin;
        torque.set(i, r.cross(&j.get(i)) * 0.5);
        spin.set(i, r.cross(&e.get(i).cross(&state.b.get(i))));
    }
    Ok(DiagnosticsRecord {
        step: state.step,
        t: state.t,
        total_energy: integrate(&constitutive::energy_density(e, &state.b, &state.params)?),
        total_charge: integrate(&rho),
        magnetic_moment: integrate_vec(&torque).norm(),
        angular_momentum: integrate_vec(&spin).norm(),
        max_div_b: div_b(state).max_abs(),
        max_gauss_residual: gauss_residual(state).max_abs(),
        charge_conservation_residual: residuals.charge,
        energy_balance_residual: residuals.energy,
    })
}

/// Parameters shared by the built-in initial-data families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    /// Peak field strength.
    pub amplitude: f64,
    /// Pulse width as a fraction of the box length along each axis.
    pub width: f64,
    /// `D = ratio * B` for the parallel pulse.
    pub ratio: f64,
    /// Number of wavelengths of the plane wave across the box in x.
    pub modes: u32,
    /// Drop all z-dependence of the pulse profiles.
    pub tube: bool,
    pub flip_e: bool,
    pub flip_b: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self { amplitude: 0.5, width: 0.1, ratio: 1.0, modes: 1, tube: false, flip_e: false, flip_b: false }
    }
}

pub const SCENARIOS: [&str; 4] = ["plane_wave", "crossed_pulse", "parallel_pulse", "quadruplet_seed"];

/// Smooth periodic bump of unit height centred at `c` with width `sigma`,
/// `exp(κ (cos(2π(x - c)/L) - 1))`, `κ = (L / 2πσ)²`.
pub fn periodic_bump(x: f64, c: f64, sigma: f64, l: f64) -> f64 {
    let kappa = (l / (2.0 * PI * sigma)).powi(2);
    (kappa * ((2.0 * PI * (x - c) / l).cos() - 1.0)).exp()
}

fn profile(grid: &GridSpec, widths: Vec3, centre: Vec3, tube: bool) -> ScalarField {
    let len = grid.lengths();
    ScalarField::from_fn(*grid, |r| {
        let z = if tube { 1.0 } else { periodic_bump(r.z(), centre.z(), widths.z() * len.z(), len.z()) };
        periodic_bump(r.x(), centre.x(), widths.x() * len.x(), len.x())
            * periodic_bump(r.y(), centre.y(), widths.y() * len.y(), len.y())
            * z
    })
}

/// Discrete curl of `ψ ê` for a scalar profile and fixed direction.
fn curl_of(stencil: Stencil, psi: &ScalarField, dir: Vec3) -> Vec3Field {
    let n = psi.grid.len();
    let mut a = Vec3Field::zeros(psi.grid);
    for i in 0..n {
        a.set(i, dir * psi.values[i]);
    }
    stencil.curl(&a)
}

fn normalised(f: Vec3Field, amplitude: f64) -> Vec3Field {
    let peak = f.max_norm();
    if peak == 0.0 {
        f
    } else {
        f.scaled(amplitude / peak)
    }
}

/// Builds documented analytic initial data.
///
/// * `plane_wave`: `E = (0, A sin(2πm x/L), 0)`, `B = (0, 0, A sin(2πm x/L))`.
/// * `crossed_pulse`: z-invariant `D = (0, 0, A g(x, y))` and in-plane
///   `B = curl(χ ê_z)`, so `E = D` and `E·B = 0`.
/// * `parallel_pulse`: `B = curl(ψ ê_z)` from an anisotropic bump, `D = λB`;
///   then `E ∥ B` and `ρ_ind ≠ 0`.
/// * `quadruplet_seed`: `B = curl(ψ₁ ê_z)`, `D = curl(ψ₂ ê_x)`, optionally
///   sign-flipped.
///
/// All magnetic data and all `D` except the z-invariant crossed pulse are
/// discrete curls, so both divergences vanish to rounding.
pub fn init_scenario(
    name: &str,
    grid: GridSpec,
    params: CouplingParams,
    stencil: Stencil,
    cfg: &ScenarioConfig,
) -> Result<SimState> {
    if !(cfg.amplitude.is_finite() && cfg.width > 0.0 && cfg.width.is_finite() && cfg.ratio.is_finite()) {
        return Err(Error::Scenario("amplitude, width and ratio must be finite, width positive".into()));
    }
    let len = grid.lengths();
    let centre = grid.center();
    let w = cfg.width;
    let (d, b) = match name {
        "plane_wave" => {
            let (e, b) = plane_wave_fields(&grid, cfg, 0.0);
            (constitutive::d_from_e(&e, &b, &params)?, b)
        }
        "crossed_pulse" => {
            let g = profile(&grid, Vec3::new(w, w, w), centre, true);
            let mut e = Vec3Field::zeros(grid);
            for i in 0..grid.len() {
                e.set(i, Vec3::new(0.0, 0.0, g.values[i]));
            }
            let e = normalised(e, cfg.amplitude);
            let off = centre + Vec3::new(0.1 * len.x(), -0.05 * len.y(), 0.0);
            let chi = profile(&grid, Vec3::new(0.8 * w, 1.2 * w, w), off, true);
            let b = normalised(curl_of(stencil, &chi, Vec3::new(0.0, 0.0, 1.0)), cfg.amplitude);
            (constitutive::d_from_e(&e, &b, &params)?, b)
        }
        "parallel_pulse" => {
            let psi = profile(&grid, Vec3::new(w, 0.8 * w, w), centre, cfg.tube);
            let b = normalised(curl_of(stencil, &psi, Vec3::new(0.0, 0.0, 1.0)), cfg.amplitude);
            (b.scaled(cfg.ratio), b)
        }
        "quadruplet_seed" => {
            let psi1 = profile(&grid, Vec3::new(w, 0.7 * w, 0.9 * w), centre, cfg.tube);
            let off = centre + Vec3::new(0.05 * len.x(), 0.03 * len.y(), 0.0);
            let psi2 = profile(&grid, Vec3::new(0.8 * w, w, 0.6 * w), off, cfg.tube);
            let b = normalised(curl_of(stencil, &psi1, Vec3::new(0.0, 0.0, 1.0)), cfg.amplitude);
            let d = normalised(curl_of(stencil, &psi2, Vec3::new(1.0, 0.0, 0.0)), cfg.amplitude)
                .axpy(cfg.ratio, &b)?;
            (d, b)
        }
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    let d = if cfg.flip_e { d.negated() } else { d };
    let b = if cfg.flip_b { b.negated() } else { b };
    SimState::new(d, b, params, stencil)
}

/// Exact travelling-wave fields `(E, B)` of the plane-wave scenario at time `t`.
pub fn plane_wave_fields(grid: &GridSpec, cfg: &ScenarioConfig, t: f64) -> (Vec3Field, Vec3Field) {
    let kx = 2.0 * PI * cfg.modes as f64 / grid.lx;
    let amp = cfg.amplitude;
    let e = Vec3Field::from_fn(*grid, |r| Vec3::new(0.0, amp * (kx * (r.x() - t)).sin(), 0.0));
    let b = Vec3Field::from_fn(*grid, |r| Vec3::new(0.0, 0.0, amp * (kx * (r.x() - t)).sin()));
    (e, b)
}

/// RMS deviation of `(E, B)` from the exact plane wave at `state.t`.
pub fn plane_wave_error(state: &SimState, cfg: &ScenarioConfig) -> Result<f64> {
    let (e, b) = plane_wave_fields(&state.grid(), cfg, state.t);
    let de = rms_difference(&state.electric()?, &e)?;
    let db = rms_difference(&state.b, &b)?;
    Ok((de * de + db * db).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GridSpec {
        GridSpec::cube(16, 1.0).unwrap()
    }

    #[test]
    fn zero_fields_stay_zero() {
        let g = small();
        let s = SimState::new(Vec3Field::zeros(g), Vec3Field::zeros(g), CouplingParams::default(), Stencil::Sixth)
            .unwrap();
        let next = rk4_step(&s, 0.01).unwrap();
        assert_eq!(next.d.max_abs(), 0.0);
        assert_eq!(next.b.max_abs(), 0.0);
        assert_eq!(next.step, 1);
    }

    #[test]
    fn uniform_fields_are_static() {
        let g = small();
        let d = Vec3Field::from_fn(g, |_| Vec3::new(0.3, -0.2, 0.9));
        let b = Vec3Field::from_fn(g, |_| Vec3::new(0.5, 0.1, 0.4));
        let s = SimState::new(d, b, CouplingParams::default(), Stencil::Sixth).unwrap();
        let (dd, db) = rhs(&s).unwrap();
        assert!(dd.max_abs() < 1e-12 && db.max_abs() < 1e-12);
    }

    #[test]
    fn unknown_scenario_is_rejected() {
        let r = init_scenario("vortex", small(), CouplingParams::default(), Stencil::Sixth, &ScenarioConfig::default());
        assert!(matches!(r, Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn blow_up_is_reported() {
        let g = small();
        let d = Vec3Field::from_fn(g, |r| Vec3::new(0.0, (2.0 * PI * r.x()).sin(), 0.0));
        let b = Vec3Field::zeros(g);
        let s = SimState::new(d, b, CouplingParams::default(), Stencil::Sixth).unwrap();
        let mut cur = s;
        let mut failed = false;
        for _ in 0..2000 {
            match rk4_step(&cur, 1e3) {
                Ok(n) => cur = n,
                Err(Error::NonFinite(_)) => {
                    failed = true;
                    break;
                }
                Err(e) => panic!("{e}"),
            }
        }
        assert!(failed);
    }

    #[test]
    fn backward_weights_are_consistent() {
        for w in BACKWARD {
            let s: f64 = w.iter().sum();
            assert!(s.abs() < 1e-14);
            let first: f64 = w.iter().enumerate().map(|(i, c)| -(i as f64) * c).sum();
            assert!((first - 1.0).abs() < 1e-14);
        }
    }
}
