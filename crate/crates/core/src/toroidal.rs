//! Static axisymmetric fields in toroidal coordinates.
//!
//! ```text
//! ρ = a sinh μ / w,   z = a sin η / w,   w = cosh μ - cos η
//! h_μ = h_η = a / w,  h_φ = a sinh μ / w
//! ```
//!
//! The magnetic field comes from `A_φ = w G(μ)`, which forces `B_μ = 0` and
//! gives `B_η = -w² S'(μ) / (a sinh μ)` with `S = sinh μ G`. The electric
//! potential is written `V = v(μ, η) √w`; then `-ΔV = ρ_ind` separates into
//!
//! ```text
//! (1/sinh μ) ∂_μ(sinh μ ∂_μ v) + ∂²_η v + v/4 = s(μ, η)
//! s = -(3ε/(a² e²)) (w³ / sinh² μ) S'² W
//! W = w ∂²_η v + 4 sin η ∂_η v + v (5 sin² η + 2 w cos η) / (4w)
//! ```
//!
//! For a `cos nη` or `sin nη` mode the homogeneous solutions are
//! `P_{n-1/2}(cosh μ)` and `Q_{n-1/2}(cosh μ)`.

use std::f64::consts::PI;

use crate::constitutive::CouplingParams;
use crate::error::{Error, Result};
use crate::grid::{ScalarField, Stencil, Vec3Field};
use crate::special::{self, HalfInteger, LegendreKind, ToroidalValue};
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToroidalPoint {
    pub mu: f64,
    pub eta: f64,
    pub phi: f64,
    pub a: f64,
}

impl ToroidalPoint {
    pub fn new(mu: f64, eta: f64, phi: f64, a: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite() && eta.is_finite() && phi.is_finite() && a > 0.0) {
            return Err(Error::Domain(format!("invalid toroidal point mu={mu} eta={eta} a={a}")));
        }
        let p = Self { mu, eta, phi, a };
        if p.w() <= 0.0 {
            return Err(Error::DegeneratePoint { mu, eta });
        }
        Ok(p)
    }

    /// `cosh μ - cos η`.
    #[inline]
    pub fn w(&self) -> f64 {
        toroidal_w(self.mu, self.eta)
    }
}

/// `cosh μ - cos η`, written to stay accurate near the point at infinity.
#[inline]
pub fn toroidal_w(mu: f64, eta: f64) -> f64 {
    2.0 * ((0.5 * mu).sinh().powi(2) + (0.5 * eta).sin().powi(2))
}

/// `(ρ, z, φ)` of a toroidal point.
pub fn toroidal_to_cylindrical(p: &ToroidalPoint) -> Result<(f64, f64, f64)> {
    let w = p.w();
    if w <= 0.0 {
        return Err(Error::DegeneratePoint { mu: p.mu, eta: p.eta });
    }
    Ok((p.a * p.mu.sinh() / w, p.a * p.eta.sin() / w, p.phi))
}

/// Inverse of [`toroidal_to_cylindrical`]; `η` is returned in `[0, 2π)`.
pub fn cylindrical_to_toroidal(rho: f64, z: f64, phi: f64, a: f64) -> Result<ToroidalPoint> {
    let d_out = (rho + a).powi(2) + z * z;
    let d_in = (rho - a).powi(2) + z * z;
    if d_in == 0.0 {
        return Err(Error::Domain("the focal ring has mu = infinity".into()));
    }
    let mu = 0.5 * (d_out / d_in).ln();
    let eta = (2.0 * a * z).atan2(rho * rho + z * z - a * a).rem_euclid(2.0 * PI);
    ToroidalPoint::new(mu.max(0.0), eta, phi, a)
}

pub fn toroidal_to_cartesian(p: &ToroidalPoint) -> Result<Vec3> {
    let (rho, z, phi) = toroidal_to_cylindrical(p)?;
    Ok(Vec3::new(rho * phi.cos(), rho * phi.sin(), z))
}

/// `(h_μ, h_η, h_φ)`.
pub fn scale_factors(p: &ToroidalPoint) -> (f64, f64, f64) {
    let w = p.w();
    (p.a / w, p.a / w, p.a * p.mu.sinh() / w)
}

/// Unit vectors `(e_μ, e_η, e_φ)` in Cartesian components; right-handed.
pub fn unit_vectors(p: &ToroidalPoint) -> (Vec3, Vec3, Vec3) {
    let (sm, cm) = (p.mu.sinh(), p.mu.cosh());
    let (se, ce) = (p.eta.sin(), p.eta.cos());
    let w = p.w();
    // ∂(ρ, z)/∂μ scaled by 1/h_μ
    let drho_dmu = (1.0 - cm * ce) / w;
    let dz_dmu = -sm * se / w;
    let drho_deta = -sm * se / w;
    let dz_deta = (cm * ce - 1.0) / w;
    let (sp, cp) = (p.phi.sin(), p.phi.cos());
    let e_rho = Vec3::new(cp, sp, 0.0);
    let e_z = Vec3::new(0.0, 0.0, 1.0);
    (
        e_rho * drho_dmu + e_z * dz_dmu,
        e_rho * drho_deta + e_z * dz_deta,
        Vec3::new(-sp, cp, 0.0),
    )
}

/// A radial function of `μ` with its first derivative.
pub trait RadialProfile: Send + Sync {
    fn value(&self, mu: f64) -> f64;
    fn derivative(&self, mu: f64) -> f64;
}

/// Profile given by closures for the value and derivative.
pub struct FnProfile<F, D> {
    f: F,
    df: D,
}

impl<F, D> FnProfile<F, D>
where
    F: Fn(f64) -> f64 + Send + Sync,
    D: Fn(f64) -> f64 + Send + Sync,
{
    pub fn new(f: F, df: D) -> Self {
        Self { f, df }
    }
}

impl<F, D> RadialProfile for FnProfile<F, D>
where
    F: Fn(f64) -> f64 + Send + Sync,
    D: Fn(f64) -> f64 + Send + Sync,
{
    fn value(&self, mu: f64) -> f64 {
        (self.f)(mu)
    }
    fn derivative(&self, mu: f64) -> f64 {
        (self.df)(mu)
    }
}

/// `scale · P_ν(cosh μ)` or `scale · Q_ν(cosh μ)`; `Q` is infinite at `μ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicProfile {
    pub kind: LegendreKind,
    pub degree: HalfInteger,
    pub scale: f64,
}

impl RadialProfile for HarmonicProfile {
    fn value(&self, mu: f64) -> f64 {
        match special::toroidal_at_mu(self.kind, self.degree, mu) {
            Ok(ToroidalValue::Finite(v)) => self.scale * v,
            _ => f64::INFINITY,
        }
    }
    fn derivative(&self, mu: f64) -> f64 {
        special::toroidal_with_derivative(self.kind, self.degree, mu)
            .map(|(_, d)| self.scale * d)
            .unwrap_or(f64::NEG_INFINITY)
    }
}

/// Natural cubic spline through `(mus[i], values[i])`, clamped to the end
/// values outside the sampled range.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineProfile {
    mus: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl SplineProfile {
    pub fn new(mus: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = mus.len();
        if n < 3 || values.len() != n || mus.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("spline needs >= 3 strictly increasing nodes".into()));
        }
        // Tridiagonal solve for the second derivatives with natural ends.
        let mut second = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut r = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = mus[i] - mus[i - 1];
            let h1 = mus[i + 1] - mus[i];
            let diag = 2.0 * (h0 + h1);
            let rhs = 6.0 * ((values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0);
            let denom = diag - h0 * c[i - 1];
            c[i] = h1 / denom;
            r[i] = (rhs - h0 * r[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            second[i] = r[i] - c[i] * second[i + 1];
        }
        Ok(Self { mus, values, second })
    }

    fn locate(&self, mu: f64) -> usize {
        let n = self.mus.len();
        match self.mus.partition_point(|&m| m <= mu) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }
}

impl RadialProfile for SplineProfile {
    fn value(&self, mu: f64) -> f64 {
        let mu = mu.clamp(self.mus[0], *self.mus.last().unwrap());
        let i = self.locate(mu);
        let h = self.mus[i + 1] - self.mus[i];
        let a = (self.mus[i + 1] - mu) / h;
        let b = 1.0 - a;
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h / 6.0
    }
    fn derivative(&self, mu: f64) -> f64 {
        let mu = mu.clamp(self.mus[0], *self.mus.last().unwrap());
        let i = self.locate(mu);
        let h = self.mus[i + 1] - self.mus[i];
        let a = (self.mus[i + 1] - mu) / h;
        let b = 1.0 - a;
        (self.values[i + 1] - self.values[i]) / h
            + ((1.0 - 3.0 * a * a) * self.second[i] + (3.0 * b * b - 1.0) * self.second[i + 1]) * h / 6.0
    }
}

/// `d/dμ (sinh μ G)`.
pub fn s_prime(g: &dyn RadialProfile, mu: f64) -> f64 {
    mu.cosh() * g.value(mu) + mu.sinh() * g.derivative(mu)
}

/// `B_η = -w² (sinh μ G)' / (a sinh μ)`. On the axis the limit
/// `(sinh μ G)'/sinh μ -> 2 G'(0)` is used when `G(0) = 0`; otherwise the
/// field is singular there.
pub fn b_eta_from_g(g: &dyn RadialProfile, p: &ToroidalPoint) -> ToroidalValue {
    let w = p.w();
    if p.mu == 0.0 {
        if g.value(0.0) != 0.0 {
            return ToroidalValue::Singular;
        }
        return ToroidalValue::Finite(-w * w * 2.0 * g.derivative(0.0) / p.a);
    }
    let v = -w * w * s_prime(g, p.mu) / (p.a * p.mu.sinh());
    if v.is_finite() {
        ToroidalValue::Finite(v)
    } else {
        ToroidalValue::Singular
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Cos,
    Sin,
}

/// Radial factor of a separated mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Radial {
    P,
    Q,
    /// `P(μ)/P(μ_m)` inside `μ < μ_m`, `Q(μ)/Q(μ_m)` outside; continuous with
    /// a jump in the derivative at `μ_m`.
    Matched { mu_m: f64 },
}

/// Degree whose toroidal functions solve the separated equation for
/// η-wavenumber `n`: `ν(ν+1) = n² - 1/4`, i.e. `ν = n - 1/2`.
pub fn consistent_degree(n: u32) -> HalfInteger {
    HalfInteger::minus_half(n)
}

/// One separated term `coef · R_n(μ) · trig(nη)` of `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToroidalMode {
    pub n: u32,
    pub parity: Parity,
    pub radial: Radial,
    pub coef: f64,
}

impl ToroidalMode {
    pub fn new(n: u32, parity: Parity, radial: Radial, coef: f64) -> Result<Self> {
        if !coef.is_finite() {
            return Err(Error::Domain("mode coefficient must be finite".into()));
        }
        if parity == Parity::Sin && n == 0 {
            return Err(Error::Domain("sin mode with n = 0 vanishes identically".into()));
        }
        if let Radial::Matched { mu_m } = radial {
            if !(mu_m > 0.0 && mu_m.is_finite()) {
                return Err(Error::Domain(format!("matching surface mu_m = {mu_m} must be positive")));
            }
        }
        Ok(Self { n, parity, radial, coef })
    }

    /// Radial factor and its μ-derivative (without `coef`).
    pub fn radial_value(&self, mu: f64) -> (f64, f64) {
        let d = consistent_degree(self.n);
        let eval = |kind, mu: f64| -> (f64, f64) {
            if kind == LegendreKind::Q && mu == 0.0 {
                return (f64::INFINITY, f64::NEG_INFINITY);
            }
            special::toroidal_with_derivative(kind, d, mu).unwrap_or((f64::NAN, f64::NAN))
        };
        match self.radial {
            Radial::P => eval(LegendreKind::P, mu),
            Radial::Q => eval(LegendreKind::Q, mu),
            Radial::Matched { mu_m } => {
                let kind = if mu < mu_m { LegendreKind::P } else { LegendreKind::Q };
                let (norm, _) = eval(kind, mu_m);
                let (v, dv) = eval(kind, mu);
                (v / norm, dv / norm)
            }
        }
    }

    /// `(trig(nη), ∂_η, ∂²_η)`.
    pub fn angular(&self, eta: f64) -> (f64, f64, f64) {
        let n = self.n as f64;
        let (s, c) = (n * eta).sin_cos();
        match self.parity {
            Parity::Cos => (c, -n * s, -n * n * c),
            Parity::Sin => (s, n * c, -n * n * s),
        }
    }
}

/// `v` and its η-derivatives `(v, ∂_η v, ∂²_η v)` summed over modes.
pub fn mode_sum(modes: &[ToroidalMode], mu: f64, eta: f64) -> (f64, f64, f64) {
    let mut out = (0.0, 0.0, 0.0);
    for m in modes {
        let (r, _) = m.radial_value(mu);
        let (t, dt, ddt) = m.angular(eta);
        out.0 += m.coef * r * t;
        out.1 += m.coef * r * dt;
        out.2 += m.coef * r * ddt;
    }
    out
}

/// `W(μ, η)` for `v` given by its value and η-derivatives.
pub fn w_function(mu: f64, eta: f64, v: f64, v_eta: f64, v_eta2: f64) -> f64 {
    let w = toroidal_w(mu, eta);
    let (se, ce) = eta.sin_cos();
    w * v_eta2 + 4.0 * se * v_eta + v * (5.0 * se * se + 2.0 * w * ce) / (4.0 * w)
}

/// Right-hand side `s(μ, η)` of the separated equation for `v`.
pub fn w_source(modes: &[ToroidalMode], g: &dyn RadialProfile, params: &CouplingParams, mu: f64, eta: f64) -> f64 {
    let (v, ve, vee) = mode_sum(modes, mu, eta);
    source_from_parts(params, mu, eta, s_prime(g, mu), v, ve, vee)
}

fn source_from_parts(p: &CouplingParams, mu: f64, eta: f64, sp: f64, v: f64, ve: f64, vee: f64) -> f64 {
    let w = toroidal_w(mu, eta);
    let sh = mu.sinh();
    -p.k() / (p.a * p.a) * w.powi(3) / (sh * sh) * sp * sp * w_function(mu, eta, v, ve, vee)
}

/// Residual of `v'' + coth μ v' + (1/4 - n²) v` for the radial function
/// `f`, evaluated with sixth-order central differences of step `h`.
pub fn separated_lhs<F: Fn(f64) -> f64>(f: F, n: u32, mus: &[f64], h: f64) -> Vec<f64> {
    let c1 = [3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
    let c2 = [3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];
    let n2 = (n as f64).powi(2);
    mus.iter()
        .map(|&mu| {
            let f0 = f(mu);
            let (mut d1, mut d2) = (0.0, -49.0 / 18.0 * f0);
            for s in 0..3 {
                let (fp, fm) = (f(mu + (s + 1) as f64 * h), f(mu - (s + 1) as f64 * h));
                d1 += c1[s] * (fp - fm);
                d2 += c2[s] * (fp + fm);
            }
            let (d1, d2) = (d1 / h, d2 / (h * h));
            d2 + d1 / mu.tanh() + (0.25 - n2) * f0
        })
        .collect()
}

/// Same as [`separated_lhs`] but divided pointwise by the sum of the
/// magnitudes of the three terms.
pub fn separated_residual_relative<F: Fn(f64) -> f64>(f: F, n: u32, mus: &[f64], h: f64) -> Vec<f64> {
    let c1 = [3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
    let n2 = (n as f64).powi(2);
    let raw = separated_lhs(&f, n, mus, h);
    mus.iter()
        .zip(raw)
        .map(|(&mu, r)| {
            let f0 = f(mu);
            let d1: f64 = (0..3)
                .map(|s| c1[s] * (f(mu + (s + 1) as f64 * h) - f(mu - (s + 1) as f64 * h)))
                .sum::<f64>()
                / h;
            let scale = (d1 / mu.tanh()).abs() + ((0.25 - n2) * f0).abs() + (r - d1 / mu.tanh() - (0.25 - n2) * f0).abs();
            if scale == 0.0 {
                0.0
            } else {
                r.abs() / scale
            }
        })
        .collect()
}

/// Electrostatic-magnetostatic candidate built from `v` modes and `G`.
pub struct StaticAnsatz<'g> {
    pub g: &'g dyn RadialProfile,
    pub v_modes: Vec<ToroidalMode>,
    pub params: CouplingParams,
}

impl StaticAnsatz<'_> {
    /// Scalar potential `V = v √w`.
    pub fn potential(&self, p: &ToroidalPoint) -> f64 {
        mode_sum(&self.v_modes, p.mu, p.eta).0 * p.w().sqrt()
    }

    /// `A_φ = w G(μ)`.
    pub fn a_phi(&self, p: &ToroidalPoint) -> f64 {
        p.w() * self.g.value(p.mu)
    }

    /// `E·B = E_η B_η` with `E_η = -(w/a) ∂_η V`.
    pub fn e_dot_b(&self, p: &ToroidalPoint) -> f64 {
        let w = p.w();
        let (v, ve, _) = mode_sum(&self.v_modes, p.mu, p.eta);
        let dv_deta = ve * w.sqrt() + 0.5 * v * p.eta.sin() / w.sqrt();
        let e_eta = -w / p.a * dv_deta;
        let b_eta = -w * w * s_prime(self.g, p.mu) / (p.a * p.mu.sinh());
        e_eta * b_eta
    }

    /// `ρ_ind = (3ε/e²) w³ S'² / (a⁴ sinh² μ) ∂_η(w³ ∂_η V)`.
    pub fn charge_density(&self, p: &ToroidalPoint) -> f64 {
        let (v, ve, vee) = mode_sum(&self.v_modes, p.mu, p.eta);
        let w = p.w();
        let src = source_from_parts(&self.params, p.mu, p.eta, s_prime(self.g, p.mu), v, ve, vee);
        -w.powf(2.5) / (p.a * p.a) * src
    }
}

/// Induced charge density `q(η)` sampled at `samples` equally spaced angles
/// on the circle `μ = μ0` (the endpoint `2π` excluded).
pub fn charge_profile(ansatz: &StaticAnsatz, mu0: f64, samples: usize) -> Result<Vec<(f64, f64)>> {
    if !(mu0 > 0.0 && mu0.is_finite()) || samples < 2 {
        return Err(Error::Domain("charge profile needs mu0 > 0 and >= 2 samples".into()));
    }
    (0..samples)
        .map(|i| {
            let eta = 2.0 * PI * i as f64 / samples as f64;
            let p = ToroidalPoint::new(mu0, eta, 0.0, ansatz.params.a)?;
            Ok((eta, ansatz.charge_density(&p)))
        })
        .collect()
}

/// Settings of the successive-approximation scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproximationConfig {
    pub mu_min: f64,
    pub mu_max: f64,
    pub mu_points: usize,
    pub eta_points: usize,
    pub n_max: u32,
    pub iterations: usize,
}

impl Default for ApproximationConfig {
    fn default() -> Self {
        Self { mu_min: 1e-4, mu_max: 8.0, mu_points: 400, eta_points: 64, n_max: 8, iterations: 5 }
    }
}

/// Thresholds of the singularity indicators.
pub const AXIS_SLOPE_TOL: f64 = 0.3;
pub const RING_GROWTH_TOL: f64 = 0.5;
pub const RING_RATE_TOL: f64 = 0.05;
/// Modes below this fraction of the largest mode are treated as rounding noise.
pub const MODE_FLOOR: f64 = 1e-10;
/// Interface jump over the same measure at nearby smooth nodes.
pub const JUMP_CONTRAST_TOL: f64 = 10.0;
/// Singular-branch content relative to `max |v|` above which a mode is
/// flagged even when the sampled indicators cannot resolve it.
pub const BRANCH_TOL: f64 = 1e-8;
pub const QUADRATURE_TOL: f64 = 1e-2;
pub const MAGNETIC_AXIS_TOL: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ModeReport {
    pub n: u32,
    pub parity: Parity,
    /// Ratio of the log-slopes `Δv / Δ ln μ` over the first and second
    /// decades above `μ_min`: about 1 for a logarithm, about 0.01 for a
    /// function even in `μ`.
    pub axis_indicator: f64,
    /// Ratio of successive growth increments of `v e^{μ/2}` (which tracks
    /// `V` near the focal ring) over the last two unit steps in `μ`: about
    /// 1 for logarithmic growth, above 1 for exponential growth, about
    /// `e^{-2}` or less when `V` settles.
    pub ring_indicator: f64,
    /// Largest relative jump of `∂_μ v` across a matching surface.
    pub jump: f64,
    /// `jump` divided by the mismatch of the same one-sided differences six
    /// nodes away on either side, where `v` is smooth.
    pub jump_contrast: f64,
    /// Relative change of the Green-function correction when the μ-grid is
    /// halved.
    pub quadrature_mismatch: f64,
    pub max_abs: f64,
    /// `|β Q|` at `μ_min` over `max |v|`, where `v = α P + β Q` is the
    /// variation-of-parameters form carried through the iteration.
    pub axis_branch: f64,
    /// `|α P|` at `μ_max` over `max |v|`.
    pub ring_branch: f64,
    /// Largest `|[∂_μ v]| μ_m / max |v|` implied by the jump of `(α, β)`
    /// across a matching surface.
    pub jump_branch: f64,
}

impl ModeReport {
    pub fn axis_singular(&self) -> bool {
        self.axis_indicator > AXIS_SLOPE_TOL || self.axis_branch > BRANCH_TOL
    }
    pub fn ring_singular(&self) -> bool {
        self.ring_indicator > RING_GROWTH_TOL || self.ring_branch > BRANCH_TOL
    }
    pub fn discontinuous(&self) -> bool {
        self.jump_contrast > JUMP_CONTRAST_TOL || self.jump_branch > BRANCH_TOL
    }
    pub fn quadrature_failed(&self) -> bool {
        !(self.quadrature_mismatch <= QUADRATURE_TOL)
    }
    pub fn branch(&self) -> &'static str {
        match (self.axis_singular(), self.ring_singular(), self.discontinuous()) {
            (_, _, true) => "matched",
            (true, false, _) => "Q",
            (false, true, _) => "P",
            (true, true, _) => "P+Q",
            _ => "regular",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagneticReport {
    /// `|Δ ln|S'/sinh μ|| / Δ ln μ` next to the axis; `1` for `G(0) ≠ 0`.
    pub axis_indicator: f64,
    /// `d ln|S'/sinh μ|/dμ + 2` at `μ_max`.
    pub ring_indicator: f64,
    pub trivial: bool,
}

impl MagneticReport {
    pub fn singular(&self) -> bool {
        !self.trivial && (self.axis_indicator > MAGNETIC_AXIS_TOL || self.ring_indicator > RING_RATE_TOL)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub iteration: usize,
    pub modes: Vec<ModeReport>,
    pub magnetic: MagneticReport,
    pub singular_axis: bool,
    pub singular_ring: bool,
    pub discontinuous: bool,
    pub quadrature_failed: bool,
    pub trivial: bool,
    /// `max |v^k - v^{k-1}|` over all modes; zero for the seed.
    pub update_norm: f64,
    /// The update grew compared with the previous iteration.
    pub diverging: bool,
}

impl IterationReport {
    /// No indicator fired and the candidate is not identically zero.
    pub fn certified_smooth(&self) -> bool {
        !(self.singular_axis
            || self.singular_ring
            || self.discontinuous
            || self.quadrature_failed
            || self.trivial
            || self.diverging
            || self.magnetic.singular())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproximationReport {
    pub mu_grid: Vec<f64>,
    pub iterations: Vec<IterationReport>,
}

impl ApproximationReport {
    pub fn any_certified_smooth(&self) -> bool {
        self.iterations.iter().any(IterationReport::certified_smooth)
    }
}

fn mu_grid(cfg: &ApproximationConfig, seeds: &[ToroidalMode]) -> Vec<f64> {
    let ratio = (cfg.mu_max / cfg.mu_min).ln() / (cfg.mu_points - 1) as f64;
    let mut mus: Vec<f64> = (0..cfg.mu_points).map(|i| cfg.mu_min * (ratio * i as f64).exp()).collect();
    for m in seeds {
        if let Radial::Matched { mu_m } = m.radial {
            if mu_m > cfg.mu_min && mu_m < cfg.mu_max {
                mus.push(mu_m);
            }
        }
    }
    mus.sort_by(|a, b| a.total_cmp(b));
    mus.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    mus
}

/// Cumulative trapezoid integrals from the left and from the right.
fn cumulative(mus: &[f64], f: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = mus.len();
    let mut left = vec![0.0; n];
    for i in 1..n {
        left[i] = left[i - 1] + 0.5 * (mus[i] - mus[i - 1]) * (f[i] + f[i - 1]);
    }
    let mut right = vec![0.0; n];
    for i in (0..n - 1).rev() {
        right[i] = right[i + 1] + 0.5 * (mus[i + 1] - mus[i]) * (f[i] + f[i + 1]);
    }
    (left, right)
}

/// Solves `L_n v = f` with the Green function regular at both ends,
/// `v = -[Q ∫_0^μ P f sinh + P ∫_μ^∞ Q f sinh]`, on the given nodes.
/// Also returns the coefficients `(α, β)` of `v = α P + β Q`.
fn green_solve(mus: &[f64], p: &[f64], q: &[f64], f: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let pf: Vec<f64> = (0..mus.len()).map(|i| p[i] * f[i] * mus[i].sinh()).collect();
    let qf: Vec<f64> = (0..mus.len()).map(|i| q[i] * f[i] * mus[i].sinh()).collect();
    let (left, _) = cumulative(mus, &pf);
    let (_, right) = cumulative(mus, &qf);
    let alpha: Vec<f64> = right.iter().map(|r| -r).collect();
    let beta: Vec<f64> = left.iter().map(|l| -l).collect();
    let v = (0..mus.len()).map(|i| alpha[i] * p[i] + beta[i] * q[i]).collect();
    (v, alpha, beta)
}

/// First derivative at node `i` from the nodes `idx` (Lagrange weights).
fn lagrange_derivative(mus: &[f64], vals: &[f64], i: usize, idx: &[usize]) -> f64 {
    let x0 = mus[i];
    let mut d = 0.0;
    for &j in idx {
        // derivative of the j-th Lagrange basis polynomial at x0
        let mut wj = 0.0;
        for &m in idx {
            if m == j {
                continue;
            }
            let mut term = 1.0 / (mus[j] - mus[m]);
            for &l in idx {
                if l != j && l != m {
                    term *= (x0 - mus[l]) / (mus[j] - mus[l]);
                }
            }
            wj += term;
        }
        d += wj * vals[j];
    }
    d
}

struct ModeState {
    n: u32,
    parity: Parity,
    values: Vec<f64>,
    seed: Vec<f64>,
    quadrature_mismatch: f64,
    /// `|β Q|` at the first node and `|α P|` at the last.
    axis_content: f64,
    ring_content: f64,
    /// `(μ_m, |[∂_μ v]|)` per matching surface.
    kinks: Vec<(f64, f64)>,
}

/// Branch coefficients `(α, β)` of a seed at `μ`.
fn seed_branch(s: &ToroidalMode, mu: f64) -> (f64, f64) {
    let d = consistent_degree(s.n);
    let at = |kind, mu| special::toroidal_with_derivative(kind, d, mu).unwrap_or((f64::NAN, f64::NAN));
    match s.radial {
        Radial::P => (s.coef, 0.0),
        Radial::Q => (0.0, s.coef),
        Radial::Matched { mu_m } if mu < mu_m => (s.coef / at(LegendreKind::P, mu_m).0, 0.0),
        Radial::Matched { mu_m } => (0.0, s.coef / at(LegendreKind::Q, mu_m).0),
    }
}

/// Jump of `∂_μ v` across the matching surface of a matched seed.
fn seed_kink(s: &ToroidalMode) -> Option<(f64, f64)> {
    let Radial::Matched { mu_m } = s.radial else { return None };
    let d = consistent_degree(s.n);
    let (p, dp) = special::toroidal_with_derivative(LegendreKind::P, d, mu_m).ok()?;
    let (q, dq) = special::toroidal_with_derivative(LegendreKind::Q, d, mu_m).ok()?;
    Some((mu_m, s.coef * (dq / q - dp / p)))
}

fn node_near(mus: &[f64], target: f64) -> usize {
    let k = mus.partition_point(|&m| m < target).min(mus.len() - 1);
    if k > 0 && (mus[k - 1] - target).abs() < (mus[k] - target).abs() {
        k - 1
    } else {
        k
    }
}

fn mode_report(st: &ModeState, mus: &[f64], interfaces: &[usize], floor: f64) -> ModeReport {
    let v = &st.values;
    let n = mus.len();
    let max_abs = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut rep = ModeReport {
        n: st.n,
        parity: st.parity,
        axis_indicator: 0.0,
        ring_indicator: 0.0,
        jump: 0.0,
        jump_contrast: 0.0,
        quadrature_mismatch: st.quadrature_mismatch,
        max_abs,
        axis_branch: 0.0,
        ring_branch: 0.0,
        jump_branch: 0.0,
    };
    if max_abs <= floor {
        return rep;
    }
    rep.axis_branch = st.axis_content / max_abs;
    rep.ring_branch = st.ring_content / max_abs;
    rep.jump_branch = st.kinks.iter().fold(0.0_f64, |m, &(mu_m, k)| m.max(k.abs() * mu_m / max_abs));
    let noise = 1e-12 * max_abs;

    let (j1, j2) = (node_near(mus, 10.0 * mus[0]), node_near(mus, 100.0 * mus[0]));
    let slope = |i: usize, j: usize| (v[j] - v[i]) / (mus[j] / mus[i]).ln();
    let (s1, s2) = (slope(0, j1), slope(j1, j2));
    if s1.abs() > noise {
        rep.axis_indicator = (s1 / s2).abs().min(1e6);
    }

    let ks = [n - 1, node_near(mus, mus[n - 1] - 1.0), node_near(mus, mus[n - 1] - 2.0)];
    let g: Vec<f64> = ks.iter().map(|&k| v[k] * (0.5 * mus[k]).exp()).collect();
    let d2 = (g[0] - g[1]) / (mus[ks[0]] - mus[ks[1]]);
    let d1 = (g[1] - g[2]) / (mus[ks[1]] - mus[ks[2]]);
    if d2.abs() > 1e-9 * g[0].abs() {
        rep.ring_indicator = (d2 / d1).abs().min(1e6);
    }

    let one_sided_mismatch = |i: usize| {
        let left = lagrange_derivative(mus, v, i, &[i - 3, i - 2, i - 1, i]);
        let right = lagrange_derivative(mus, v, i, &[i, i + 1, i + 2, i + 3]);
        (left - right).abs() / left.abs().max(right.abs()).max(f64::MIN_POSITIVE)
    };
    for &i in interfaces {
        if i < 9 || i + 9 >= n {
            continue;
        }
        let jump = one_sided_mismatch(i);
        let baseline = one_sided_mismatch(i - 6).max(one_sided_mismatch(i + 6)).max(1e-14);
        rep.jump = rep.jump.max(jump);
        rep.jump_contrast = rep.jump_contrast.max(jump / baseline);
    }
    rep
}

fn magnetic_report(g: &dyn RadialProfile, cfg: &ApproximationConfig) -> MagneticReport {
    let b = |mu: f64| s_prime(g, mu) / mu.sinh();
    let (b0, b1) = (b(cfg.mu_min), b(10.0 * cfg.mu_min));
    let (r0, r1) = (b(cfg.mu_max - 1.0), b(cfg.mu_max));
    let trivial = [b0, b1, b(1.0), r0, r1].iter().all(|&x| x == 0.0);
    let axis_indicator = if trivial {
        0.0
    } else if b0 == 0.0 || b1 == 0.0 || !b0.is_finite() {
        1.0
    } else {
        (b0.abs().ln() - b1.abs().ln()).abs() / 10f64.ln()
    };
    let ring_indicator = if trivial || r0 == 0.0 || r1 == 0.0 {
        f64::NEG_INFINITY
    } else {
        r1.abs().ln() - r0.abs().ln() + 2.0
    };
    MagneticReport { axis_indicator, ring_indicator, trivial }
}

/// Successive approximations for the electrostatic potential at fixed `G`:
/// `v⁰` is the seed, `v^{k+1} = v⁰ + Green[s(v^k)]` mode by mode, with the
/// source projected onto `cos nη`, `sin nη` for `n ≤ n_max`. Each iterate
/// is scanned for singular or discontinuous content.
pub fn successive_approximation(
    seeds: &[ToroidalMode],
    g: &dyn RadialProfile,
    params: &CouplingParams,
    cfg: &ApproximationConfig,
) -> Result<ApproximationReport> {
    if !(cfg.mu_min > 0.0 && cfg.mu_max > cfg.mu_min + 1.0) || cfg.mu_points < 16 || cfg.eta_points < 4 {
        return Err(Error::Domain("invalid successive-approximation grid".into()));
    }
    for s in seeds {
        if s.n > cfg.n_max {
            return Err(Error::Domain(format!("seed mode n = {} exceeds n_max = {}", s.n, cfg.n_max)));
        }
    }
    let mus = mu_grid(cfg, seeds);
    let nm = mus.len();
    let interfaces: Vec<usize> = seeds
        .iter()
        .filter_map(|m| match m.radial {
            Radial::Matched { mu_m } => mus.iter().position(|&x| (x - mu_m).abs() <= 1e-12 * mu_m),
            _ => None,
        })
        .collect();

    // Mode layout: cos 0..=n_max, then sin 1..=n_max.
    let mut layout: Vec<(u32, Parity)> = (0..=cfg.n_max).map(|n| (n, Parity::Cos)).collect();
    layout.extend((1..=cfg.n_max).map(|n| (n, Parity::Sin)));
    // P_{n-1/2}, Q_{n-1/2} on the nodes.
    let top = cfg.n_max as usize;
    let ladders: Vec<(Vec<f64>, Vec<f64>)> =
        mus.iter().map(|&mu| (special::p_ladder(top, mu), special::q_ladder(top, mu))).collect();
    let last = nm - 1;
    // Seed β at the axis node and α at the ring node, per mode.
    let mut seed_ends = Vec::with_capacity(layout.len());
    let mut states: Vec<ModeState> = layout
        .iter()
        .map(|&(n, parity)| {
            let mut seed = vec![0.0; nm];
            let (mut beta0, mut alpha_last, mut kinks) = (0.0, 0.0, Vec::new());
            for s in seeds.iter().filter(|s| s.n == n && s.parity == parity) {
                for (i, &mu) in mus.iter().enumerate() {
                    seed[i] += s.coef * s.radial_value(mu).0;
                }
                beta0 += seed_branch(s, mus[0]).1;
                alpha_last += seed_branch(s, mus[last]).0;
                kinks.extend(seed_kink(s));
            }
            seed_ends.push((beta0, alpha_last));
            let (p_last, q0) = (ladders[last].0[n as usize], ladders[0].1[n as usize]);
            ModeState {
                n,
                parity,
                values: seed.clone(),
                seed,
                quadrature_mismatch: 0.0,
                axis_content: (beta0 * q0).abs(),
                ring_content: (alpha_last * p_last).abs(),
                kinks,
            }
        })
        .collect();

    let sp: Vec<f64> = mus.iter().map(|&mu| s_prime(g, mu)).collect();
    let etas: Vec<f64> = (0..cfg.eta_points).map(|j| 2.0 * PI * j as f64 / cfg.eta_points as f64).collect();
    let deta = 2.0 * PI / cfg.eta_points as f64;
    let magnetic = magnetic_report(g, cfg);

    let half_idx: Vec<usize> = (0..nm).step_by(2).collect();
    let mus_half: Vec<f64> = half_idx.iter().map(|&i| mus[i]).collect();

    let mut reports: Vec<IterationReport> = Vec::with_capacity(cfg.iterations + 1);
    let mut update_norm = 0.0;
    for it in 0..=cfg.iterations {
        let prev_update = reports.last().map(|r| r.update_norm).unwrap_or(0.0);
        let global = states.iter().flat_map(|s| s.values.iter()).fold(0.0_f64, |m, x| m.max(x.abs()));
        let floor = MODE_FLOOR * global;
        let modes: Vec<ModeReport> = states.iter().map(|s| mode_report(s, &mus, &interfaces, floor)).collect();
        let trivial = modes.iter().all(|m| m.max_abs == 0.0);
        reports.push(IterationReport {
            iteration: it,
            singular_axis: modes.iter().any(ModeReport::axis_singular),
            singular_ring: modes.iter().any(ModeReport::ring_singular),
            discontinuous: modes.iter().any(ModeReport::discontinuous),
            quadrature_failed: modes.iter().any(ModeReport::quadrature_failed),
            trivial,
            update_norm,
            diverging: it >= 2 && update_norm > prev_update,
            modes,
            magnetic: magnetic.clone(),
        });
        if it == cfg.iterations {
            break;
        }

        // Source on the (μ, η) grid and its Fourier projection.
        let mut proj = vec![vec![0.0; nm]; states.len()];
        for i in 0..nm {
            let mu = mus[i];
            for &eta in &etas {
                let (mut v, mut ve, mut vee) = (0.0, 0.0, 0.0);
                for st in &states {
                    let n = st.n as f64;
                    let (s, c) = (n * eta).sin_cos();
                    let r = st.values[i];
                    match st.parity {
                        Parity::Cos => {
                            v += r * c;
                            ve -= r * n * s;
                            vee -= r * n * n * c;
                        }
                        Parity::Sin => {
                            v += r * s;
                            ve += r * n * c;
                            vee -= r * n * n * s;
                        }
                    }
                }
                let src = source_from_parts(params, mu, eta, sp[i], v, ve, vee);
                for (k, st) in states.iter().enumerate() {
                    let n = st.n as f64;
                    let basis = match st.parity {
                        Parity::Cos => (n * eta).cos(),
                        Parity::Sin => (n * eta).sin(),
                    };
                    let norm = if st.n == 0 { 2.0 * PI } else { PI };
                    proj[k][i] += src * basis * deta / norm;
                }
            }
        }

        let mut mismatch = Vec::with_capacity(states.len());
        let mut ends = Vec::with_capacity(states.len());
        let mut updated = Vec::with_capacity(states.len());
        for (k, st) in states.iter().enumerate() {
            let n = st.n as usize;
            let p: Vec<f64> = ladders.iter().map(|l| l.0[n]).collect();
            let q: Vec<f64> = ladders.iter().map(|l| l.1[n]).collect();
            let f = &proj[k];
            let (corr, alpha, beta) = green_solve(&mus, &p, &q, f);
            let pick = |v: &[f64]| -> Vec<f64> { half_idx.iter().map(|&i| v[i]).collect() };
            let (corr_half, _, _) = green_solve(&mus_half, &pick(&p), &pick(&q), &pick(f));
            let (beta0, alpha_last) = seed_ends[k];
            ends.push(((beta0 + beta[0]) * q[0], (alpha_last + alpha[last]) * p[last]));
            let scale = corr.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            let diff = half_idx
                .iter()
                .zip(&corr_half)
                .fold(0.0_f64, |m, (&i, c)| m.max((corr[i] - c).abs()));
            mismatch.push((diff, scale));
            updated.push(st.seed.iter().zip(&corr).map(|(s, c)| s + c).collect::<Vec<f64>>());
        }
        let corr_global = mismatch.iter().fold(0.0_f64, |m, (_, s)| m.max(*s));
        update_norm = 0.0;
        for (((st, (diff, scale)), values), (axis, ring)) in states.iter_mut().zip(mismatch).zip(updated).zip(ends) {
            // α and β of the correction are continuous, so the kinks stay those of the seed.
            st.axis_content = axis.abs();
            st.ring_content = ring.abs();
            for (new, old) in values.iter().zip(&st.values) {
                update_norm = f64::max(update_norm, (new - old).abs());
            }
            let denom = scale.max(MODE_FLOOR * corr_global);
            st.quadrature_mismatch = if diff == 0.0 { 0.0 } else if denom == 0.0 { f64::INFINITY } else { diff / denom };
            st.values = values;
        }
    }
    Ok(ApproximationReport { mu_grid: mus, iterations: reports })
}

/// Max-norm residuals of the two product-rule identities behind the no-go
/// argument, evaluated with the grid stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NogoResiduals {
    /// `div(E + k B (E·B)) - (div E + k B·∇(E·B))`.
    pub divergence: f64,
    /// `curl(B - k E (E·B)) - (curl B + k E × ∇(E·B))`.
    pub curl: f64,
}

/// Relative tolerance for the `curl E = 0`, `div B = 0` preconditions.
pub const NOGO_PRECONDITION_TOL: f64 = 1e-9;

pub fn nogo_identity_check(
    e: &Vec3Field,
    b: &Vec3Field,
    params: &CouplingParams,
    stencil: Stencil,
) -> Result<NogoResiduals> {
    let curl_e = stencil.curl(e).max_abs();
    let div_b = stencil.div(b).max_abs();
    let h = e.grid.min_spacing();
    let scale_e = e.max_abs() / h;
    let scale_b = b.max_abs() / h;
    if curl_e > NOGO_PRECONDITION_TOL * scale_e.max(f64::MIN_POSITIVE) {
        return Err(Error::Precondition(format!("curl E = {curl_e:e} is not zero")));
    }
    if div_b > NOGO_PRECONDITION_TOL * scale_b.max(f64::MIN_POSITIVE) {
        return Err(Error::Precondition(format!("div B = {div_b:e} is not zero")));
    }
    let k = params.k();
    let eb = crate::constitutive::e_dot_b(e, b)?;
    let grad_eb = stencil.grad(&eb);
    let d = e.zip_map(b, |e, b| e + b * (k * e.dot(&b)))?;
    let hh = e.zip_map(b, |e, b| b - e * (k * e.dot(&b)))?;

    let lhs_div = stencil.div(&d);
    let div_e = stencil.div(e);
    let b_grad = b.zip_scalar(&grad_eb, |b, g| b.dot(&g))?;
    let mut divergence = 0.0_f64;
    for i in 0..lhs_div.values.len() {
        divergence = divergence.max((lhs_div.values[i] - div_e.values[i] - k * b_grad.values[i]).abs());
    }

    let lhs_curl = stencil.curl(&hh);
    let curl_b = stencil.curl(b);
    let e_cross = e.zip_map(&grad_eb, |e, g| e.cross(&g))?;
    let mut curl = 0.0_f64;
    for i in 0..e.grid.len() {
        let r = lhs_curl.get(i) - curl_b.get(i) - e_cross.get(i) * k;
        curl = curl.max(r.x().abs()).max(r.y().abs()).max(r.z().abs());
    }
    Ok(NogoResiduals { divergence, curl })
}

/// Static fields `E = -∇V`, `B = curl A` from potentials sampled on the grid.
pub fn fields_from_potentials(v: &ScalarField, a: &Vec3Field, stencil: Stencil) -> (Vec3Field, Vec3Field) {
    (stencil.grad(v).negated(), stencil.curl(a))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Volume and surface sides of the divergence theorem for the energy flux
/// `F = ψ ∇ψ - V curl C` on a ball of radius `radius` about `centre`.
///
/// The volume side integrates `|∇ψ|² + ψ Δψ - ∇V · curl C`, which is
/// `div F` written out with the product rule; derivatives of the supplied
/// smooth functions are taken by fourth-order central differences.
pub fn energy_flux_identity<P, V, C>(psi: P, v: V, c: C, centre: Vec3, radius: f64, nodes: usize) -> (f64, f64)
where
    P: Fn(Vec3) -> f64,
    V: Fn(Vec3) -> f64,
    C: Fn(Vec3) -> Vec3,
{
    let h = 1e-3 * radius;
    let axes = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0)];
    let d1 = |f: &dyn Fn(Vec3) -> f64, r: Vec3, e: Vec3| {
        (8.0 * (f(r + e * h) - f(r - e * h)) - (f(r + e * (2.0 * h)) - f(r - e * (2.0 * h)))) / (12.0 * h)
    };
    let grad = |f: &dyn Fn(Vec3) -> f64, r: Vec3| Vec3::new(d1(f, r, axes[0]), d1(f, r, axes[1]), d1(f, r, axes[2]));
    let lap = |f: &dyn Fn(Vec3) -> f64, r: Vec3| {
        axes.iter()
            .map(|&e| {
                (-(f(r + e * (2.0 * h)) + f(r - e * (2.0 * h))) + 16.0 * (f(r + e * h) + f(r - e * h)) - 30.0 * f(r))
                    / (12.0 * h * h)
            })
            .sum::<f64>()
    };
    let c = &c;
    let comp = |i: usize| move |r: Vec3| c(r).0[i];
    let curl_c = |r: Vec3| {
        let (c0, c1, c2) = (comp(0), comp(1), comp(2));
        Vec3::new(
            d1(&c2, r, axes[1]) - d1(&c1, r, axes[2]),
            d1(&c0, r, axes[2]) - d1(&c2, r, axes[0]),
            d1(&c1, r, axes[0]) - d1(&c0, r, axes[1]),
        )
    };
    let flux = |r: Vec3| grad(&psi, r) * psi(r) - curl_c(r) * v(r);
    let density = |r: Vec3| {
        let gp = grad(&psi, r);
        gp.norm_sq() + psi(r) * lap(&psi, r) - grad(&v, r).dot(&curl_c(r))
    };

    let (x, w) = gauss_legendre(nodes);
    let nphi = 2 * nodes;
    let dphi = 2.0 * PI / nphi as f64;
    let mut volume = 0.0;
    let mut surface = 0.0;
    for (ct, wt) in x.iter().zip(&w) {
        let st = (1.0 - ct * ct).sqrt();
        for k in 0..nphi {
            let phi = dphi * k as f64;
            let dir = Vec3::new(st * phi.cos(), st * phi.sin(), *ct);
            surface += wt * dphi * radius * radius * flux(centre + dir * radius).dot(&dir);
            for (xr, wr) in x.iter().zip(&w) {
                let r = 0.5 * radius * (xr + 1.0);
                volume += wt * dphi * 0.5 * radius * wr * r * r * density(centre + dir * r);
            }
        }
    }
    (volume, surface)
}
