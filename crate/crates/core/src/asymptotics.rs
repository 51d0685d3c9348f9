//! Far-field expansion around a point charge plus magnetic dipole.
//!
//! With `E = E⁰ + E¹/e² + …`, `B = B⁰ + B¹/e² + …` the static equations give
//! first-order sources
//!
//! ```text
//! div E¹ = -3 B⁰·∇(E⁰·B⁰)
//! rot B¹ =  3 ∇(E⁰·B⁰) × E⁰
//! ```
//!
//! All gradients below are differentiated by hand.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZerothOrderParams {
    /// Total charge.
    pub q: f64,
    /// Magnetic dipole moment along `z`.
    pub mu_dip: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl ZerothOrderParams {
    pub fn new(q: f64, mu_dip: f64, r_min: f64, r_max: f64) -> Result<Self> {
        if !(q.is_finite() && mu_dip.is_finite()) {
            return Err(Error::Domain("charge and dipole moment must be finite".into()));
        }
        if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) {
            return Err(Error::Domain(format!("sample shell [{r_min}, {r_max}] is invalid")));
        }
        Ok(Self { q, mu_dip, r_min, r_max })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylindrical {
    pub rho: f64,
    pub z: f64,
    pub phi: f64,
}

impl Cylindrical {
    pub fn new(rho: f64, z: f64, phi: f64) -> Self {
        Self { rho, z, phi }
    }

    pub fn to_cartesian(&self) -> Vec3 {
        Vec3::new(self.rho * self.phi.cos(), self.rho * self.phi.sin(), self.z)
    }

    pub fn radius(&self) -> f64 {
        self.rho.hypot(self.z)
    }

    pub fn e_rho(&self) -> Vec3 {
        Vec3::new(self.phi.cos(), self.phi.sin(), 0.0)
    }

    pub fn e_phi(&self) -> Vec3 {
        Vec3::new(-self.phi.sin(), self.phi.cos(), 0.0)
    }
}

/// `3×3` matrix `m[i][j] = ∂_j F_i`.
pub type Jacobian = [[f64; 3]; 3];

fn check_origin(x: Vec3) -> Result<f64> {
    let r = x.norm();
    if r == 0.0 || !r.is_finite() {
        return Err(Error::Domain("the far-field expansion excludes the origin".into()));
    }
    Ok(r)
}

/// `E⁰ = Q x / R³`, `B⁰ = μ (3 z x - R² e_z) / (4 R⁵)` in Cartesian components.
pub fn zeroth_fields(p: &Cylindrical, z0: &ZerothOrderParams) -> Result<(Vec3, Vec3)> {
    let x = p.to_cartesian();
    let r = check_origin(x)?;
    let r2 = r * r;
    let e = x * (z0.q / (r2 * r));
    let b = (x * (3.0 * x.z()) - Vec3::new(0.0, 0.0, r2)) * (z0.mu_dip / (4.0 * r2 * r2 * r));
    Ok((e, b))
}

/// `∂_j E⁰_i = Q (δ_ij / R³ - 3 x_i x_j / R⁵)`.
pub fn grad_e0(x: Vec3, q: f64) -> Result<Jacobian> {
    let r = check_origin(x)?;
    let (r3, r5) = (r.powi(3), r.powi(5));
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let d = if i == j { 1.0 } else { 0.0 };
            *v = q * (d / r3 - 3.0 * x.0[i] * x.0[j] / r5);
        }
    }
    Ok(m)
}

/// `∂_j B⁰_i = (μ/4) [(3 δ_jz x_i + 3 z δ_ij - 2 x_j δ_iz)/R⁵ - 5 (3 z x_i - R² δ_iz) x_j / R⁷]`.
pub fn grad_b0(x: Vec3, mu: f64) -> Result<Jacobian> {
    let r = check_origin(x)?;
    let (r2, r5, r7) = (r * r, r.powi(5), r.powi(7));
    let z = x.z();
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let first = (3.0 * delta(j, 2) * x.0[i] + 3.0 * z * delta(i, j) - 2.0 * x.0[j] * delta(i, 2)) / r5;
            let second = 5.0 * (3.0 * z * x.0[i] - r2 * delta(i, 2)) * x.0[j] / r7;
            *v = 0.25 * mu * (first - second);
        }
    }
    Ok(m)
}

/// `∇(E⁰·B⁰)` from the two Jacobians.
pub fn grad_e_dot_b(p: &Cylindrical, z0: &ZerothOrderParams) -> Result<Vec3> {
    let x = p.to_cartesian();
    let (e, b) = zeroth_fields(p, z0)?;
    let (ge, gb) = (grad_e0(x, z0.q)?, grad_b0(x, z0.mu_dip)?);
    let mut g = [0.0; 3];
    for (j, gj) in g.iter_mut().enumerate() {
        for i in 0..3 {
            *gj += ge[i][j] * b.0[i] + e.0[i] * gb[i][j];
        }
    }
    Ok(Vec3(g))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderSample {
    pub point: Cylindrical,
    /// `div E¹` with the `1/e²` of the expansion stripped.
    pub div_e1: f64,
    /// `(rot B¹)_φ`, same normalization.
    pub rot_b1_phi: f64,
}

impl FirstOrderSample {
    /// The same sources with the `1/e²` factor restored.
    pub fn with_coupling(&self, e2: f64) -> (f64, f64) {
        (self.div_e1 / e2, self.rot_b1_phi / e2)
    }
}

pub fn first_order_sources(z0: &ZerothOrderParams, points: &[Cylindrical]) -> Result<Vec<FirstOrderSample>> {
    points
        .iter()
        .map(|p| {
            let (e, b) = zeroth_fields(p, z0)?;
            let g = grad_e_dot_b(p, z0)?;
            let div_e1 = -3.0 * b.dot(&g);
            let rot = g.cross(&e) * 3.0;
            Ok(FirstOrderSample { point: *p, div_e1, rot_b1_phi: rot.dot(&p.e_phi()) })
        })
        .collect()
}

/// `(ρ² + 10 z²) / R¹¹`.
pub fn charge_shape(p: &Cylindrical) -> f64 {
    let r = p.radius();
    (p.rho * p.rho + 10.0 * p.z * p.z) / r.powi(11)
}

/// `ρ / R⁹`.
pub fn current_shape(p: &Cylindrical) -> f64 {
    p.rho / p.radius().powi(9)
}

/// Closed-form prefactors `(3μ²Q/8, 3μQ²/2)` multiplying the two shapes.
pub fn closed_form_prefactors(z0: &ZerothOrderParams) -> (f64, f64) {
    (3.0 * z0.mu_dip * z0.mu_dip * z0.q / 8.0, 1.5 * z0.mu_dip * z0.q * z0.q)
}

/// `n` points log-spaced over the shell along the meridian at polar angle
/// `theta` from the `+z` axis.
pub fn ray_points(z0: &ZerothOrderParams, theta: f64, n: usize) -> Vec<Cylindrical> {
    let (lo, hi) = (z0.r_min.ln(), z0.r_max.ln());
    (0..n)
        .map(|i| {
            let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            let r = (lo + t * (hi - lo)).exp();
            Cylindrical::new(r * theta.sin(), r * theta.cos(), 0.0)
        })
        .collect()
}

/// Points spread over the shell in both radius and polar angle, avoiding
/// the axis and the equatorial plane.
pub fn shell_points(z0: &ZerothOrderParams, n: usize) -> Vec<Cylindrical> {
    let (lo, hi) = (z0.r_min.ln(), z0.r_max.ln());
    (0..n)
        .map(|i| {
            let t = (i as f64 + 0.5) / n as f64;
            let r = (lo + t * (hi - lo)).exp();
            let theta = 0.1 + (FRAC_PI_2 - 0.2) * ((i * 7) % n) as f64 / n as f64 + if i % 2 == 1 { FRAC_PI_2 } else { 0.0 };
            Cylindrical::new(r * theta.sin(), r * theta.cos(), 0.37 * i as f64)
        })
        .collect()
}

/// Least-squares slope of `ln|value|` against `ln r`.
pub fn falloff_fit(radii: &[f64], values: &[f64]) -> Result<f64> {
    if radii.len() != values.len() || radii.len() < 2 {
        return Err(Error::Domain("falloff fit needs at least two paired samples".into()));
    }
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(values)
        .map(|(r, v)| (r.ln(), v.abs().ln()))
        .collect();
    if pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Domain("falloff fit needs positive radii and nonzero values".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("falloff fit needs distinct radii".into()));
    }
    Ok(sxy / sxx)
}
