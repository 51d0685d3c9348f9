//! Complete elliptic integrals and toroidal (half-integer degree) Legendre
//! functions `P_ν(cosh μ)`, `Q_ν(cosh μ)`.
//!
//! The two lowest degrees come from closed forms in complete elliptic
//! integrals evaluated by the arithmetic-geometric mean:
//!
//! ```text
//! P_{-1/2}(cosh μ) = 2 K(tanh(μ/2)) / (π cosh(μ/2))
//! P_{1/2}(cosh μ)  = (2/π) e^{μ/2} E(√(1 - e^{-2μ}))
//! Q_{-1/2}(cosh μ) = 2 e^{-μ/2} K(e^{-μ})
//! Q_{1/2}(cosh μ)  = 2 e^{μ/2} [K(e^{-μ}) - E(e^{-μ})]
//! ```
//!
//! (arguments are moduli). Higher degrees follow from the three-term
//! recurrence `(ν+1) f_{ν+1} = (2ν+1) z f_ν - ν f_{ν-1}`, run forward for `P`
//! and backward (Miller's algorithm) for `Q`, where forward recursion is
//! unstable.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Complete elliptic integrals for modulus `k` with complementary modulus
/// `kp = √(1 - k²)` supplied separately to avoid cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticKE {
    pub k: f64,
    pub e: f64,
    /// `K - E`, accurate for small modulus.
    pub k_minus_e: f64,
}

pub fn elliptic_ke(k: f64, kp: f64) -> EllipticKE {
    let (mut a, mut b) = (1.0_f64, kp);
    let mut c = k;
    let mut weight = 0.5;
    let mut sum = weight * c * c;
    for _ in 0..40 {
        if (a - b).abs() <= 4.0 * f64::EPSILON * a {
            break;
        }
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        c = 0.5 * (a - b);
        a = an;
        b = bn;
        weight *= 2.0;
        sum += weight * c * c;
    }
    let kk = PI / (2.0 * a);
    let k_minus_e = kk * sum;
    EllipticKE { k: kk, e: kk - k_minus_e, k_minus_e }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LegendreKind {
    P,
    Q,
}

/// Half-odd-integer degree `ν = twice / 2`, restricted to `ν ≥ -1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HalfInteger {
    twice: i32,
}

impl HalfInteger {
    pub fn from_twice(twice: i32) -> Result<Self> {
        if twice % 2 == 0 || twice < -1 {
            return Err(Error::Domain(format!("degree {twice}/2 is not a half-integer >= -1/2")));
        }
        Ok(Self { twice })
    }

    /// `n - 1/2`; requires `n ≥ 0`.
    pub fn minus_half(n: u32) -> Self {
        Self { twice: 2 * n as i32 - 1 }
    }

    /// `n + 1/2`.
    pub fn plus_half(n: u32) -> Self {
        Self { twice: 2 * n as i32 + 1 }
    }

    pub fn value(&self) -> f64 {
        self.twice as f64 / 2.0
    }

    /// Position in the ladder `-1/2, 1/2, 3/2, …`.
    pub fn rung(&self) -> usize {
        ((self.twice + 1) / 2) as usize
    }
}

/// Result of evaluating a toroidal function; `Q` diverges at `x = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ToroidalValue {
    Finite(f64),
    Singular,
}

impl ToroidalValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            ToroidalValue::Finite(v) => Some(v),
            ToroidalValue::Singular => None,
        }
    }
}

/// `P_ν(x)` or `Q_ν(x)` for `x ≥ 1`.
pub fn legendre_half(kind: LegendreKind, degree: HalfInteger, x: f64) -> Result<ToroidalValue> {
    if !(x >= 1.0) || !x.is_finite() {
        return Err(Error::Domain(format!("toroidal functions need x >= 1, got {x}")));
    }
    let mu = x.acosh();
    toroidal_at_mu(kind, degree, mu)
}

/// Same as [`legendre_half`] with `x = cosh μ`; preferable near `x = 1`.
pub fn toroidal_at_mu(kind: LegendreKind, degree: HalfInteger, mu: f64) -> Result<ToroidalValue> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::Domain(format!("mu must be finite and >= 0, got {mu}")));
    }
    let m = degree.rung();
    Ok(match kind {
        LegendreKind::P => ToroidalValue::Finite(p_ladder(m, mu)[m]),
        LegendreKind::Q if mu == 0.0 => ToroidalValue::Singular,
        LegendreKind::Q => ToroidalValue::Finite(q_ladder(m, mu)[m]),
    })
}

/// `P_{m-1/2}(cosh μ)` for `m = 0..=top`.
pub fn p_ladder(top: usize, mu: f64) -> Vec<f64> {
    let z = mu.cosh();
    let half = 0.5 * mu;
    let lo = elliptic_ke(half.tanh(), 1.0 / half.cosh());
    let p0 = 2.0 * lo.k / (PI * half.cosh());
    let mut out = vec![p0];
    if top == 0 {
        return out;
    }
    let q = (-2.0 * mu).exp();
    let hi = elliptic_ke((-(-2.0 * mu).exp_m1()).sqrt(), q.sqrt());
    out.push(2.0 / PI * half.exp() * hi.e);
    for r in 1..top {
        let nu = r as f64 - 0.5;
        let next = ((2.0 * nu + 1.0) * z * out[r] - nu * out[r - 1]) / (nu + 1.0);
        out.push(next);
    }
    out
}

const MILLER_MU: f64 = 0.05;

/// `Q_{m-1/2}(cosh μ)` for `m = 0..=top`, `μ > 0`.
pub fn q_ladder(top: usize, mu: f64) -> Vec<f64> {
    let z = mu.cosh();
    let em = (-mu).exp();
    let ke = elliptic_ke(em, (-(-2.0 * mu).exp_m1()).sqrt());
    let q0 = 2.0 * (-0.5 * mu).exp() * ke.k;
    if top == 0 {
        return vec![q0];
    }
    let q1 = 2.0 * (0.5 * mu).exp() * ke.k_minus_e;
    if mu < MILLER_MU || top == 1 {
        let mut out = vec![q0, q1];
        for r in 1..top {
            let nu = r as f64 - 0.5;
            let next = ((2.0 * nu + 1.0) * z * out[r] - nu * out[r - 1]) / (nu + 1.0);
            out.push(next);
        }
        return out;
    }

    // Backward recursion from well above `top`; the minimal solution dominates
    // on the way down and is normalized against the closed form for ν = -1/2.
    let start = top + (40.0 / mu).ceil() as usize + 8;
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1e-250;
    for r in (1..=start).rev() {
        let nu = r as f64 - 0.5;
        vals[r - 1] = ((2.0 * nu + 1.0) * z * vals[r] - (nu + 1.0) * vals[r + 1]) / nu;
        if vals[r - 1].abs() > 1e250 {
            for v in vals.iter_mut().skip(r - 1) {
                *v *= 1e-250;
            }
        }
    }
    let scale = q0 / vals[0];
    vals.truncate(top + 1);
    vals.iter().map(|v| v * scale).collect()
}

/// Value and `d/dμ` of `P_ν(cosh μ)` or `Q_ν(cosh μ)`.
pub fn toroidal_with_derivative(kind: LegendreKind, degree: HalfInteger, mu: f64) -> Result<(f64, f64)> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::Domain(format!("mu must be finite and >= 0, got {mu}")));
    }
    let m = degree.rung();
    let nu = degree.value();
    match kind {
        LegendreKind::P if mu < SERIES_MU => Ok(p_series(nu, mu)),
        LegendreKind::P => {
            let l = p_ladder(m + 1, mu);
            Ok((l[m], (nu + 1.0) * (l[m + 1] - mu.cosh() * l[m]) / mu.sinh()))
        }
        LegendreKind::Q if mu == 0.0 => {
            Err(Error::Domain("Q-type toroidal functions diverge at mu = 0".into()))
        }
        LegendreKind::Q => {
            let l = q_ladder(m + 1, mu);
            Ok((l[m], (nu + 1.0) * (l[m + 1] - mu.cosh() * l[m]) / mu.sinh()))
        }
    }
}

const SERIES_MU: f64 = 0.5;

/// Hypergeometric series `P_ν = F(-ν, ν+1; 1; -sinh²(μ/2))` and its μ-derivative.
fn p_series(nu: f64, mu: f64) -> (f64, f64) {
    let s = (0.5 * mu).sinh().powi(2);
    let ds = 0.5 * mu.sinh();
    let (mut value, mut deriv) = (1.0, 0.0);
    let mut coef = 1.0;
    for k in 0..200 {
        let kf = k as f64;
        coef *= (kf - nu) * (kf + nu + 1.0) / ((kf + 1.0) * (kf + 1.0)) * -1.0;
        let term = coef * s.powi(k + 1);
        deriv += coef * (kf + 1.0) * s.powi(k) * ds;
        value += term;
        if term.abs() < 1e-18 * value.abs() {
            break;
        }
    }
    (value, deriv)
}
