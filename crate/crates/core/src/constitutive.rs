//! Pointwise nonlinear structure of the vacuum theory.
//!
//! With `k = 3ε/e²` the Lagrangian `½(E² - B²) + (k/2)(E·B)²` gives
//!
//! ```text
//! D = E + k (E·B) B        H = B - k (E·B) E
//! ρ_ind = -k B·∇(E·B)      j_ind = k [B ∂t(E·B) - E × ∇(E·B)]
//! ℋ = ½(E² + B²) + (k/2)(E·B)²
//! ```
//!
//! The energy density is the canonical `E·∂ℒ/∂E - ℒ`.

use crate::error::{Error, Result};
use crate::grid::{integrate, integrate_vec, same_grid, ScalarField, Stencil, Vec3Field};
use crate::vec3::Vec3;

/// Coupling constants of the theory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParams {
    /// Sign of the quartic term, one of -1, 0, +1.
    pub epsilon: f64,
    /// Squared coupling `e²`, in inverse length squared.
    pub e2: f64,
    /// Toroidal scale length.
    pub a: f64,
}

impl Default for CouplingParams {
    fn default() -> Self {
        Self { epsilon: 1.0, e2: 1.0, a: 1.0 }
    }
}

impl CouplingParams {
    pub fn new(epsilon: f64, e2: f64, a: f64) -> Result<Self> {
        if ![-1.0, 0.0, 1.0].contains(&epsilon) {
            return Err(Error::Domain(format!("epsilon must be -1, 0 or 1, got {epsilon}")));
        }
        if !(e2 > 0.0 && e2.is_finite()) {
            return Err(Error::Domain(format!("e2 must be positive, got {e2}")));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("a must be positive, got {a}")));
        }
        Ok(Self { epsilon, e2, a })
    }

    /// `3ε/e²`.
    #[inline]
    pub fn k(&self) -> f64 {
        3.0 * self.epsilon / self.e2
    }
}

/// Single-point versions of the constitutive maps.
pub mod pointwise {
    use super::CouplingParams;
    use crate::vec3::Vec3;

    #[inline]
    pub fn d_from_e(e: Vec3, b: Vec3, p: &CouplingParams) -> Vec3 {
        e + b * (p.k() * e.dot(&b))
    }

    /// Inverse of [`d_from_e`] at fixed `B`. Requires `e² + 3ε|B|² > 0`.
    #[inline]
    pub fn e_from_d(d: Vec3, b: Vec3, p: &CouplingParams) -> Vec3 {
        let denom = p.e2 + 3.0 * p.epsilon * b.norm_sq();
        d - b * (3.0 * p.epsilon * d.dot(&b) / denom)
    }

    #[inline]
    pub fn h_from_b(e: Vec3, b: Vec3, p: &CouplingParams) -> Vec3 {
        b - e * (p.k() * e.dot(&b))
    }

    #[inline]
    pub fn energy_density(e: Vec3, b: Vec3, p: &CouplingParams) -> f64 {
        let eb = e.dot(&b);
        0.5 * (e.norm_sq() + b.norm_sq()) + 0.5 * p.k() * eb * eb
    }

    /// `∂D_i/∂E_j = δ_ij + k B_i B_j`.
    pub fn hessian(b: Vec3, p: &CouplingParams) -> [[f64; 3]; 3] {
        let mut h = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] = if i == j { 1.0 } else { 0.0 } + p.k() * b.0[i] * b.0[j];
            }
        }
        h
    }
}

pub fn d_from_e(e: &Vec3Field, b: &Vec3Field, p: &CouplingParams) -> Result<Vec3Field> {
    e.zip_map(b, |e, b| pointwise::d_from_e(e, b, p))
}

pub fn e_from_d(d: &Vec3Field, b: &Vec3Field, p: &CouplingParams) -> Result<Vec3Field> {
    same_grid(&d.grid, &b.grid)?;
    if p.epsilon < 0.0 {
        let worst = p.e2 + 3.0 * p.epsilon * b.max_norm().powi(2);
        if worst <= 0.0 {
            return Err(Error::Domain("constitutive map is not invertible for this B".into()));
        }
    }
    d.zip_map(b, |d, b| pointwise::e_from_d(d, b, p))
}

pub fn h_from_b(e: &Vec3Field, b: &Vec3Field, p: &CouplingParams) -> Result<Vec3Field> {
    e.zip_map(b, |e, b| pointwise::h_from_b(e, b, p))
}

pub fn energy_density(e: &Vec3Field, b: &Vec3Field, p: &CouplingParams) -> Result<ScalarField> {
    e.zip_scalar(b, |e, b| pointwise::energy_density(e, b, p))
}

pub fn poynting(e: &Vec3Field, b: &Vec3Field) -> Result<Vec3Field> {
    e.zip_map(b, |e, b| e.cross(&b))
}

/// `E·B` at every node.
pub fn e_dot_b(e: &Vec3Field, b: &Vec3Field) -> Result<ScalarField> {
    e.zip_scalar(b, |e, b| e.dot(&b))
}

/// `ρ_ind = -k B·∇(E·B)` with the default stencil.
pub fn induced_charge(e: &Vec3Field, b: &Vec3Field, p: &CouplingParams) -> Result<ScalarField> {
    induced_charge_with(e, b, p, Stencil::default())
}

pub fn induced_charge_with(
    e: &Vec3Field,
    b: &Vec3Field,
    p: &CouplingParams,
    stencil: Stencil,
) -> Result<ScalarField> {
    let g = stencil.grad(&e_dot_b(e, b)?);
    let k = p.k();
    b.zip_scalar(&g, |b, g| -k * b.dot(&g))
}

/// `j_ind = k [B ∂t(E·B) - E × ∇(E·B)]` with the default stencil.
pub fn induced_current(
    e: &Vec3Field,
    b: &Vec3Field,
    dedt: &Vec3Field,
    dbdt: &Vec3Field,
    p: &CouplingParams,
) -> Result<Vec3Field> {
    induced_current_with(e, b, dedt, dbdt, p, Stencil::default())
}

pub fn induced_current_with(
    e: &Vec3Field,
    b: &Vec3Field,
    dedt: &Vec3Field,
    dbdt: &Vec3Field,
    p: &CouplingParams,
    stencil: Stencil,
) -> Result<Vec3Field> {
    same_grid(&e.grid, &dedt.grid)?;
    same_grid(&e.grid, &dbdt.grid)?;
    let g = stencil.grad(&e_dot_b(e, b)?);
    let k = p.k();
    let n = e.grid.len();
    let mut out = Vec3Field::zeros(e.grid);
    for i in 0..n {
        let (ei, bi) = (e.get(i), b.get(i));
        let rate = dedt.get(i).dot(&bi) + ei.dot(&dbdt.get(i));
        out.set(i, (bi * rate - ei.cross(&g.get(i))) * k);
    }
    Ok(out)
}

/// Induced current for time-independent fields, `-k E × ∇(E·B)`.
pub fn static_induced_current(
    e: &Vec3Field,
    b: &Vec3Field,
    p: &CouplingParams,
    stencil: Stencil,
) -> Result<Vec3Field> {
    let g = stencil.grad(&e_dot_b(e, b)?);
    let k = p.k();
    e.zip_map(&g, |e, g| e.cross(&g) * (-k))
}

/// Global integrals of a field configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub energy: f64,
    pub charge: f64,
    pub magnetic_moment: Vec3,
    pub angular_momentum: Vec3,
    /// Set when the fields do not decay towards the box faces, so that the
    /// moment integrals depend on where the periodic box is cut.
    pub boundary_warning: bool,
}

/// Relative field strength on the box faces above which
/// [`Observables::boundary_warning`] is raised.
pub const BOUNDARY_TOLERANCE: f64 = 1e-6;

/// Energy, induced charge, magnetic moment `½∫ r × j_ind` and angular
/// momentum `∫ r × (E × B)` about `origin`. The current is the static part
/// `-k E × ∇(E·B)`.
pub fn observables(
    e: &Vec3Field,
    b: &Vec3Field,
    p: &CouplingParams,
    origin: Vec3,
) -> Result<Observables> {
    observables_with(e, b, p, origin, Stencil::default())
}

pub fn observables_with(
    e: &Vec3Field,
    b: &Vec3Field,
    p: &CouplingParams,
    origin: Vec3,
    stencil: Stencil,
) -> Result<Observables> {
    same_grid(&e.grid, &b.grid)?;
    let grid = e.grid;
    let energy = integrate(&energy_density(e, b, p)?);
    let charge = integrate(&induced_charge_with(e, b, p, stencil)?);
    let j = static_induced_current(e, b, p, stencil)?;
    let arm = |idx: usize| grid.position(idx) - origin;

    let mut torque = Vec3Field::zeros(grid);
    let mut spin = Vec3Field::zeros(grid);
    for i in 0..grid.len() {
        let r = arm(i);
        torque.set(i, r.cross(&j.get(i)) * 0.5);
        spin.set(i, r.cross(&e.get(i).cross(&b.get(i))));
    }

    Ok(Observables {
        energy,
        charge,
        magnetic_moment: integrate_vec(&torque),
        angular_momentum: integrate_vec(&spin),
        boundary_warning: touches_boundary(e, b),
    })
}

fn touches_boundary(e: &Vec3Field, b: &Vec3Field) -> bool {
    let grid = e.grid;
    let peak = e.max_norm().max(b.max_norm());
    if peak == 0.0 {
        return false;
    }
    let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz);
    let mut face = 0.0_f64;
    for idx in 0..grid.len() {
        let (i, j, k) = grid.unravel(idx);
        if i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1 {
            face = face.max(e.get(idx).norm()).max(b.get(idx).norm());
        }
    }
    face > BOUNDARY_TOLERANCE * peak
}

/// The four sign-flipped configurations `(E,B), (E,-B), (-E,B), (-E,-B)`.
pub fn quadruplet(e: &Vec3Field, b: &Vec3Field) -> [(Vec3Field, Vec3Field); 4] {
    [
        (e.clone(), b.clone()),
        (e.clone(), b.negated()),
        (e.negated(), b.clone()),
        (e.negated(), b.negated()),
    ]
}
