//! Curvature of the five-dimensional Kaluza-Klein metric for a constant
//! electromagnetic field tensor, and the quadratic Gauss-Bonnet invariant.
//!
//! Frame indices run over `0, 1, 2, 3, 5`; the fifth direction is stored at
//! array position 4. The flat frame metric is `diag(+1, -1, -1, -1, +1)`.
//! With `F` constant, every component carrying a derivative of `F` vanishes and
//! the non-zero Riemann components are
//!
//! ```text
//! R_{μνλρ} = ¼ (F_{μλ} F_{ρν} - F_{νλ} F_{ρμ} + 2 F_{μν} F_{ρλ})
//! R_{μ55λ} = ¼ F_{μν} η^{νρ} F_{ρλ}
//! ```
//!
//! plus the components related to these by the pair symmetries. The Ricci
//! tensor is the contraction `R_{BD} = g^{AC} R_{ABCD}`, which gives
//! `R_{μν} = -½ F_{μλ} F_ν^λ`, `R_{55} = ¼ F_{μν} F^{μν}` and the scalar
//! `R = -¼ F_{μν} F^{μν} = ½ (E² - B²)`.

use crate::constitutive::CouplingParams;
use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Minkowski metric diagonal, signature (+, -, -, -).
pub const MINKOWSKI: [f64; 4] = [1.0, -1.0, -1.0, -1.0];
/// Diagonal of the flat five-dimensional frame metric with `g_55 = +1`.
pub const FRAME_METRIC: [f64; 5] = [1.0, -1.0, -1.0, -1.0, 1.0];

const ANTISYMMETRY_TOL: f64 = 1e-12;

/// Constant antisymmetric electromagnetic tensor `F_{μν}` (lower indices).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldTensor4 {
    f: [[f64; 4]; 4],
}

impl FieldTensor4 {
    /// Validates antisymmetry; the tolerance is relative to the largest entry.
    pub fn new(f: [[f64; 4]; 4]) -> Result<Self> {
        let scale = f.iter().flatten().fold(1.0_f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0_f64;
        for mu in 0..4 {
            for nu in 0..4 {
                worst = worst.max((f[mu][nu] + f[nu][mu]).abs());
            }
        }
        if !(worst <= ANTISYMMETRY_TOL * scale) {
            return Err(Error::NotAntisymmetric(worst));
        }
        Ok(Self { f })
    }

    /// Builds `F` from electric and magnetic vectors with
    /// `E_i = F_{0i}`, `B_1 = F_{32}`, `B_2 = F_{13}`, `B_3 = F_{21}`.
    pub fn from_eb(e: Vec3, b: Vec3) -> Self {
        let [e1, e2, e3] = e.0;
        let [b1, b2, b3] = b.0;
        Self {
            f: [
                [0.0, e1, e2, e3],
                [-e1, 0.0, -b3, b2],
                [-e2, b3, 0.0, -b1],
                [-e3, -b2, b1, 0.0],
            ],
        }
    }

    pub fn electric(&self) -> Vec3 {
        Vec3::new(self.f[0][1], self.f[0][2], self.f[0][3])
    }

    pub fn magnetic(&self) -> Vec3 {
        Vec3::new(self.f[3][2], self.f[1][3], self.f[2][1])
    }

    pub fn components(&self) -> &[[f64; 4]; 4] {
        &self.f
    }

    #[inline]
    pub fn get(&self, mu: usize, nu: usize) -> f64 {
        self.f[mu][nu]
    }

    /// `F^{μν}`, indices raised with the Minkowski metric.
    pub fn raised(&self) -> [[f64; 4]; 4] {
        let mut up = [[0.0; 4]; 4];
        for mu in 0..4 {
            for nu in 0..4 {
                up[mu][nu] = MINKOWSKI[mu] * MINKOWSKI[nu] * self.f[mu][nu];
            }
        }
        up
    }

    /// First invariant `F_{μν} F^{μν}`.
    pub fn invariant_ff(&self) -> f64 {
        let up = self.raised();
        let mut s = 0.0;
        for mu in 0..4 {
            for nu in 0..4 {
                s += self.f[mu][nu] * up[mu][nu];
            }
        }
        s
    }

    /// Applies a coordinate transformation acting on lower indices,
    /// `F'_{μν} = M_μ^α M_ν^β F_{αβ}`.
    pub fn transformed(&self, m: &[[f64; 4]; 4]) -> Self {
        let mut out = [[0.0; 4]; 4];
        for mu in 0..4 {
            for nu in 0..4 {
                let mut s = 0.0;
                for a in 0..4 {
                    for b in 0..4 {
                        s += m[mu][a] * m[nu][b] * self.f[a][b];
                    }
                }
                out[mu][nu] = s;
            }
        }
        Self { f: out }
    }
}

/// Pure boost with the given rapidity along a unit direction.
pub fn lorentz_boost(direction: Vec3, rapidity: f64) -> [[f64; 4]; 4] {
    let n = direction * (1.0 / direction.norm());
    let (ch, sh) = (rapidity.cosh(), rapidity.sinh());
    let mut m = [[0.0; 4]; 4];
    m[0][0] = ch;
    for i in 0..3 {
        m[0][i + 1] = sh * n.0[i];
        m[i + 1][0] = sh * n.0[i];
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            m[i + 1][j + 1] = delta + (ch - 1.0) * n.0[i] * n.0[j];
        }
    }
    m
}

/// Spatial rotation by `angle` about a unit axis (Rodrigues formula).
pub fn spatial_rotation(axis: Vec3, angle: f64) -> [[f64; 4]; 4] {
    let k = axis * (1.0 / axis.norm());
    let (c, s) = (angle.cos(), angle.sin());
    let mut m = [[0.0; 4]; 4];
    m[0][0] = 1.0;
    let cross = [[0.0, -k.z(), k.y()], [k.z(), 0.0, -k.x()], [-k.y(), k.x(), 0.0]];
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            m[i + 1][j + 1] = c * delta + s * cross[i][j] + (1.0 - c) * k.0[i] * k.0[j];
        }
    }
    m
}

/// Frame components of the Riemann tensor, Ricci tensor and scalar curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct Curvature5 {
    pub riemann: [[[[f64; 5]; 5]; 5]; 5],
    pub ricci: [[f64; 5]; 5],
    pub scalar: f64,
}

impl Curvature5 {
    /// `g^{AC} R_{ABCD}` computed from the stored Riemann components.
    pub fn contracted_riemann(&self) -> [[f64; 5]; 5] {
        let mut out = [[0.0; 5]; 5];
        for b in 0..5 {
            for d in 0..5 {
                out[b][d] = (0..5).map(|a| FRAME_METRIC[a] * self.riemann[a][b][a][d]).sum();
            }
        }
        out
    }

    /// `g^{AB} R_{AB}`.
    pub fn ricci_trace(&self) -> f64 {
        (0..5).map(|a| FRAME_METRIC[a] * self.ricci[a][a]).sum()
    }
}

/// Assembles all curvature components for a constant field tensor.
pub fn assemble_curvature(f: &FieldTensor4) -> Curvature5 {
    let fl = f.components();
    let mut riemann = [[[[0.0; 5]; 5]; 5]; 5];

    for mu in 0..4 {
        for nu in 0..4 {
            for la in 0..4 {
                for rho in 0..4 {
                    riemann[mu][nu][la][rho] = 0.25
                        * (fl[mu][la] * fl[rho][nu] - fl[nu][la] * fl[rho][mu]
                            + 2.0 * fl[mu][nu] * fl[rho][la]);
                }
            }
        }
    }

    // R_{μ55λ} = ¼ F_{μν} η^{νρ} F_{ρλ} (symmetric in μ, λ)
    for mu in 0..4 {
        for la in 0..4 {
            let v: f64 = 0.25 * (0..4).map(|nu| fl[mu][nu] * MINKOWSKI[nu] * fl[nu][la]).sum::<f64>();
            riemann[mu][4][4][la] = v;
            riemann[4][mu][la][4] = v;
            riemann[mu][4][la][4] = -v;
            riemann[4][mu][4][la] = -v;
        }
    }

    let mut ricci = [[0.0; 5]; 5];
    for mu in 0..4 {
        for nu in 0..4 {
            ricci[mu][nu] =
                -0.5 * (0..4).map(|la| MINKOWSKI[la] * fl[mu][la] * fl[nu][la]).sum::<f64>();
        }
    }
    let ff = f.invariant_ff();
    ricci[4][4] = 0.25 * ff;

    Curvature5 { riemann, ricci, scalar: -0.25 * ff }
}

/// `R_{ABCD} R^{ABCD} - 4 R_{AB} R^{AB} + R²` with flat frame raises.
pub fn gauss_bonnet(c: &Curvature5) -> f64 {
    let g = FRAME_METRIC;
    let mut riem_sq = 0.0;
    for a in 0..5 {
        for b in 0..5 {
            for cc in 0..5 {
                for d in 0..5 {
                    let r = c.riemann[a][b][cc][d];
                    if r != 0.0 {
                        riem_sq += g[a] * g[b] * g[cc] * g[d] * r * r;
                    }
                }
            }
        }
    }
    let mut ric_sq = 0.0;
    for a in 0..5 {
        for b in 0..5 {
            ric_sq += g[a] * g[b] * c.ricci[a][b] * c.ricci[a][b];
        }
    }
    riem_sq - 4.0 * ric_sq + c.scalar * c.scalar
}

/// `(3/16) [(F_{μν}F^{μν})² - 2 F_{μλ} F_{νρ} F^{μν} F^{λρ}]`.
pub fn i2_closed_form(f: &FieldTensor4) -> f64 {
    let fl = f.components();
    let up = f.raised();
    let ff = f.invariant_ff();
    let mut quartic = 0.0;
    for mu in 0..4 {
        for la in 0..4 {
            for nu in 0..4 {
                for rho in 0..4 {
                    quartic += fl[mu][la] * fl[nu][rho] * up[mu][nu] * up[la][rho];
                }
            }
        }
    }
    3.0 / 16.0 * (ff * ff - 2.0 * quartic)
}

/// The quadratic invariant expressed through the fields: `-(3/2) (E·B)²`.
pub fn i2_from_eb(e: Vec3, b: Vec3) -> f64 {
    let eb = e.dot(&b);
    -1.5 * eb * eb
}

/// `½ (E² - B²) + (3ε / 2e²) (E·B)²`.
pub fn lagrangian_eb(e: Vec3, b: Vec3, params: &CouplingParams) -> f64 {
    let eb = e.dot(&b);
    0.5 * (e.norm_sq() - b.norm_sq()) + 1.5 * params.epsilon / params.e2 * eb * eb
}

#[cfg(test)]
mod tests {
    use super::*;

    fn only_f01() -> FieldTensor4 {
        let mut f = [[0.0; 4]; 4];
        f[0][1] = 1.0;
        f[1][0] = -1.0;
        FieldTensor4::new(f).unwrap()
    }

    #[test]
    fn rejects_non_antisymmetric_input() {
        let mut f = [[0.0; 4]; 4];
        f[0][1] = 1.0;
        f[1][0] = 0.5;
        assert!(matches!(FieldTensor4::new(f), Err(Error::NotAntisymmetric(_))));
        f[1][0] = -1.0;
        f[2][2] = 1e-3;
        assert!(FieldTensor4::new(f).is_err());
    }

    #[test]
    fn zero_field_has_zero_curvature() {
        let c = assemble_curvature(&FieldTensor4::new([[0.0; 4]; 4]).unwrap());
        assert!(c.riemann.iter().flatten().flatten().flatten().all(|&v| v == 0.0));
        assert_eq!(c.scalar, 0.0);
        assert_eq!(gauss_bonnet(&c), 0.0);
    }

    #[test]
    fn pure_electric_tensor() {
        let f = only_f01();
        assert_eq!(f.invariant_ff(), -2.0);
        let c = assemble_curvature(&f);
        assert_eq!(c.scalar, 0.5);
        assert!(gauss_bonnet(&c).abs() < 1e-15);
        assert!(i2_closed_form(&f).abs() < 1e-15);
        assert_eq!(f.electric(), Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(f.magnetic(), Vec3::ZERO);
    }

    #[test]
    fn eb_dictionary_round_trip_and_invariant() {
        let e = Vec3::new(0.3, -1.2, 0.7);
        let b = Vec3::new(-0.4, 0.9, 2.1);
        let f = FieldTensor4::from_eb(e, b);
        assert!(FieldTensor4::new(*f.components()).is_ok());
        assert_eq!(f.electric(), e);
        assert_eq!(f.magnetic(), b);
        let expect = -2.0 * (e.norm_sq() - b.norm_sq());
        assert!((f.invariant_ff() - expect).abs() < 1e-13);
    }

    #[test]
    fn riemann_pair_antisymmetry() {
        let f = FieldTensor4::from_eb(Vec3::new(0.5, 1.0, -0.2), Vec3::new(0.1, -0.3, 0.8));
        let c = assemble_curvature(&f);
        for a in 0..5 {
            for b in 0..5 {
                for cc in 0..5 {
                    for d in 0..5 {
                        let r = c.riemann[a][b][cc][d];
                        assert!((r + c.riemann[b][a][cc][d]).abs() < 1e-14);
                        assert!((r + c.riemann[a][b][d][cc]).abs() < 1e-14);
                        assert!((r - c.riemann[cc][d][a][b]).abs() < 1e-14);
                    }
                }
            }
        }
        for a in 0..5 {
            for b in 0..5 {
                assert!((c.ricci[a][b] - c.ricci[b][a]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn lagrangian_examples() {
        let p = CouplingParams::default();
        assert_eq!(lagrangian_eb(Vec3::ZERO, Vec3::ZERO, &p), 0.0);
        let null = lagrangian_eb(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), &p);
        assert_eq!(null, 0.0);
        let par = lagrangian_eb(Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), &p);
        assert_eq!(par, 1.5);
    }

    #[test]
    fn boosts_and_rotations_preserve_minkowski_metric() {
        let m = lorentz_boost(Vec3::new(1.0, 2.0, -0.5), 0.8);
        let r = spatial_rotation(Vec3::new(0.2, -1.0, 0.4), 1.1);
        for t in [m, r] {
            for a in 0..4 {
                for b in 0..4 {
                    let s: f64 = (0..4).map(|c| t[c][a] * MINKOWSKI[c] * t[c][b]).sum();
                    let expect = if a == b { MINKOWSKI[a] } else { 0.0 };
                    assert!((s - expect).abs() < 1e-12);
                }
            }
        }
    }
}
