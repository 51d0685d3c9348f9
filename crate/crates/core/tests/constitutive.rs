use kknled_core::constitutive::{self, pointwise};
use kknled_core::curvature::lagrangian_eb;
use kknled_core::{CouplingParams, GridSpec, Stencil, Vec3, Vec3Field};
use nalgebra::{Matrix3, SymmetricEigen};
use proptest::prelude::*;

fn vec3() -> impl Strategy<Value = Vec3> {
    (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn params() -> impl Strategy<Value = CouplingParams> {
    (prop_oneof![Just(0.0), Just(1.0)], 0.2f64..5.0).prop_map(|(eps, e2)| CouplingParams::new(eps, e2, 1.0).unwrap())
}

#[test]
fn energy_density_examples() {
    let p = CouplingParams::default();
    let x = Vec3::new(1.0, 0.0, 0.0);
    let y = Vec3::new(0.0, 1.0, 0.0);
    assert!((pointwise::energy_density(x, x, &p) - 2.5).abs() < 1e-15);
    assert!((pointwise::energy_density(x, y, &p) - 1.0).abs() < 1e-15);
    assert_eq!(pointwise::energy_density(Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 0.0), &p), 0.0);
}

#[test]
fn negative_epsilon_may_lose_invertibility() {
    let p = CouplingParams::new(-1.0, 1.0, 1.0).unwrap();
    let grid = GridSpec::cube(4, 1.0).unwrap();
    let b = Vec3Field::from_fn(grid, |_| Vec3::new(1.0, 0.0, 0.0));
    let d = Vec3Field::from_fn(grid, |_| Vec3::new(1.0, 0.0, 0.0));
    assert!(constitutive::e_from_d(&d, &b, &p).is_err());
}

proptest! {
    #[test]
    fn round_trip(e in vec3(), b in vec3(), p in params()) {
        let back = pointwise::e_from_d(pointwise::d_from_e(e, b, &p), b, &p);
        let scale = 1.0 + e.norm() * (1.0 + p.k() * b.norm_sq());
        prop_assert!((back - e).norm() <= 1e-13 * scale);
    }

    #[test]
    fn d_and_h_are_lagrangian_derivatives(e in vec3(), b in vec3()) {
        let p = CouplingParams::new(1.0, 2.0, 1.0).unwrap();
        let h = 1e-4;
        let d = pointwise::d_from_e(e, b, &p);
        let hh = pointwise::h_from_b(e, b, &p);
        for i in 0..3 {
            let mut u = [0.0; 3];
            u[i] = h;
            let u = Vec3(u);
            let de = (lagrangian_eb(e + u, b, &p) - lagrangian_eb(e - u, b, &p)) / (2.0 * h);
            let db = (lagrangian_eb(e, b + u, &p) - lagrangian_eb(e, b - u, &p)) / (2.0 * h);
            let scale = 1.0 + d.norm() + hh.norm();
            prop_assert!((de - d.0[i]).abs() < 1e-6 * scale);
            prop_assert!((db + hh.0[i]).abs() < 1e-6 * scale);
        }
    }

    #[test]
    fn hessian_is_positive_definite(b in vec3(), p in params()) {
        let h = pointwise::hessian(b, &p);
        let m = Matrix3::from_fn(|i, j| h[i][j]);
        let eig = SymmetricEigen::new(m).eigenvalues;
        for ev in eig.iter() {
            prop_assert!(*ev >= 1.0 - 1e-12);
        }
        let top = eig.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert!((top - (1.0 + p.k() * b.norm_sq())).abs() < 1e-10 * top);
    }

    #[test]
    fn energy_is_even_in_each_field(e in vec3(), b in vec3(), p in params()) {
        let w = pointwise::energy_density(e, b, &p);
        prop_assert_eq!(w, pointwise::energy_density(-e, b, &p));
        prop_assert_eq!(w, pointwise::energy_density(e, -b, &p));
        prop_assert!(w >= 0.0);
    }
}

fn pulse(grid: GridSpec, centre: Vec3, width: f64) -> impl Fn(Vec3) -> f64 {
    move |r: Vec3| {
        let d = r - centre;
        let _ = grid;
        (-d.norm_sq() / (2.0 * width * width)).exp()
    }
}

/// Localized, mutually non-orthogonal static fields.
fn localized_pair() -> (Vec3Field, Vec3Field) {
    let grid = GridSpec::cube(24, 1.0).unwrap();
    let c = grid.center();
    let g = pulse(grid, c, 0.08);
    let h = pulse(grid, c + Vec3::new(0.04, -0.03, 0.02), 0.07);
    let e = Vec3Field::from_fn(grid, |r| Vec3::new(0.6, 0.3 + (r - c).x() * 4.0, -0.2) * g(r));
    let b = Vec3Field::from_fn(grid, |r| Vec3::new(0.4 + (r - c).y() * 5.0, 0.5, 0.3) * h(r));
    (e, b)
}

#[test]
fn quadruplet_table() {
    let (e, b) = localized_pair();
    let p = CouplingParams::default();
    let origin = e.grid.center();
    let obs: Vec<_> = constitutive::quadruplet(&e, &b)
        .iter()
        .map(|(e, b)| constitutive::observables_with(e, b, &p, origin, Stencil::Fourth).unwrap())
        .collect();
    let base = obs[0];
    assert!(base.charge.abs() > 1e-8 && base.magnetic_moment.norm() > 1e-8 && base.angular_momentum.norm() > 1e-8);
    assert!(!base.boundary_warning);
    let signs = [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)];
    for (o, (sq, sm, ss)) in obs.iter().zip(signs) {
        assert_eq!(o.energy, base.energy);
        assert_eq!(o.charge, sq * base.charge);
        assert_eq!(o.magnetic_moment, base.magnetic_moment * sm);
        assert_eq!(o.angular_momentum, base.angular_momentum * ss);
    }
}

#[test]
fn crossed_fields_have_no_induced_sources() {
    let grid = GridSpec::cube(16, 1.0).unwrap();
    let e = Vec3Field::from_fn(grid, |r| Vec3::new(0.0, (6.283 * r.x()).sin(), 0.0));
    let b = Vec3Field::from_fn(grid, |r| Vec3::new(0.0, 0.0, (6.283 * r.x()).cos()));
    let p = CouplingParams::default();
    assert_eq!(constitutive::induced_charge(&e, &b, &p).unwrap().max_abs(), 0.0);
    let z = Vec3Field::zeros(grid);
    let j = constitutive::induced_current(&e, &b, &z, &z, &p).unwrap();
    assert_eq!(j.max_abs(), 0.0);
}

#[test]
fn boundary_warning_for_extended_fields() {
    let grid = GridSpec::cube(8, 1.0).unwrap();
    let e = Vec3Field::from_fn(grid, |_| Vec3::new(1.0, 0.0, 0.0));
    let o = constitutive::observables(&e, &e, &CouplingParams::default(), grid.center()).unwrap();
    assert!(o.boundary_warning);
}
