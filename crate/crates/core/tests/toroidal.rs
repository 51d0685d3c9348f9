use std::f64::consts::PI;

use kknled_core::special::{toroidal_at_mu, HalfInteger, LegendreKind};
use kknled_core::toroidal::*;
use kknled_core::{CouplingParams, GridSpec, ScalarField, Stencil, Vec3, Vec3Field};
use proptest::prelude::*;

/// `(μ, η)` from Cartesian position, computed independently of the library
/// as bipolar angles in the meridional half-plane.
fn toroidal_of(x: Vec3, a: f64) -> (f64, f64) {
    let rho = (x.x() * x.x() + x.y() * x.y()).sqrt();
    let z = x.z();
    let mu = 0.5 * (((rho + a).powi(2) + z * z) / ((rho - a).powi(2) + z * z)).ln();
    let eta = (z.atan2(rho - a) - z.atan2(rho + a)).rem_euclid(2.0 * PI);
    (mu, eta)
}

fn w_of(mu: f64, eta: f64) -> f64 {
    mu.cosh() - eta.cos()
}

fn regular_g() -> impl RadialProfile {
    weak_g(1.0)
}

/// `G = c tanh μ sech μ`: `B` is finite on the axis and decays at the ring.
fn weak_g(c: f64) -> impl RadialProfile {
    FnProfile::new(
        move |m: f64| c * m.tanh() / m.cosh(),
        move |m: f64| c * (1.0 - 2.0 * m.tanh().powi(2)) / m.cosh(),
    )
}

const AXES: [Vec3; 3] = [Vec3([1.0, 0.0, 0.0]), Vec3([0.0, 1.0, 0.0]), Vec3([0.0, 0.0, 1.0])];

fn d6(f: &dyn Fn(Vec3) -> f64, x: Vec3, e: Vec3, h: f64) -> f64 {
    let c = [3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
    (0..3).map(|s| c[s] * (f(x + e * ((s + 1) as f64 * h)) - f(x - e * ((s + 1) as f64 * h)))).sum::<f64>() / h
}

fn d4(f: &dyn Fn(Vec3) -> f64, x: Vec3, e: Vec3, h: f64) -> f64 {
    (8.0 * (f(x + e * h) - f(x - e * h)) - (f(x + e * (2.0 * h)) - f(x - e * (2.0 * h)))) / (12.0 * h)
}

fn grad6(f: &dyn Fn(Vec3) -> f64, x: Vec3, h: f64) -> Vec3 {
    Vec3::new(d6(f, x, AXES[0], h), d6(f, x, AXES[1], h), d6(f, x, AXES[2], h))
}

fn curl6(a: &dyn Fn(Vec3) -> Vec3, x: Vec3, h: f64) -> Vec3 {
    let c = |i: usize| move |r: Vec3| a(r).0[i];
    let (a0, a1, a2) = (c(0), c(1), c(2));
    Vec3::new(
        d6(&a2, x, AXES[1], h) - d6(&a1, x, AXES[2], h),
        d6(&a0, x, AXES[2], h) - d6(&a2, x, AXES[0], h),
        d6(&a1, x, AXES[0], h) - d6(&a0, x, AXES[1], h),
    )
}

struct Oracle<'a> {
    modes: &'a [ToroidalMode],
    g: &'a dyn RadialProfile,
    params: CouplingParams,
}

impl Oracle<'_> {
    fn potential(&self, x: Vec3) -> f64 {
        let (mu, eta) = toroidal_of(x, self.params.a);
        let mut v = 0.0;
        for m in self.modes {
            v += m.coef * m.radial_value(mu).0 * m.angular(eta).0;
        }
        v * w_of(mu, eta).sqrt()
    }

    fn vector_potential(&self, x: Vec3) -> Vec3 {
        let (mu, eta) = toroidal_of(x, self.params.a);
        let a_phi = w_of(mu, eta) * self.g.value(mu);
        let rho = (x.x() * x.x() + x.y() * x.y()).sqrt();
        Vec3::new(-x.y() / rho, x.x() / rho, 0.0) * a_phi
    }

    fn e(&self, x: Vec3) -> Vec3 {
        -grad6(&|r| self.potential(r), x, 1e-3)
    }

    fn b(&self, x: Vec3) -> Vec3 {
        curl6(&|r| self.vector_potential(r), x, 1e-3)
    }

    /// `ρ = div E = -k B·∇(E·B)` from the Gauss law `div(E + k B (E·B)) = 0`.
    fn charge(&self, x: Vec3) -> f64 {
        let eb = |r: Vec3| self.e(r).dot(&self.b(r));
        let h = 4e-3;
        let g = Vec3::new(d4(&eb, x, AXES[0], h), d4(&eb, x, AXES[1], h), d4(&eb, x, AXES[2], h));
        -self.params.k() * self.b(x).dot(&g)
    }
}

fn sample_modes() -> Vec<ToroidalMode> {
    vec![
        ToroidalMode::new(1, Parity::Cos, Radial::P, 0.8).unwrap(),
        ToroidalMode::new(2, Parity::Cos, Radial::Q, 0.5).unwrap(),
        ToroidalMode::new(1, Parity::Sin, Radial::P, 0.3).unwrap(),
        ToroidalMode::new(0, Parity::Cos, Radial::Q, -0.2).unwrap(),
    ]
}

#[test]
fn charge_density_matches_cartesian_oracle() {
    let params = CouplingParams::new(1.0, 0.7, 1.3).unwrap();
    let g = regular_g();
    let modes = sample_modes();
    let oracle = Oracle { modes: &modes, g: &g, params };
    let ansatz = StaticAnsatz { g: &g, v_modes: modes.clone(), params };
    for &(mu, eta, phi) in &[(0.6, 0.9, 0.2), (1.1, 2.5, 1.0), (0.9, 4.0, -0.7), (1.4, 5.5, 2.0)] {
        let p = ToroidalPoint::new(mu, eta, phi, params.a).unwrap();
        let x = toroidal_to_cartesian(&p).unwrap();
        let expected = oracle.charge(x);
        let got = ansatz.charge_density(&p);
        assert!((got - expected).abs() <= 1e-6 * expected.abs(), "mu={mu} eta={eta}: {got} vs {expected}");

        // the separated source is the same quantity in other units
        let src = w_source(&modes, &g, &params, mu, eta);
        let from_oracle = -params.a * params.a / p.w().powf(2.5) * expected;
        assert!((src - from_oracle).abs() <= 1e-6 * from_oracle.abs());
    }
}

#[test]
fn e_dot_b_matches_cartesian_oracle() {
    let params = CouplingParams::new(1.0, 1.0, 0.8).unwrap();
    let g = regular_g();
    let modes = sample_modes();
    let oracle = Oracle { modes: &modes, g: &g, params };
    let ansatz = StaticAnsatz { g: &g, v_modes: modes.clone(), params };
    let p = ToroidalPoint::new(0.7, 1.7, 0.4, params.a).unwrap();
    let x = toroidal_to_cartesian(&p).unwrap();
    let expected = oracle.e(x).dot(&oracle.b(x));
    assert!((ansatz.e_dot_b(&p) - expected).abs() < 1e-9 * expected.abs());
}

#[test]
fn b_eta_matches_curl_of_vector_potential() {
    let params = CouplingParams::new(1.0, 1.0, 1.7).unwrap();
    let g = regular_g();
    let oracle = Oracle { modes: &[], g: &g, params };
    for &(mu, eta) in &[(0.3, 1.0), (1.2, 3.5), (2.0, 5.9)] {
        let p = ToroidalPoint::new(mu, eta, 0.6, params.a).unwrap();
        let x = toroidal_to_cartesian(&p).unwrap();
        let b = oracle.b(x);
        let (em, ee, ep) = unit_vectors(&p);
        let b_eta = b_eta_from_g(&g, &p).finite().unwrap();
        assert!((b.dot(&ee) - b_eta).abs() < 1e-9 * b_eta.abs(), "{} vs {}", b.dot(&ee), b_eta);
        assert!(b.dot(&em).abs() < 1e-9 * b_eta.abs());
        assert!(b.dot(&ep).abs() < 1e-9 * b_eta.abs());
    }
}

fn laplacian(f: &dyn Fn(Vec3) -> f64, x: Vec3, h: f64) -> f64 {
    let c = [3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];
    AXES.iter()
        .map(|&e| {
            let mut s = -49.0 / 18.0 * f(x);
            for k in 0..3 {
                let d = e * ((k + 1) as f64 * h);
                s += c[k] * (f(x + d) + f(x - d));
            }
            s / (h * h)
        })
        .sum()
}

#[test]
fn consistent_degree_gives_harmonic_potentials() {
    let a = 1.0;
    for n in 0..4u32 {
        for (twice, harmonic) in [(2 * n as i32 - 1, true), (2 * n as i32 + 1, false)] {
            let d = HalfInteger::from_twice(twice).unwrap();
            let pot = |x: Vec3| {
                let (mu, eta) = toroidal_of(x, a);
                let r = toroidal_at_mu(LegendreKind::P, d, mu).unwrap().finite().unwrap();
                r * (n as f64 * eta).cos() * w_of(mu, eta).sqrt()
            };
            let p = ToroidalPoint::new(0.8, 2.2, 0.0, a).unwrap();
            let x = toroidal_to_cartesian(&p).unwrap();
            let lap = laplacian(&pot, x, 2e-3);
            let scale = pot(x).abs() / (a * a);
            if harmonic {
                assert!(lap.abs() < 1e-7 * scale, "n={n}: {lap}");
            } else {
                assert!(lap.abs() > 1e-2 * scale, "n={n} with P_(n+1/2) unexpectedly harmonic");
            }
        }
    }
}

#[test]
fn separated_equation_residuals() {
    let mus: Vec<f64> = (1..40).map(|i| 0.1 * i as f64).collect();
    for n in 0..6u32 {
        for kind in [LegendreKind::P, LegendreKind::Q] {
            let d = consistent_degree(n);
            let f = |m: f64| toroidal_at_mu(kind, d, m).unwrap().finite().unwrap();
            let r = separated_residual_relative(f, n, &mus, 2e-3);
            let worst = r.iter().cloned().fold(0.0, f64::max);
            assert!(worst <= 1e-8, "n={n} {kind:?}: {worst}");
        }
        let wrong = HalfInteger::plus_half(n);
        let f = |m: f64| toroidal_at_mu(LegendreKind::P, wrong, m).unwrap().finite().unwrap();
        let r = separated_residual_relative(f, n, &mus, 2e-3);
        assert!(r.iter().all(|&x| x > 1e-3), "P_(n+1/2) solves the equation for n={n}");
    }
}

#[test]
fn charge_profile_symmetry() {
    let params = CouplingParams::default();
    let g = regular_g();
    let even = StaticAnsatz {
        g: &g,
        v_modes: vec![
            ToroidalMode::new(1, Parity::Cos, Radial::P, 1.0).unwrap(),
            ToroidalMode::new(2, Parity::Cos, Radial::P, 0.4).unwrap(),
        ],
        params,
    };
    let prof = charge_profile(&even, 1.0, 64).unwrap();
    let scale = prof.iter().fold(0.0_f64, |m, (_, q)| m.max(q.abs()));
    for i in 1..32 {
        let (q, q_mirror) = (prof[i].1, prof[64 - i].1);
        assert!((q - q_mirror).abs() < 1e-12 * scale, "cos modes give an even profile");
    }
    let upper = &prof[1..32];
    assert!(upper.windows(2).any(|w| w[0].1 * w[1].1 < 0.0), "no sign change on (0, pi)");

    let odd = StaticAnsatz { g: &g, v_modes: vec![ToroidalMode::new(1, Parity::Sin, Radial::P, 1.0).unwrap()], params };
    let prof = charge_profile(&odd, 1.0, 64).unwrap();
    for i in 1..32 {
        assert!((prof[i].1 + prof[64 - i].1).abs() < 1e-12 * scale.max(1.0));
    }
}

fn seeds(radial: Radial, n: u32) -> Vec<ToroidalMode> {
    vec![ToroidalMode::new(n, Parity::Cos, radial, 1.0).unwrap()]
}

#[test]
fn q_seed_is_flagged_on_the_axis_only() {
    let params = CouplingParams::default();
    let g = regular_g();
    let cfg = ApproximationConfig { iterations: 3, ..Default::default() };
    let rep = successive_approximation(&seeds(Radial::Q, 1), &g, &params, &cfg).unwrap();
    for it in &rep.iterations {
        assert!(it.singular_axis && !it.singular_ring && !it.discontinuous, "{it:?}");
        assert!(!it.certified_smooth());
    }
}

#[test]
fn p_seed_is_flagged_at_the_ring() {
    let params = CouplingParams::default();
    let g = regular_g();
    let cfg = ApproximationConfig { iterations: 3, ..Default::default() };
    for n in 0..3 {
        let rep = successive_approximation(&seeds(Radial::P, n), &g, &params, &cfg).unwrap();
        for it in &rep.iterations {
            assert!(it.singular_ring && !it.singular_axis, "n={n}: {it:?}");
        }
    }
}

#[test]
fn matched_seed_is_discontinuous() {
    let params = CouplingParams::default();
    let g = weak_g(0.05);
    let cfg = ApproximationConfig { iterations: 3, ..Default::default() };
    let rep = successive_approximation(&seeds(Radial::Matched { mu_m: 1.0 }, 2), &g, &params, &cfg).unwrap();
    for it in &rep.iterations {
        assert!(it.discontinuous && !it.singular_axis && !it.singular_ring, "{it:?}");
        let m = it.modes.iter().find(|m| m.n == 2 && m.parity == Parity::Cos).unwrap();
        assert_eq!(m.branch(), "matched");
    }
}

#[test]
fn strong_field_iteration_diverges() {
    let cfg = ApproximationConfig { iterations: 4, ..Default::default() };
    let rep = successive_approximation(&seeds(Radial::P, 1), &regular_g(), &CouplingParams::default(), &cfg).unwrap();
    assert!(rep.iterations[2..].iter().all(|it| it.diverging));
    let weak = successive_approximation(&seeds(Radial::P, 1), &weak_g(0.05), &CouplingParams::default(), &cfg).unwrap();
    assert!(weak.iterations.iter().all(|it| !it.diverging));
}

/// Once the update grows, the sampled slopes see only the regular part; the
/// carried branch coefficients still hold the seed's logarithm.
#[test]
fn branch_content_survives_divergent_iterates() {
    let cfg = ApproximationConfig { iterations: 5, ..Default::default() };
    let rep = successive_approximation(&seeds(Radial::Q, 0), &regular_g(), &CouplingParams::default(), &cfg).unwrap();
    let mode0 = |it: &IterationReport| it.modes.iter().find(|m| m.n == 0 && m.parity == Parity::Cos).unwrap().clone();
    let last = mode0(rep.iterations.last().unwrap());
    assert!(last.axis_indicator < AXIS_SLOPE_TOL, "{last:?}");
    assert!(last.axis_branch > BRANCH_TOL);
    assert!(rep.iterations.iter().all(|it| it.singular_axis && !it.certified_smooth()));

    let rep = successive_approximation(&seeds(Radial::P, 1), &regular_g(), &CouplingParams::default(), &cfg).unwrap();
    for it in &rep.iterations {
        assert!(it.modes.iter().all(|m| m.axis_branch == 0.0 && m.jump_branch == 0.0), "{it:?}");
    }
}

#[test]
fn zero_seed_is_trivial() {
    let g = regular_g();
    let rep =
        successive_approximation(&[], &g, &CouplingParams::default(), &ApproximationConfig::default()).unwrap();
    assert!(rep.iterations.iter().all(|it| it.trivial && !it.certified_smooth()));
}

#[test]
fn singular_magnetic_profile_breaks_quadrature() {
    let g = HarmonicProfile { kind: LegendreKind::Q, degree: consistent_degree(1), scale: 1.0 };
    let cfg = ApproximationConfig { iterations: 2, ..Default::default() };
    let rep = successive_approximation(&seeds(Radial::P, 1), &g, &CouplingParams::default(), &cfg).unwrap();
    assert!(rep.iterations[0].magnetic.singular());
    assert!(rep.iterations[1..].iter().any(|it| it.quadrature_failed));
}

fn manufactured(n: usize, stencil: Stencil) -> (Vec3Field, Vec3Field) {
    let grid = GridSpec::cube(n, 2.0 * PI).unwrap();
    let v = ScalarField::from_fn(grid, |r| 0.3 * (r.x().sin() * r.y().cos()) + 0.2 * (r.z() + r.x()).sin());
    let a = Vec3Field::from_fn(grid, |r| {
        Vec3::new(0.4 * r.y().sin() * r.z().cos(), 0.3 * (r.z() - r.x()).cos(), 0.25 * r.x().sin() * r.y().sin())
    });
    fields_from_potentials(&v, &a, stencil)
}

#[test]
fn nogo_identities_converge_at_stencil_order() {
    let params = CouplingParams::default();
    for stencil in [Stencil::Second, Stencil::Fourth] {
        let res: Vec<NogoResiduals> = [16, 32, 64]
            .iter()
            .map(|&n| {
                let (e, b) = manufactured(n, stencil);
                nogo_identity_check(&e, &b, &params, stencil).unwrap()
            })
            .collect();
        let p = stencil.order() as f64;
        for pair in res.windows(2) {
            let sd = (pair[0].divergence / pair[1].divergence).log2();
            let sc = (pair[0].curl / pair[1].curl).log2();
            assert!((sd - p).abs() < 0.3 && (sc - p).abs() < 0.3, "{stencil:?}: {sd} {sc}");
        }
    }
}

#[test]
fn nogo_check_rejects_rotational_e() {
    let grid = GridSpec::cube(16, 2.0 * PI).unwrap();
    let e = Vec3Field::from_fn(grid, |r| Vec3::new(r.y().sin(), 0.0, 0.0));
    let b = Vec3Field::from_fn(grid, |r| Vec3::new(0.0, 0.0, r.x().cos()));
    let err = nogo_identity_check(&e, &b, &CouplingParams::default(), Stencil::Fourth).unwrap_err();
    assert!(matches!(err, kknled_core::Error::Precondition(_)));
}

#[test]
fn energy_flux_divergence_theorem() {
    let psi = |r: Vec3| (0.5 * r.x()).sin() * (0.3 * r.y()).cosh() + 0.1 * r.z() * r.z();
    let v = |r: Vec3| (r.x() * r.y()).cos() + 0.2 * r.z();
    let c = |r: Vec3| Vec3::new(r.y().sin() * r.z(), (0.4 * r.x()).cos() * r.z(), r.x() * r.y());
    let (vol, surf) = energy_flux_identity(psi, v, c, Vec3::new(0.1, -0.2, 0.3), 1.2, 24);
    assert!((vol - surf).abs() < 1e-8 * surf.abs(), "{vol} vs {surf}");
}

proptest! {
    #[test]
    fn map_round_trip(mu in 0.01f64..5.0, eta in 0.01f64..6.27, a in 0.5f64..3.0) {
        let p = ToroidalPoint::new(mu, eta, 0.3, a).unwrap();
        let (rho, z, phi) = toroidal_to_cylindrical(&p).unwrap();
        let q = cylindrical_to_toroidal(rho, z, phi, a).unwrap();
        prop_assert!((q.mu - mu).abs() < 1e-9 * mu.max(1.0));
        prop_assert!((q.eta - eta).abs() < 1e-9);
        let (m2, e2) = toroidal_of(toroidal_to_cartesian(&p).unwrap(), a);
        prop_assert!((m2 - mu).abs() < 1e-9 * mu.max(1.0) && (e2 - eta).abs() < 1e-9);
    }

    #[test]
    fn spline_interpolates_its_nodes(vals in proptest::collection::vec(-5.0f64..5.0, 4..20)) {
        let mus: Vec<f64> = (0..vals.len()).map(|i| 0.1 + 0.3 * i as f64).collect();
        let s = SplineProfile::new(mus.clone(), vals.clone()).unwrap();
        for (m, v) in mus.iter().zip(&vals) {
            prop_assert!((s.value(*m) - v).abs() < 1e-12);
        }
    }
}
