use std::f64::consts::PI;

use approx::assert_relative_eq;
use gauss_quad::GaussLegendre;
use proptest::prelude::*;

use super::*;
use crate::curves::CurveSpec;
use crate::geometry::Manifold;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn gl(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let rule = GaussLegendre::new(20.try_into().unwrap());
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * h;
            rule.integrate(lo, lo + h, &f)
        })
        .sum()
}

fn circle_at(z: f64) -> CurveSpec {
    CurveSpec::circle3(1.0, [0.0, 0.0, z], [0.0, 0.0, 1.0])
}

fn system(specs: &[CurveSpec], nu: Vec<f64>) -> CurveSystem {
    CurveSystem::new(Manifold::euclidean_space3(), specs, Scheme::bound_state_3d(nu), &cfg()).unwrap()
}

/// Symmetric-channel function `Φ₁₁ + Φ₁₂` for two coaxial unit circles,
/// each term by one-dimensional angular quadrature.
fn symmetric_channel(kappa: f64, h: f64) -> f64 {
    let diag = 2.0
        * (gl(1e-12, 1e-3, 4, |t| {
            let r = 2.0 * (0.5 * t).sin();
            ((-r).exp() - (-kappa * r).exp()) / (4.0 * PI * r)
        }) + gl(1e-3, PI, 200, |t| {
            let r = 2.0 * (0.5 * t).sin();
            ((-r).exp() - (-kappa * r).exp()) / (4.0 * PI * r)
        }));
    let off = -gl(0.0, 2.0 * PI, 64, |t| {
        let d = (2.0 - 2.0 * t.cos() + h * h).sqrt();
        (-kappa * d).exp() / (4.0 * PI * d)
    });
    diag + off
}

#[test]
fn single_circle_on_shell() {
    let sys = system(&[circle_at(0.0)], vec![1.0]);
    let sol = solve_ground_state(&sys, &cfg()).unwrap();
    assert_eq!(sol.energy, -1.0);
    assert_eq!(sol.eigenvector, vec![1.0]);
    assert!(sol.omega_slope < 0.0);
    let sys = system(&[CurveSpec::ellipse3(2.0, 1.0, [0.0; 3], [0.0, 0.0, 1.0])], vec![0.7]);
    let sol = solve_ground_state(&sys, &cfg()).unwrap();
    assert_relative_eq!(sol.energy, -0.49, max_relative = 1e-10);
}

#[test]
fn two_circles_match_scalar_scan_oracle() {
    let h = 3.0;
    let sys = system(&[circle_at(0.0), circle_at(h)], vec![1.0, 1.0]);
    let sol = solve_ground_state(&sys, &cfg()).unwrap();
    // dense scan for the sign change, then bisection, in κ
    let ks: Vec<f64> = (0..=400).map(|k| 1.0 + k as f64 * 0.5 / 400.0).collect();
    let p = ks
        .windows(2)
        .position(|w| symmetric_channel(w[0], h) * symmetric_channel(w[1], h) <= 0.0)
        .unwrap();
    let (mut a, mut b) = (ks[p], ks[p + 1]);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if symmetric_channel(a, h) * symmetric_channel(m, h) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    let oracle = -(0.5 * (a + b)).powi(2);
    assert_relative_eq!(sol.energy, oracle, max_relative = 1e-8);
    assert!(sol.energy < -1.0);
    let s = 0.5f64.sqrt();
    assert_relative_eq!(sol.eigenvector[0], s, max_relative = 1e-10);
    assert_relative_eq!(sol.eigenvector[1], s, max_relative = 1e-10);
}

#[test]
fn decoupling_limit() {
    let sys = system(&[circle_at(0.0), circle_at(1e6 * 2.0 * PI)], vec![1.0, 1.0]);
    let sol = solve_ground_state(&sys, &cfg()).unwrap();
    assert!(sol.energy <= -1.0 && (sol.energy + 1.0).abs() < 1e-6, "{}", sol.energy);
    let sys = system(&[circle_at(0.0), circle_at(1e6 * 2.0 * PI)], vec![1.0, 1.5]);
    let sol = solve_ground_state(&sys, &cfg()).unwrap();
    assert!((sol.energy + 2.25).abs() < 1e-6);
    assert!(sol.eigenvector.iter().all(|a| *a > 0.0));
}

#[test]
fn unresolvably_weak_coupling_returns_the_single_curve_level() {
    // the shift of the root is ~e^{-160}, far below f64 resolution
    let specs = [circle_at(0.0), circle_at(40.0), circle_at(80.0)];
    let sys = system(&specs, vec![1.0, 2.0, 1.5]);
    let sol = solve_ground_state(&sys, &cfg()).unwrap();
    assert!((sol.energy + 4.0).abs() <= 4.0 * f64::EPSILON * 4.0, "{}", sol.energy);
    assert!(sol.eigenvector.iter().all(|a| *a > 0.0));
}

#[test]
fn gershgorin_ordering_and_disks() {
    let sys = system(&[circle_at(0.0), circle_at(3.0)], vec![1.0, 1.0]);
    let op = PrincipalOperator::new(&sys, &cfg()).unwrap();
    let sol = solve_ground_state_with(&op, &SolverOptions::default()).unwrap();
    let g = gershgorin_lower_bound_with(&op, sol.energy, &SolverOptions::default()).unwrap();
    // for a symmetric pair the margin Φ₁₁ − |Φ₁₂| is the lowest eigenvalue itself
    assert!(g.e_star <= sol.energy && sol.energy < -1.0, "{} {}", g.e_star, sol.energy);
    assert_relative_eq!(g.e_star, sol.energy, max_relative = 1e-9);
    let asym = system(&[circle_at(0.0), CurveSpec::circle3(0.7, [0.0, 0.0, 3.0], [0.0, 0.0, 1.0])], vec![1.0, 1.3]);
    let op2 = PrincipalOperator::new(&asym, &cfg()).unwrap();
    let sol2 = solve_ground_state_with(&op2, &SolverOptions::default()).unwrap();
    let g2 = gershgorin_lower_bound_with(&op2, sol2.energy, &SolverOptions::default()).unwrap();
    assert!(g2.e_star < sol2.energy && sol2.energy < -1.69);
    // zero margin at E*, positive below
    let row = gershgorin_row(&op2, g2.e_star).unwrap();
    assert!(row.margin >= 0.0 && row.margin < 1e-9);
    let e = g.e_star - 0.5;
    let row = gershgorin_row(&op, e).unwrap();
    let eig = sorted_eigen(&op.matrix(e).unwrap().values);
    for w in &eig.values {
        assert!(row.centers.iter().zip(&row.radii).any(|(c, r)| (w - c).abs() <= r * (1.0 + 1e-12)));
        assert!(*w > 0.0);
    }
    // far apart: E* approaches −1 from below
    let far = system(&[circle_at(0.0), circle_at(1e4)], vec![1.0, 1.0]);
    let g = gershgorin_lower_bound(&far, &cfg(), -1.0).unwrap();
    assert!(g.e_star < -1.0 && g.e_star > -1.0 - 1e-4);
}

#[test]
fn eigen_flow_single_circle_signs() {
    let sys = system(&[circle_at(0.0)], vec![1.0]);
    let flow = eigen_flow(&sys, &cfg(), &[-4.0, -1.0, -0.25]).unwrap();
    assert!(flow.eigenvalues[0][0] > 0.0);
    assert_eq!(flow.eigenvalues[1][0], 0.0);
    assert!(flow.eigenvalues[2][0] < 0.0);
    assert_eq!(flow.zero_crossings().len(), 1);
    assert_eq!(flow.zero_crossings()[0], (0, -1.0));
}

#[test]
fn eigen_flow_symmetric_pair_vectors_and_slopes() {
    let sys = system(&[circle_at(0.0), circle_at(2.5)], vec![1.0, 1.0]);
    let op = PrincipalOperator::new(&sys, &cfg()).unwrap();
    let grid: Vec<f64> = (0..12).map(|k| -3.0 + 0.2 * k as f64).collect();
    let flow = eigen_flow_with(&op, &grid).unwrap();
    let s = 0.5f64.sqrt();
    for &e in &grid {
        let eig = sorted_eigen(&op.matrix(e).unwrap().values);
        assert_relative_eq!(eig.vectors[(0, 0)], s, max_relative = 1e-12);
        assert_relative_eq!(eig.vectors[(1, 0)], s, max_relative = 1e-12);
        assert_relative_eq!(eig.vectors[(0, 1)].abs(), s, max_relative = 1e-12);
        assert_relative_eq!(eig.vectors[(0, 1)], -eig.vectors[(1, 1)], max_relative = 1e-12);
    }
    assert!(flow.max_slope() < 0.0);
    let h = 1e-4;
    for (p, &e) in grid.iter().enumerate() {
        let up = sorted_eigen(&op.matrix(e + h).unwrap().values).values;
        let dn = sorted_eigen(&op.matrix(e - h).unwrap().values).values;
        for k in 0..2 {
            let fd = (up[k] - dn[k]) / (2.0 * h);
            assert_relative_eq!(flow.slopes[p][k], fd, max_relative = 1e-5);
        }
    }
    assert!(flow.crossings.is_empty());
}

#[test]
fn grid_validation() {
    let sys = system(&[circle_at(0.0)], vec![1.0]);
    assert!(matches!(eigen_flow(&sys, &cfg(), &[]), Err(SpectralError::Grid(_))));
    assert!(matches!(eigen_flow(&sys, &cfg(), &[-1.0, -2.0]), Err(SpectralError::Grid(_))));
    assert!(matches!(eigen_flow(&sys, &cfg(), &[-1.0, 0.5]), Err(SpectralError::Grid(_))));
}

#[test]
fn three_circles_perron_vector() {
    // centers on a 3-4-5 triangle
    let specs = [
        CurveSpec::circle3(0.3, [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
        CurveSpec::circle3(0.3, [3.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
        CurveSpec::circle3(0.3, [0.0, 4.0, 0.0], [1.0, 0.0, 0.0]),
    ];
    let sys = system(&specs, vec![1.0, 1.2, 0.9]);
    let sol = solve_ground_state(&sys, &cfg()).unwrap();
    assert!(sol.eigenvector.iter().all(|a| *a > 0.0));
    assert!(sol.energy < -1.44);
    let r = positivity_check(&sol, &sys, &cfg()).unwrap();
    assert!(r.passed && r.gap > 0.0 && r.max_offdiagonal < 0.0);
    // ω′ equals the slope of the lowest eigenvalue
    let op = PrincipalOperator::new(&sys, &cfg()).unwrap();
    let dh = 1e-5;
    let fd = (lowest(&op, sol.energy + dh).unwrap() - lowest(&op, sol.energy - dh).unwrap()) / (2.0 * dh);
    assert_relative_eq!(sol.omega_slope, fd, max_relative = 1e-5);
    assert!(sol.residual < 1e-12);
}

#[test]
fn wavefunction_positive_and_symmetric() {
    let sys = system(&[circle_at(0.0), circle_at(3.0)], vec![1.0, 1.0]);
    let sol = solve_ground_state(&sys, &cfg()).unwrap();
    let mut pts = Vec::new();
    for i in 0..9 {
        for j in 0..9 {
            for k in 0..9 {
                pts.push(Point::new(-4.0 + i as f64, -4.0 + j as f64, -2.5 + k as f64));
            }
        }
    }
    let psi = ground_state_wavefunction(&sol, &sys, &cfg(), &pts).unwrap();
    assert!(psi.iter().all(|w| w.psi > 0.0));
    let mirror: Vec<Point> = pts.iter().map(|p| Point::new(p.0[0], p.0[1], 3.0 - p.0[2])).collect();
    let psi_m = ground_state_wavefunction(&sol, &sys, &cfg(), &mirror).unwrap();
    for (a, b) in psi.iter().zip(&psi_m) {
        assert_relative_eq!(a.psi, b.psi, max_relative = 1e-8);
    }
    let norm = l2_box_normalization(&psi, 1.0);
    assert!(norm.is_finite() && norm > 0.0);
}

#[test]
fn wavefunction_far_field() {
    let sys = system(&[circle_at(0.0), circle_at(3.0)], vec![1.0, 1.0]);
    let sol = solve_ground_state(&sys, &cfg()).unwrap();
    let kappa = (-sol.energy).sqrt();
    let l = 2.0 * PI;
    let dir = [0.6, 0.0, 0.8];
    let c = [0.0, 0.0, 1.5];
    let at = |r: f64| Point::new(c[0] + r * dir[0], c[1] + r * dir[1], c[2] + r * dir[2]);
    let (r1, r2) = (20.0 * l, 40.0 * l);
    let psi = ground_state_wavefunction(&sol, &sys, &cfg(), &[at(r1), at(r2)]).unwrap();
    let ratio = psi[1].psi / psi[0].psi;
    let expect = (-kappa * (r2 - r1)).exp() * r1 / r2;
    assert_relative_eq!(ratio, expect, max_relative = 1e-2);
}

#[test]
fn wavefunction_flags_support() {
    let sys = system(&[circle_at(0.0)], vec![1.0]);
    let sol = solve_ground_state(&sys, &cfg()).unwrap();
    let w = ground_state_wavefunction(&sol, &sys, &cfg(), &[Point::new(1.0, 0.0, 0.0), Point::new(0.0, 0.0, 0.0)])
        .unwrap();
    assert!(w[0].near_support);
    assert!(!w[1].near_support && w[1].psi > 0.0);
}

#[test]
fn planar_bound_state() {
    let sys = CurveSystem::new(
        Manifold::euclidean_plane(),
        &[CurveSpec::circle2(1.0, [0.0, 0.0])],
        Scheme::finite_2d(vec![2.0]),
        &cfg(),
    )
    .unwrap();
    let sol = solve_ground_state(&sys, &cfg()).unwrap();
    // 1/λ = R I₀(κR) K₀(κR) at the root
    let k = (-sol.energy).sqrt();
    let i0 = puruspe::In(0, k);
    assert_relative_eq!(0.5, i0 * crate::special::bessel_k0(k), max_relative = 1e-9);
}

#[test]
fn weak_planar_coupling_may_exceed_range() {
    let sys = CurveSystem::new(
        Manifold::euclidean_plane(),
        &[CurveSpec::circle2(1.0, [0.0, 0.0])],
        Scheme::finite_2d(vec![0.05]),
        &cfg(),
    )
    .unwrap();
    let op = PrincipalOperator::new(&sys, &cfg()).unwrap();
    let opts = SolverOptions {
        e_max: -1e-6,
        ..SolverOptions::default()
    };
    assert!(matches!(solve_ground_state_with(&op, &opts), Err(SpectralError::NoBoundState { .. })));
}

#[test]
fn perron_vector_keeps_tiny_components_positive() {
    let m = DMatrix::from_row_slice(3, 3, &[0.0, -1e-14, -1e-20, -1e-14, 1.0, -1e-16, -1e-20, -1e-16, 2.0]);
    let eig = sorted_eigen(&m);
    let v = perron_vector(&m, eig.values[0], eig.values[1] - eig.values[0]);
    assert!(v.iter().all(|x| *x > 0.0), "{v:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn binding_enhanced_by_second_curve(h in 2.5f64..8.0, nu1 in 0.5f64..2.0, nu2 in 0.5f64..2.0) {
        let sys = system(&[circle_at(0.0), circle_at(h)], vec![nu1, nu2]);
        let sol = solve_ground_state(&sys, &cfg().with_nodes(128)).unwrap();
        let m = nu1.max(nu2);
        prop_assert!(sol.energy < -m * m);
        prop_assert!(sol.eigenvector.iter().all(|a| *a > 0.0));
        prop_assert!(sol.omega_slope < 0.0);
    }
}
