use std::f64::consts::PI;

use approx::assert_relative_eq;
use gauss_quad::GaussLegendre;
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::config::QuadratureConfig;
use crate::curves::system::pairwise_distances;
use crate::curves::CurveSystem;
use crate::operator::Scheme;

fn r3() -> Manifold {
    Manifold::euclidean_space3()
}

fn unit_circle() -> CurveSpec {
    CurveSpec::circle3(1.0, [0.0; 3], [0.0, 0.0, 1.0])
}

fn polygon(n: usize, radius: f64) -> Vec<[f64; 3]> {
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            [radius * t.cos(), radius * t.sin(), 0.0]
        })
        .collect()
}

fn fd_second(c: &Curve, s: f64, h: f64) -> [f64; 3] {
    let (a, b, m) = (c.raw_point(s + h), c.raw_point(s - h), c.raw_point(s));
    [
        (a[0] - 2.0 * m[0] + b[0]) / (h * h),
        (a[1] - 2.0 * m[1] + b[1]) / (h * h),
        (a[2] - 2.0 * m[2] + b[2]) / (h * h),
    ]
}

#[test]
fn unit_circle_length_and_curvature() {
    let c = Curve::build(&unit_circle(), &r3(), 256).unwrap();
    assert_relative_eq!(c.length(), 2.0 * PI, max_relative = 1e-15);
    for k in &c.frenet().curvature {
        assert_relative_eq!(*k, 1.0, max_relative = 1e-12);
    }
    assert!(c.frenet().torsion.iter().all(|t| t.abs() < 1e-12));
    assert!(c.is_homogeneous());
}

#[test]
fn ellipse_length_matches_elliptic_integral() {
    let c = Curve::build(&CurveSpec::ellipse3(2.0, 1.0, [0.0; 3], [0.0, 0.0, 1.0]), &r3(), 256).unwrap();
    // independent: 4a E(k), k² = 1 − b²/a², by GL on the speed
    let rule = GaussLegendre::new(20.try_into().unwrap());
    let oracle: f64 = (0..200)
        .map(|k| {
            let h = 2.0 * PI / 200.0;
            rule.integrate(k as f64 * h, (k + 1) as f64 * h, |t: f64| {
                (4.0 * t.sin().powi(2) + t.cos().powi(2)).sqrt()
            })
        })
        .sum();
    assert_relative_eq!(oracle, 9.688448220547675, max_relative = 1e-13);
    assert!((c.length() - 9.6884482205).abs() < 1e-6);
    assert_relative_eq!(c.length(), oracle, max_relative = 1e-12);
    assert_relative_eq!(c.frenet().max_curvature, 2.0, max_relative = 1e-6);
}

#[test]
fn sampled_polygon_is_valid_closed_curve() {
    let c = Curve::build(&CurveSpec::sampled(polygon(64, 1.0)), &r3(), 256).unwrap();
    assert!(c.frenet().max_curvature.is_finite());
    assert_relative_eq!(c.length(), 2.0 * PI, max_relative = 1e-3);
    let g = c.self_gap();
    assert!(g.delta > 0.0 && g.gap > 0.0);
    let (p, q) = (c.raw_point(0.3), c.raw_point(0.3 + c.length()));
    assert!(norm(sub(&p, &q)) < 1e-12);
}

#[test]
fn sampled_matches_circle_curvature() {
    let c = Curve::build(&CurveSpec::sampled(polygon(128, 2.0)), &r3(), 256).unwrap();
    for k in &c.frenet().curvature {
        assert_relative_eq!(*k, 0.5, max_relative = 1e-3);
    }
}

#[test]
fn circle_self_gap_certificate() {
    let c = Curve::build(&unit_circle(), &r3(), 256).unwrap();
    let g = c.self_gap();
    assert!(g.delta >= 0.49 && g.delta < 0.5, "{g:?}");
    assert_relative_eq!(g.lower_factor, (1.0 - g.delta).sqrt(), max_relative = 1e-12);
    // chord minimum beyond δ sits at ξ = δ
    assert_relative_eq!(g.gap, 2.0 * (0.5 * g.delta).sin(), max_relative = 1e-12);
    assert!((2.0 * (0.245f64).sin() - 0.4851).abs() < 1e-4);
    // the inequality holds on a fine ξ grid
    for k in 1..=1000 {
        let xi = g.delta * k as f64 / 1000.0;
        assert!(2.0 * (0.5 * xi).sin() >= g.lower_factor * xi);
    }
    assert!(g.max_ratio <= 1.0 + 1e-12);
}

#[test]
fn distance_sandwich_at_node_pairs() {
    let specs = [
        unit_circle(),
        CurveSpec::ellipse3(2.0, 0.7, [0.0; 3], [0.0, 1.0, 1.0]),
        CurveSpec::torus_knot(2, 3, 2.0, 0.6),
        CurveSpec::sampled(polygon(40, 1.5)),
    ];
    for spec in &specs {
        let c = Curve::build(spec, &r3(), 128).unwrap();
        let g = c.self_gap();
        let n = c.node_count();
        let h = c.node_spacing();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let m = (i as isize - j as isize).unsigned_abs();
                let xi = (m.min(n - m)) as f64 * h;
                let d = r3().distance_unchecked(&c.nodes()[i], &c.nodes()[j]);
                assert!(d <= xi * (1.0 + 1e-9), "{spec:?}: d={d} xi={xi}");
                if xi <= g.delta {
                    assert!(d >= g.lower_factor * xi * (1.0 - 1e-9));
                } else {
                    assert!(d >= g.gap * (1.0 - 1e-12));
                }
            }
        }
    }
}

#[test]
fn arclength_first_order_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let specs = [
        CurveSpec::ellipse3(2.0, 1.0, [0.0; 3], [0.0, 0.0, 1.0]),
        CurveSpec::torus_knot(2, 3, 2.0, 0.5),
        CurveSpec::sampled(polygon(64, 1.0)),
    ];
    for spec in &specs {
        let c = Curve::build(spec, &r3(), 256).unwrap();
        let h = 1e-4;
        for _ in 0..100 {
            let s = rng.random_range(0.0..c.length());
            let d = norm(sub(&c.raw_point(s + h), &c.raw_point(s)));
            assert!((d / h - 1.0).abs() < 1e-3, "{spec:?} at {s}: {}", d / h);
        }
        for f in &c.frenet().frames {
            assert_relative_eq!(norm(f.tangent), 1.0, max_relative = 1e-10);
        }
    }
}

#[test]
fn curvature_matches_second_difference() {
    let specs = [
        CurveSpec::ellipse3(2.0, 1.0, [0.0; 3], [1.0, 0.0, 1.0]),
        CurveSpec::torus_knot(3, 2, 3.0, 1.0),
    ];
    for spec in &specs {
        let c = Curve::build(spec, &r3(), 64).unwrap();
        for (k, kappa) in c.frenet().curvature.iter().enumerate() {
            let s = k as f64 * c.node_spacing();
            let fd = norm(fd_second(&c, s, 1e-3));
            assert!((kappa - fd).abs() < 1e-3, "{kappa} vs {fd}");
        }
    }
}

#[test]
fn frames_orthonormal_and_helix_like_torsion() {
    let c = Curve::build(&CurveSpec::torus_knot(2, 3, 2.0, 0.5), &r3(), 128).unwrap();
    for f in &c.frenet().frames {
        assert!((norm(f.normal) - 1.0).abs() < 1e-6);
        assert!(dot(&f.tangent, &f.normal).abs() < 1e-6);
        assert!(dot(&f.binormal, &f.normal).abs() < 1e-6);
    }
    // torsion against the derivative of the binormal: dB/ds = −τ N
    let s = 0.37;
    let h = 1e-5;
    let (fp, _) = c.frame_at(s + h);
    let (fm, _) = c.frame_at(s - h);
    let (f0, _) = c.frame_at(s);
    let db = scale(&sub(&fp.binormal, &fm.binormal), 0.5 / h);
    let tau_fd = -dot(&db, &f0.normal);
    let jet = c.jet_at(s);
    let x = cross(&jet.d1, &jet.d2);
    let tau = dot(&x, &jet.d3) / dot(&x, &x);
    assert_relative_eq!(tau, tau_fd, max_relative = 1e-5);
}

#[test]
fn hyperbolic_geodesic_circle() {
    for &(rc, radius) in &[(1.0, 0.8), (2.0, 3.0)] {
        let m = Manifold::hyperbolic_space3(rc).unwrap();
        let c = Curve::build(&CurveSpec::geodesic_circle(radius, [0.3, -0.2, 1.5]), &m, 128).unwrap();
        let rho = radius / rc;
        assert_relative_eq!(c.length(), 2.0 * PI * rc * rho.sinh(), max_relative = 1e-14);
        for k in &c.frenet().curvature {
            assert_relative_eq!(*k, 1.0 / (rc * rho.tanh()), max_relative = 1e-9);
        }
        // every node at geodesic distance `radius` from the center
        for p in c.nodes() {
            let d = m.distance_unchecked(p, &[0.3, -0.2, 1.5]);
            assert_relative_eq!(d, radius, max_relative = 1e-10);
        }
        // unit speed in the hyperbolic metric
        let h = 1e-5;
        let d = m.distance_unchecked(&c.raw_point(0.2), &c.raw_point(0.2 + h));
        assert!((d / h - 1.0).abs() < 1e-6);
    }
}

#[test]
fn hyperbolic_sampled_curve_uses_metric_length() {
    let m = Manifold::hyperbolic_space3(1.0).unwrap();
    let pts: Vec<[f64; 3]> = polygon(64, 0.5).into_iter().map(|p| [p[0], p[1], 2.0]).collect();
    let c = Curve::build(&CurveSpec::sampled(pts), &m, 128).unwrap();
    // Euclidean circle of radius 0.5 at height 2 has hyperbolic length π/2
    assert_relative_eq!(c.length(), PI / 2.0, max_relative = 1e-3);
}

#[test]
fn invalid_specs_are_rejected() {
    let bad = [
        CurveSpec::circle3(-1.0, [0.0; 3], [0.0, 0.0, 1.0]),
        CurveSpec::circle3(1.0, [0.0; 3], [0.0; 3]),
        CurveSpec::ellipse3(1.0, 0.0, [0.0; 3], [0.0, 0.0, 1.0]),
        CurveSpec::torus_knot(2, 4, 2.0, 0.5),
        CurveSpec::torus_knot(2, 3, 0.5, 0.5),
        CurveSpec::sampled(polygon(8, 1.0)),
    ];
    for s in &bad {
        assert!(matches!(Curve::build(s, &r3(), 64), Err(CurveError::InvalidSpec(_))), "{s:?}");
    }
    assert!(matches!(
        Curve::build(&unit_circle(), &r3(), 16),
        Err(CurveError::TooFewNodes { .. })
    ));
    assert!(matches!(
        Curve::build(&CurveSpec::geodesic_circle(1.0, [0.0, 0.0, 1.0]), &r3(), 64),
        Err(CurveError::Incompatible { .. })
    ));
    let h3 = Manifold::hyperbolic_space3(1.0).unwrap();
    assert!(matches!(Curve::build(&unit_circle(), &h3, 64), Err(CurveError::Incompatible { .. })));
    let plane = Manifold::euclidean_plane();
    assert!(Curve::build(&CurveSpec::circle3(1.0, [0.0; 3], [1.0, 0.0, 0.0]), &plane, 64).is_err());
    assert!(Curve::build(&CurveSpec::circle2(1.0, [0.0, 0.0]), &plane, 64).is_ok());
}

#[test]
fn thin_ellipse_needs_more_nodes() {
    let spec = CurveSpec::ellipse3(0.5, 0.1, [0.0; 3], [0.0, 0.0, 1.0]);
    assert!(matches!(Curve::build(&spec, &r3(), 64), Err(CurveError::Resolution { .. })));
    assert!(Curve::build(&spec, &r3(), 512).is_ok());
}

#[test]
fn open_polyline_is_a_closure_error() {
    let pts: Vec<[f64; 3]> = (0..20).map(|k| [k as f64 * 0.1, (k as f64 * 0.3).sin(), 0.0]).collect();
    assert!(matches!(Curve::build(&CurveSpec::sampled(pts), &r3(), 64), Err(CurveError::Closure { .. })));
}

#[test]
fn figure_eight_is_self_intersecting() {
    let pts: Vec<[f64; 3]> = (0..40)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / 40.0 + 0.01;
            [t.sin(), (2.0 * t).sin() * 0.5, 0.0]
        })
        .collect();
    assert!(matches!(
        Curve::build(&CurveSpec::sampled(pts), &r3(), 64),
        Err(CurveError::SelfIntersection { .. })
    ));
}

#[test]
fn point_table_parsing() {
    let text = "# header\n1 2 3\n 4 5 # planar\n\n7 8 9\n";
    assert_eq!(parse_point_table(text).unwrap(), vec![[1.0, 2.0, 3.0], [4.0, 5.0, 0.0], [7.0, 8.0, 9.0]]);
    assert!(matches!(parse_point_table("1 2 x"), Err(CurveError::PointTable { line: 1, .. })));
    assert!(matches!(parse_point_table("1\n"), Err(CurveError::PointTable { .. })));
}

#[test]
fn spec_serde_round_trip() {
    let spec = CurveSpec::torus_knot(2, 3, 2.0, 0.5);
    let json = serde_json::to_string(&spec).unwrap();
    assert!(json.contains("\"type\":\"torus_knot\""));
    assert_eq!(serde_json::from_str::<CurveSpec>(&json).unwrap(), spec);
    let c: CurveSpec = serde_json::from_str(r#"{"type":"circle","radius":2}"#).unwrap();
    assert_eq!(c, CurveSpec::circle3(2.0, [0.0; 3], [0.0, 0.0, 1.0]));
    assert!(serde_json::from_str::<CurveSpec>(r#"{"type":"circle","radius":2,"r":1}"#).is_err());
}

fn two(m: &Manifold, a: CurveSpec, b: CurveSpec) -> Result<Vec<Vec<f64>>, CurveError> {
    let curves = vec![Curve::build(&a, m, 128)?, Curve::build(&b, m, 128)?];
    pairwise_distances(m, &curves, Execution::Sequential)
}

#[test]
fn pairwise_distance_examples() {
    let up = CurveSpec::circle3(1.0, [0.0, 0.0, 5.0], [0.0, 0.0, 1.0]);
    let d = two(&r3(), unit_circle(), up).unwrap();
    assert_relative_eq!(d[0][1], 5.0, max_relative = 1e-12);
    assert_eq!(d[0][1], d[1][0]);
    assert_eq!(d[0][0], 0.0);
    let side = CurveSpec::circle3(1.0, [4.0, 0.0, 0.0], [0.0, 0.0, 1.0]);
    let d = two(&r3(), unit_circle(), side).unwrap();
    assert_relative_eq!(d[0][1], 2.0, max_relative = 1e-10);
}

#[test]
fn torus_distance_wraps() {
    let torus = Manifold::flat_torus3([10.0, 10.0, 10.0]).unwrap();
    let small = |x: f64| CurveSpec::circle3(0.2, [x, 0.0, 0.0], [0.0, 0.0, 1.0]);
    let wrapped = two(&torus, small(0.0), small(9.0)).unwrap()[0][1];
    let direct = two(&torus, small(0.0), small(1.0)).unwrap()[0][1];
    assert_relative_eq!(wrapped, direct, max_relative = 1e-9);
    assert_relative_eq!(direct, 0.6, max_relative = 1e-9);
    // brute force over node pairs with image reduction
    let a = Curve::build(&small(0.0), &torus, 128).unwrap();
    let b = Curve::build(&small(9.0), &torus, 128).unwrap();
    let mut brute = f64::INFINITY;
    for p in a.nodes() {
        for q in b.nodes() {
            let mut dd = 0.0;
            for k in 0..3 {
                let x = p[k] - q[k];
                let x = x - 10.0 * (x / 10.0).round();
                dd += x * x;
            }
            brute = brute.min(dd.sqrt());
        }
    }
    assert!(wrapped <= brute + 1e-12);
    assert!(brute - wrapped < 1e-3);
}

#[test]
fn intersecting_circles_are_rejected() {
    let linked = CurveSpec::circle3(1.0, [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]);
    assert!(matches!(
        two(&r3(), unit_circle(), linked),
        Err(CurveError::Intersection { .. })
    ));
}

#[test]
fn system_summary_and_scheme_validation() {
    let cfg = QuadratureConfig::default().with_nodes(64);
    let specs = [unit_circle(), CurveSpec::circle3(1.0, [3.0, 0.0, 0.0], [0.0, 0.0, 1.0])];
    let sys = CurveSystem::new(r3(), &specs, Scheme::bound_state_3d(vec![1.0, 1.0]), &cfg).unwrap();
    assert_eq!(sys.len(), 2);
    assert_relative_eq!(sys.min_distance().unwrap(), 1.0, max_relative = 1e-10);
    assert_eq!(sys.summary()[0].kind, "circle");
    assert!(CurveSystem::new(r3(), &specs, Scheme::bound_state_3d(vec![1.0]), &cfg).is_err());
    assert!(CurveSystem::new(r3(), &specs, Scheme::finite_2d(vec![1.0, 1.0]), &cfg).is_err());
    assert!(CurveSystem::new(r3(), &specs, Scheme::rg_subtracted(0.0, 1.0), &cfg).is_err());
    assert!(CurveSystem::new(r3(), &[], Scheme::bound_state_3d(vec![]), &cfg).is_err());
}

#[test]
fn sequential_and_parallel_builds_agree() {
    let spec = CurveSpec::torus_knot(2, 5, 2.0, 0.4);
    let a = Curve::build_with(&spec, &r3(), 200, Execution::Sequential).unwrap();
    let b = Curve::build_with(&spec, &r3(), 200, Execution::Parallel).unwrap();
    assert_eq!(a.nodes(), b.nodes());
    assert_eq!(a.self_gap(), b.self_gap());
    assert_eq!(a.frenet().curvature, b.frenet().curvature);
}

#[test]
fn translation_shifts_nodes_only() {
    let spec = CurveSpec::ellipse3(2.0, 1.0, [0.0; 3], [0.0, 1.0, 1.0]);
    let offset = [0.3, -4.0, 7.5];
    let a = Curve::build(&spec, &r3(), 64).unwrap();
    let b = Curve::build(&spec.translated(offset), &r3(), 64).unwrap();
    assert_relative_eq!(a.length(), b.length(), max_relative = 1e-13);
    for (p, q) in a.nodes().iter().zip(b.nodes()) {
        for k in 0..3 {
            assert!((q[k] - p[k] - offset[k]).abs() < 1e-12);
        }
    }
    let pts = polygon(20, 1.0);
    match CurveSpec::sampled(pts.clone()).translated(offset) {
        CurveSpec::Sampled { points } => assert_eq!(points[3][1], pts[3][1] - 4.0),
        other => panic!("unexpected {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ellipse_invariants(a in 0.5f64..3.0, ratio in 0.4f64..1.0, nx in -1.0f64..1.0, ny in -1.0f64..1.0) {
        let spec = CurveSpec::ellipse3(a, a * ratio, [0.5, -1.0, 2.0], [nx, ny, 1.0]);
        let c = Curve::build(&spec, &r3(), 128).unwrap();
        let g = c.self_gap();
        let k = c.frenet().max_curvature;
        prop_assert!(g.delta <= c.length() / 4.0 + 1e-15);
        prop_assert!(2.0 * k * g.delta < 1.0);
        prop_assert!(g.gap > 0.0);
        prop_assert!(g.max_ratio <= 1.0 + 1e-9);
        prop_assert!(g.min_near_ratio >= g.lower_factor * (1.0 - 1e-12));
        let p0 = c.raw_point(0.1);
        let p1 = c.raw_point(0.1 + c.length());
        prop_assert!(norm(sub(&p0, &p1)) < 1e-9 * a);
    }

    #[test]
    fn circle_rigid_motion_invariance(r in 0.2f64..5.0, cx in -3.0f64..3.0, nz in 0.1f64..1.0) {
        let c = Curve::build(&CurveSpec::circle3(r, [cx, 1.0, -2.0], [1.0, 0.0, nz]), &r3(), 64).unwrap();
        prop_assert!((c.length() - 2.0 * PI * r).abs() < 1e-12 * r);
        for k in &c.frenet().curvature {
            prop_assert!((k * r - 1.0).abs() < 1e-10);
        }
    }
}
