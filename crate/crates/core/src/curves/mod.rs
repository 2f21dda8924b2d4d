//! Closed embedded curves: specification, arclength parametrization, Frenet
//! data and self-distance certificates.

mod param;
mod system;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{cross, dot, norm, scale, sub, Manifold, ManifoldKind, Point};
use crate::par::{map_range, Execution};
use param::{ArclengthMap, Jet, Parametric, PeriodicSpline};

pub use system::{pairwise_distances, CurveSummary, CurveSystem};

/// Smallest node count accepted by [`Curve::build`].
pub const MIN_NODES: usize = 32;
/// Smallest number of points in a sampled curve.
pub const MIN_SAMPLED_POINTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("invalid curve specification: {0}")]
    InvalidSpec(String),
    #[error("curve {curve} is not supported on {manifold}")]
    Incompatible { curve: String, manifold: String },
    #[error("at least {min} nodes required, got {nodes}")]
    TooFewNodes { nodes: usize, min: usize },
    #[error("sampled curve is not closed: closing gap {gap:e} exceeds 4x the largest other gap {max_gap:e}")]
    Closure { gap: f64, max_gap: f64 },
    #[error("curve self-intersects near s={s1:.6}, s'={s2:.6} (distance {distance:e})")]
    SelfIntersection { s1: f64, s2: f64, distance: f64 },
    #[error("curves {i} and {j} intersect (distance {distance:e})")]
    Intersection { i: usize, j: usize, distance: f64 },
    #[error("no admissible near-regime radius at node spacing {spacing:e}; increase the node count")]
    Resolution { spacing: f64 },
    #[error("point table line {line}: {reason}")]
    PointTable { line: usize, reason: String },
}

/// Specification of a closed curve in chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    /// Circle of radius `radius` in the plane through `center` orthogonal to
    /// `normal` (Euclidean space, torus, or the plane with normal `e_z`).
    Circle {
        radius: f64,
        #[serde(default)]
        center: [f64; 3],
        #[serde(default = "default_normal")]
        normal: [f64; 3],
    },
    /// Ellipse with semi-axes `a` (along `major_axis`) and `b`.
    Ellipse {
        a: f64,
        b: f64,
        #[serde(default)]
        center: [f64; 3],
        #[serde(default = "default_normal")]
        normal: [f64; 3],
        #[serde(default)]
        major_axis: Option<[f64; 3]>,
    },
    /// `(p, q)` torus knot on the torus of radii `major > minor` about the z axis.
    TorusKnot {
        p: u32,
        q: u32,
        major: f64,
        minor: f64,
        #[serde(default)]
        center: [f64; 3],
    },
    /// Geodesic circle of physical radius `radius` about a point of
    /// hyperbolic space, lying in the vertical plane `y = center.y`.
    GeodesicCircle { radius: f64, center: [f64; 3] },
    /// Closed polygon interpolated by a periodic cubic spline.
    Sampled { points: Vec<[f64; 3]> },
}

fn default_normal() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

impl CurveSpec {
    pub fn circle3(radius: f64, center: [f64; 3], normal: [f64; 3]) -> Self {
        CurveSpec::Circle {
            radius,
            center,
            normal,
        }
    }

    pub fn circle2(radius: f64, center: [f64; 2]) -> Self {
        CurveSpec::Circle {
            radius,
            center: [center[0], center[1], 0.0],
            normal: default_normal(),
        }
    }

    pub fn ellipse3(a: f64, b: f64, center: [f64; 3], normal: [f64; 3]) -> Self {
        CurveSpec::Ellipse {
            a,
            b,
            center,
            normal,
            major_axis: None,
        }
    }

    pub fn torus_knot(p: u32, q: u32, major: f64, minor: f64) -> Self {
        CurveSpec::TorusKnot {
            p,
            q,
            major,
            minor,
            center: [0.0; 3],
        }
    }

    pub fn geodesic_circle(radius: f64, center: [f64; 3]) -> Self {
        CurveSpec::GeodesicCircle { radius, center }
    }

    pub fn sampled(points: Vec<[f64; 3]>) -> Self {
        CurveSpec::Sampled { points }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CurveSpec::Circle { .. } => "circle",
            CurveSpec::Ellipse { .. } => "ellipse",
            CurveSpec::TorusKnot { .. } => "torus_knot",
            CurveSpec::GeodesicCircle { .. } => "geodesic_circle",
            CurveSpec::Sampled { .. } => "sampled",
        }
    }

    /// The same curve with all chart coordinates multiplied by `factor`
    /// (flat backends only).
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |v: &[f64; 3]| scale(v, factor);
        match self {
            CurveSpec::Circle {
                radius,
                center,
                normal,
            } => CurveSpec::Circle {
                radius: radius * factor,
                center: s(center),
                normal: *normal,
            },
            CurveSpec::Ellipse {
                a,
                b,
                center,
                normal,
                major_axis,
            } => CurveSpec::Ellipse {
                a: a * factor,
                b: b * factor,
                center: s(center),
                normal: *normal,
                major_axis: *major_axis,
            },
            CurveSpec::TorusKnot {
                p,
                q,
                major,
                minor,
                center,
            } => CurveSpec::TorusKnot {
                p: *p,
                q: *q,
                major: major * factor,
                minor: minor * factor,
                center: s(center),
            },
            CurveSpec::GeodesicCircle { radius, center } => CurveSpec::GeodesicCircle {
                radius: radius * factor,
                center: *center,
            },
            CurveSpec::Sampled { points } => CurveSpec::Sampled {
                points: points.iter().map(s).collect(),
            },
        }
    }

    /// The same curve with every chart coordinate shifted by `offset`.
    pub fn translated(&self, offset: [f64; 3]) -> Self {
        let t = |v: &[f64; 3]| [v[0] + offset[0], v[1] + offset[1], v[2] + offset[2]];
        let mut out = self.clone();
        match &mut out {
            CurveSpec::Circle { center, .. }
            | CurveSpec::Ellipse { center, .. }
            | CurveSpec::TorusKnot { center, .. }
            | CurveSpec::GeodesicCircle { center, .. } => *center = t(center),
            CurveSpec::Sampled { points } => {
                for p in points.iter_mut() {
                    *p = t(p);
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<(), CurveError> {
        let bad = |m: String| Err(CurveError::InvalidSpec(m));
        let finite = |v: &[f64; 3]| v.iter().all(|x| x.is_finite());
        let pos = |x: f64| x.is_finite() && x > 0.0;
        match self {
            CurveSpec::Circle {
                radius,
                center,
                normal,
            } => {
                if !pos(*radius) {
                    return bad(format!("circle radius must be positive, got {radius}"));
                }
                if !finite(center) || !(norm(*normal) > 0.0) || !finite(normal) {
                    return bad("circle center and normal must be finite, normal nonzero".into());
                }
            }
            CurveSpec::Ellipse {
                a,
                b,
                center,
                normal,
                major_axis,
            } => {
                if !pos(*a) || !pos(*b) {
                    return bad(format!("ellipse semi-axes must be positive, got {a}, {b}"));
                }
                if !finite(center) || !(norm(*normal) > 0.0) || !finite(normal) {
                    return bad("ellipse center and normal must be finite, normal nonzero".into());
                }
                if let Some(ax) = major_axis {
                    let n = scale(normal, 1.0 / norm(*normal));
                    let perp = sub(ax, &scale(&n, dot(ax, &n)));
                    if !(norm(perp) > 1e-12 * norm(*ax)) {
                        return bad("ellipse major axis must not be parallel to the normal".into());
                    }
                }
            }
            CurveSpec::TorusKnot {
                p,
                q,
                major,
                minor,
                center,
            } => {
                if *p == 0 || *q == 0 || gcd(*p, *q) != 1 {
                    return bad(format!("torus knot needs coprime p, q >= 1, got ({p}, {q})"));
                }
                if !pos(*minor) || !(major.is_finite() && major > minor) || !finite(center) {
                    return bad(format!(
                        "torus knot needs major > minor > 0, got major={major} minor={minor}"
                    ));
                }
            }
            CurveSpec::GeodesicCircle { radius, center } => {
                if !pos(*radius) {
                    return bad(format!("geodesic radius must be positive, got {radius}"));
                }
                if !finite(center) || !(center[2] > 0.0) {
                    return bad("geodesic circle center needs finite coords with z > 0".into());
                }
            }
            CurveSpec::Sampled { points } => {
                if points.len() < MIN_SAMPLED_POINTS {
                    return bad(format!(
                        "sampled curve needs at least {MIN_SAMPLED_POINTS} points, got {}",
                        points.len()
                    ));
                }
                if points.iter().any(|p| !finite(p)) {
                    return bad("sampled points must be finite".into());
                }
            }
        }
        Ok(())
    }

    fn check_manifold(&self, manifold: &Manifold) -> Result<(), CurveError> {
        let incompatible = || CurveError::Incompatible {
            curve: self.name().into(),
            manifold: format!("{:?}", manifold.kind()),
        };
        let planar_ok = |center: &[f64; 3], normal: &[f64; 3]| {
            center[2] == 0.0 && normal[0] == 0.0 && normal[1] == 0.0
        };
        match (self, manifold.kind()) {
            (CurveSpec::GeodesicCircle { .. }, ManifoldKind::HyperbolicSpace3 { .. }) => Ok(()),
            (CurveSpec::GeodesicCircle { .. }, _) => Err(incompatible()),
            (CurveSpec::Sampled { points }, kind) => {
                for p in points {
                    manifold.validate_point(&Point(*p)).map_err(|e| {
                        CurveError::InvalidSpec(format!("sampled point {p:?} invalid: {e}"))
                    })?;
                }
                let _ = kind;
                Ok(())
            }
            (_, ManifoldKind::HyperbolicSpace3 { .. }) => Err(incompatible()),
            (CurveSpec::TorusKnot { .. }, ManifoldKind::EuclideanPlane) => Err(incompatible()),
            (CurveSpec::Circle { center, normal, .. }, ManifoldKind::EuclideanPlane)
            | (CurveSpec::Ellipse { center, normal, .. }, ManifoldKind::EuclideanPlane) => {
                if planar_ok(center, normal) {
                    Ok(())
                } else {
                    Err(CurveError::InvalidSpec(
                        "planar curves need center z = 0 and normal along e_z".into(),
                    ))
                }
            }
            _ => Ok(()),
        }
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Parse a whitespace-separated table of points, one per line, `#` comments.
/// Two-column rows are planar points.
pub fn parse_point_table(text: &str) -> Result<Vec<[f64; 3]>, CurveError> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let vals: Result<Vec<f64>, _> = body.split_whitespace().map(str::parse::<f64>).collect();
        let vals = vals.map_err(|e| CurveError::PointTable {
            line: k + 1,
            reason: e.to_string(),
        })?;
        match vals.len() {
            2 => out.push([vals[0], vals[1], 0.0]),
            3 => out.push([vals[0], vals[1], vals[2]]),
            n => {
                return Err(CurveError::PointTable {
                    line: k + 1,
                    reason: format!("expected 2 or 3 coordinates, got {n}"),
                })
            }
        }
    }
    Ok(out)
}

/// Orthonormal Frenet triple in chart coordinates (Euclidean-unit vectors;
/// on hyperbolic space the metric-unit vectors are these divided by the
/// conformal factor).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Frame {
    pub tangent: [f64; 3],
    pub normal: [f64; 3],
    pub binormal: [f64; 3],
}

/// Geodesic curvature, torsion and frames at the quadrature nodes.
#[derive(Debug, Clone, Serialize)]
pub struct CurveFrenetData {
    pub curvature: Vec<f64>,
    pub max_curvature: f64,
    pub torsion: Vec<f64>,
    pub frames: Vec<Frame>,
}

/// Certified near/far split of the self-distance.
///
/// For arclength separation `ξ ≤ delta`:
/// `lower_factor · ξ ≤ d(γ(s), γ(s′)) ≤ ξ` with
/// `lower_factor = √(1 − κ*·delta)`; for `ξ > delta`: `d ≥ gap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelfGapCertificate {
    pub delta: f64,
    pub gap: f64,
    pub lower_factor: f64,
    /// Smallest `d/ξ` among certified near pairs.
    pub min_near_ratio: f64,
    /// Largest `d/ξ` over all node pairs (at most one).
    pub max_ratio: f64,
}

/// A closed curve parametrized by arclength.
#[derive(Debug, Clone)]
pub struct Curve {
    spec: CurveSpec,
    manifold: Manifold,
    param: Parametric,
    arclength: ArclengthMap,
    homogeneous: bool,
    nodes: Vec<[f64; 3]>,
    frenet: CurveFrenetData,
    certificate: SelfGapCertificate,
}

fn frame_basis(normal: &[f64; 3]) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let n = scale(normal, 1.0 / norm(*normal));
    let helper = if n[0].abs() <= n[1].abs() && n[0].abs() <= n[2].abs() {
        [1.0, 0.0, 0.0]
    } else if n[1].abs() <= n[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let mut e1 = cross(&helper, &n);
    e1 = scale(&e1, 1.0 / norm(e1));
    // keep e1 = e_x for the standard orientation
    if n == [0.0, 0.0, 1.0] {
        e1 = [1.0, 0.0, 0.0];
    }
    let e2 = cross(&n, &e1);
    (e1, e2, n)
}

impl Curve {
    /// Build and validate a curve with `nodes` trapezoid nodes.
    pub fn build(spec: &CurveSpec, manifold: &Manifold, nodes: usize) -> Result<Self, CurveError> {
        Self::build_with(spec, manifold, nodes, Execution::default())
    }

    pub fn build_with(
        spec: &CurveSpec,
        manifold: &Manifold,
        nodes: usize,
        execution: Execution,
    ) -> Result<Self, CurveError> {
        if nodes < MIN_NODES {
            return Err(CurveError::TooFewNodes {
                nodes,
                min: MIN_NODES,
            });
        }
        spec.validate()?;
        spec.check_manifold(manifold)?;
        let (param, arclength, homogeneous) = match spec {
            CurveSpec::Circle {
                radius,
                center,
                normal,
            } => {
                let (e1, e2, _) = frame_basis(normal);
                (
                    Parametric::Ellipse {
                        center: *center,
                        e1,
                        e2,
                        a: *radius,
                        b: *radius,
                    },
                    ArclengthMap::uniform(2.0 * std::f64::consts::PI * radius),
                    true,
                )
            }
            CurveSpec::Ellipse {
                a,
                b,
                center,
                normal,
                major_axis,
            } => {
                let (mut e1, _, n) = frame_basis(normal);
                if let Some(ax) = major_axis {
                    let perp = sub(ax, &scale(&n, dot(ax, &n)));
                    e1 = scale(&perp, 1.0 / norm(perp));
                }
                let e2 = cross(&n, &e1);
                let param = Parametric::Ellipse {
                    center: *center,
                    e1,
                    e2,
                    a: *a,
                    b: *b,
                };
                let map = ArclengthMap::tabulate(manifold, &param, 128);
                (param, map, a == b)
            }
            CurveSpec::TorusKnot {
                p,
                q,
                major,
                minor,
                center,
            } => {
                let param = Parametric::TorusKnot {
                    center: *center,
                    p: *p as f64,
                    q: *q as f64,
                    major: *major,
                    minor: *minor,
                };
                let map = ArclengthMap::tabulate(manifold, &param, 64 * (*p).max(*q) as usize);
                (param, map, false)
            }
            CurveSpec::GeodesicCircle { radius, center } => {
                let r_c = match manifold.kind() {
                    ManifoldKind::HyperbolicSpace3 { curvature_scale } => curvature_scale,
                    _ => unreachable!("checked above"),
                };
                let rho = radius / r_c;
                (
                    Parametric::GeodesicCircle {
                        center: *center,
                        rho,
                    },
                    ArclengthMap::uniform(2.0 * std::f64::consts::PI * r_c * rho.sinh()),
                    true,
                )
            }
            CurveSpec::Sampled { points } => {
                let pts = prepare_sampled(points)?;
                let param = Parametric::Spline(PeriodicSpline::new(&pts));
                let map = ArclengthMap::tabulate(manifold, &param, 0);
                (param, map, false)
            }
        };
        let mut curve = Curve {
            spec: spec.clone(),
            manifold: manifold.clone(),
            param,
            arclength,
            homogeneous,
            nodes: Vec::new(),
            frenet: CurveFrenetData {
                curvature: Vec::new(),
                max_curvature: 0.0,
                torsion: Vec::new(),
                frames: Vec::new(),
            },
            certificate: SelfGapCertificate {
                delta: 0.0,
                gap: 0.0,
                lower_factor: 1.0,
                min_near_ratio: 1.0,
                max_ratio: 1.0,
            },
        };
        let h = curve.length() / nodes as f64;
        curve.nodes = map_range(execution, nodes, |k| curve.raw_point(k as f64 * h));
        if !manifold.is_flat() && curve.nodes.iter().any(|p| !(p[2] > 0.0)) {
            return Err(CurveError::InvalidSpec(
                "curve leaves the upper half-space".into(),
            ));
        }
        curve.frenet = curve.compute_frenet(execution);
        curve.certificate = curve.compute_self_gap(execution)?;
        Ok(curve)
    }

    pub fn spec(&self) -> &CurveSpec {
        &self.spec
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn length(&self) -> f64 {
        self.arclength.length()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_spacing(&self) -> f64 {
        self.length() / self.nodes.len() as f64
    }

    /// Chart coordinates of the nodes `γ(k L / n)`.
    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    /// Intrinsically homogeneous curves (circles) where every base point is
    /// equivalent for the self-interaction integrals.
    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous
    }

    pub fn frenet(&self) -> &CurveFrenetData {
        &self.frenet
    }

    pub fn self_gap(&self) -> &SelfGapCertificate {
        &self.certificate
    }

    fn jet_at(&self, s: f64) -> Jet {
        let u = self.arclength.parameter(&self.manifold, &self.param, s);
        self.param.jet(u)
    }

    /// Chart coordinates of `γ(s)` (not reduced to the torus fundamental domain).
    pub fn raw_point(&self, s: f64) -> [f64; 3] {
        self.jet_at(s).p
    }

    /// `γ(s)`, reduced to the fundamental domain.
    pub fn eval(&self, s: f64) -> Point {
        self.manifold
            .reduce(&Point(self.raw_point(s)))
            .expect("curve points are valid")
    }

    /// Frame and geodesic curvature at arclength `s`.
    pub fn frame_at(&self, s: f64) -> (Frame, f64) {
        frame_from_jet(&self.manifold, &self.jet_at(s))
    }

    /// Chord `r = |γ(s+ξ) − γ(s)|` and deficit `|ξ| − r` in flat space,
    /// accurate for small `ξ`. Given the curvature at `s`, offsets with
    /// `κ|ξ| < 1e-5` use the local expansion `ξ − r ≈ κ²|ξ|³/24`.
    pub(crate) fn chord_and_deficit_with(&self, s: f64, xi: f64, base_curvature: Option<f64>) -> (f64, f64) {
        let ax = xi.abs();
        if let CurveSpec::Circle { radius, .. } = self.spec {
            let x = ax / (2.0 * radius);
            return (
                2.0 * radius * x.sin(),
                2.0 * radius * crate::special::x_minus_sin(x),
            );
        }
        if let Some(k) = base_curvature {
            if k * ax < 1e-5 {
                let d = k * k * ax * ax * ax / 24.0;
                return (ax - d, d);
            }
        }
        if ax < 0.01 * self.length() {
            // ξ² − r² = ½ ∬ |T(σ) − T(σ′)|² dσ dσ′ over the arc
            let rule = crate::quadrature::GaussRule::new(12);
            let (a, b) = if xi >= 0.0 { (s, s + xi) } else { (s + xi, s) };
            let mut pts = Vec::with_capacity(12);
            rule.push_panel(a, b, &mut pts);
            let tangents: Vec<[f64; 3]> = pts
                .iter()
                .map(|&(sig, _)| {
                    let j = self.jet_at(sig);
                    scale(&j.d1, 1.0 / norm(j.d1))
                })
                .collect();
            let mut d2 = 0.0;
            for (k, tk) in tangents.iter().enumerate() {
                for (l, tl) in tangents.iter().enumerate() {
                    let diff = sub(tk, tl);
                    d2 += pts[k].1 * pts[l].1 * dot(&diff, &diff);
                }
            }
            let d2 = 0.5 * d2;
            let r = (ax * ax - d2).max(0.0).sqrt();
            (r, d2 / (ax + r))
        } else {
            let r = self
                .manifold
                .distance_unchecked(&self.raw_point(s), &self.raw_point(s + xi));
            (r, ax - r)
        }
    }

    fn compute_frenet(&self, execution: Execution) -> CurveFrenetData {
        let n = self.nodes.len();
        let h = self.node_spacing();
        let flat3 = self.manifold.is_flat() && self.manifold.dimension() == 3;
        let planar = self.manifold.dimension() == 2;
        let data = map_range(execution, n, |k| {
            let s = k as f64 * h;
            let jet = self.jet_at(s);
            let (frame, kappa) = frame_from_jet(&self.manifold, &jet);
            let torsion = if planar || kappa < 1e-12 {
                0.0
            } else if flat3 {
                let c = cross(&jet.d1, &jet.d2);
                let cc = dot(&c, &c);
                if cc > 0.0 {
                    dot(&c, &jet.d3) / cc
                } else {
                    0.0
                }
            } else {
                // τ = (dN/ds)·B for Euclidean-unit chart frames in a conformal metric
                let ds = 1e-5 * self.length();
                let (fp, _) = self.frame_at(s + ds);
                let (fm, _) = self.frame_at(s - ds);
                let dn = scale(&sub(&fp.normal, &fm.normal), 1.0 / (2.0 * ds));
                dot(&dn, &frame.binormal)
            };
            (frame, kappa, torsion)
        });
        let curvature: Vec<f64> = data.iter().map(|d| d.1).collect();
        CurveFrenetData {
            max_curvature: curvature.iter().cloned().fold(0.0, f64::max),
            curvature,
            torsion: data.iter().map(|d| d.2).collect(),
            frames: data.iter().map(|d| d.0).collect(),
        }
    }

    fn compute_self_gap(&self, execution: Execution) -> Result<SelfGapCertificate, CurveError> {
        let n = self.nodes.len();
        let h = self.node_spacing();
        let length = self.length();
        let half = n / 2;
        // per offset m: minimum and maximum of d over base nodes
        let stats = map_range(execution, half, |mm| {
            let m = mm + 1;
            let mut dmin = f64::INFINITY;
            let mut dmax: f64 = 0.0;
            let mut argmin = 0;
            for i in 0..n {
                let d = self
                    .manifold
                    .distance_unchecked(&self.nodes[i], &self.nodes[(i + m) % n]);
                if d < dmin {
                    dmin = d;
                    argmin = i;
                }
                dmax = dmax.max(d);
            }
            (dmin, dmax, argmin)
        });
        let kappa = self.frenet.max_curvature;
        let mut cap = length / 4.0;
        if kappa > 1e-12 {
            cap = cap.min(0.99 / (2.0 * kappa));
        }
        let factor = |delta: f64| (1.0 - kappa * delta).max(0.0).sqrt();
        let valid = |delta: f64| {
            let f = factor(delta);
            (1..=half)
                .take_while(|&m| m as f64 * h <= delta)
                .all(|m| stats[m - 1].0 >= f * m as f64 * h * (1.0 - 1e-12))
        };
        let mut candidates = vec![cap];
        let mut m = (cap / h).floor() as usize;
        while m >= 1 {
            if (m as f64 * h) < cap {
                candidates.push(m as f64 * h);
            }
            m -= 1;
        }
        let delta = candidates
            .into_iter()
            .find(|&d| d >= h && valid(d))
            .ok_or(CurveError::Resolution { spacing: h })?;
        let near_ratio = (1..=half)
            .take_while(|&m| m as f64 * h <= delta)
            .map(|m| stats[m - 1].0 / (m as f64 * h))
            .fold(f64::INFINITY, f64::min);
        let max_ratio = (1..=half)
            .map(|m| stats[m - 1].1 / (m as f64 * h).min(length - m as f64 * h))
            .fold(0.0, f64::max);
        // far regime: node pairs beyond delta plus the boundary ξ = δ
        let mut gap = f64::INFINITY;
        let mut worst = (0.0, 0.0);
        for m in 1..=half {
            if m as f64 * h > delta && stats[m - 1].0 < gap {
                gap = stats[m - 1].0;
                let i = stats[m - 1].2;
                worst = (i as f64 * h, ((i + m) % n) as f64 * h);
            }
        }
        let boundary = map_range(execution, n, |i| {
            let s = i as f64 * h;
            self.manifold
                .distance_unchecked(&self.nodes[i], &self.raw_point(s + delta))
        });
        for (i, d) in boundary.iter().enumerate() {
            if *d < gap {
                gap = *d;
                worst = (i as f64 * h, i as f64 * h + delta);
            }
        }
        if !(gap > 1e-9 * length) {
            return Err(CurveError::SelfIntersection {
                s1: worst.0,
                s2: worst.1,
                distance: gap,
            });
        }
        Ok(SelfGapCertificate {
            delta,
            gap,
            lower_factor: factor(delta),
            min_near_ratio: near_ratio,
            max_ratio,
        })
    }
}

/// Frame and geodesic curvature from a parametric jet, using the covariant
/// derivative of the conformally flat metric `e^{2φ}δ`.
fn frame_from_jet(manifold: &Manifold, jet: &Jet) -> (Frame, f64) {
    let (phi, grad) = manifold.conformal_log(&jet.p);
    let c1 = jet.d1;
    let n1sq = dot(&c1, &c1);
    let gdot = dot(&grad, &c1);
    let acc = [
        jet.d2[0] + 2.0 * gdot * c1[0] - n1sq * grad[0],
        jet.d2[1] + 2.0 * gdot * c1[1] - n1sq * grad[1],
        jet.d2[2] + 2.0 * gdot * c1[2] - n1sq * grad[2],
    ];
    let perp = sub(&acc, &scale(&c1, dot(&acc, &c1) / n1sq));
    let pn = norm(perp);
    let kappa = pn / (phi.exp() * n1sq);
    let tangent = scale(&c1, 1.0 / n1sq.sqrt());
    let normal = if pn > 1e-13 * n1sq {
        scale(&perp, 1.0 / pn)
    } else {
        let (e1, _, _) = frame_basis(&tangent);
        e1
    };
    let binormal = cross(&tangent, &normal);
    (
        Frame {
            tangent,
            normal,
            binormal,
        },
        kappa,
    )
}

/// Drop a repeated closing point and check closure and simplicity of the polygon.
fn prepare_sampled(points: &[[f64; 3]]) -> Result<Vec<[f64; 3]>, CurveError> {
    let mut pts = points.to_vec();
    let d = |a: &[f64; 3], b: &[f64; 3]| norm(sub(a, b));
    if pts.len() > 1 && d(&pts[0], &pts[pts.len() - 1]) == 0.0 {
        pts.pop();
    }
    if pts.len() < MIN_SAMPLED_POINTS {
        return Err(CurveError::InvalidSpec(format!(
            "sampled curve needs at least {MIN_SAMPLED_POINTS} distinct points"
        )));
    }
    let n = pts.len();
    let gaps: Vec<f64> = (0..n).map(|i| d(&pts[i], &pts[(i + 1) % n])).collect();
    let max_open = gaps[..n - 1].iter().cloned().fold(0.0, f64::max);
    if gaps[n - 1] > 4.0 * max_open {
        return Err(CurveError::Closure {
            gap: gaps[n - 1],
            max_gap: max_open,
        });
    }
    let perimeter: f64 = gaps.iter().sum();
    for i in 0..n {
        for j in i + 1..n {
            if d(&pts[i], &pts[j]) <= 1e-12 * perimeter {
                return Err(CurveError::InvalidSpec(format!(
                    "sampled points {i} and {j} coincide"
                )));
            }
        }
    }
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let dist = segment_distance(&pts[i], &pts[(i + 1) % n], &pts[j], &pts[(j + 1) % n]);
            if dist <= 1e-12 * perimeter {
                return Err(CurveError::SelfIntersection {
                    s1: i as f64,
                    s2: j as f64,
                    distance: dist,
                });
            }
        }
    }
    Ok(pts)
}

/// Minimum distance between segments `[p0, p1]` and `[q0, q1]`.
fn segment_distance(p0: &[f64; 3], p1: &[f64; 3], q0: &[f64; 3], q1: &[f64; 3]) -> f64 {
    let u = sub(p1, p0);
    let v = sub(q1, q0);
    let w = sub(p0, q0);
    let a = dot(&u, &u);
    let b = dot(&u, &v);
    let c = dot(&v, &v);
    let d = dot(&u, &w);
    let e = dot(&v, &w);
    let den = a * c - b * b;
    let mut s = if den > 1e-14 * a * c {
        ((b * e - c * d) / den).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut t = ((b * s + e) / c).clamp(0.0, 1.0);
    s = ((b * t - d) / a).clamp(0.0, 1.0);
    t = ((b * s + e) / c).clamp(0.0, 1.0);
    let diff = [
        w[0] + s * u[0] - t * v[0],
        w[1] + s * u[1] - t * v[1],
        w[2] + s * u[2] - t * v[2],
    ];
    norm(diff)
}

#[cfg(test)]
mod tests;
