//! Parametrizations `u ∈ [0, 1) ↦ chart point` with derivatives up to third
//! order, and the arclength map `s ↦ u`.

use std::f64::consts::PI;

use nalgebra::Complex;

use crate::geometry::{add, norm, scale, Manifold};
use crate::quadrature::GaussRule;

const TAU: f64 = 2.0 * PI;

/// Chart position and derivatives with respect to the parameter `u`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Jet {
    pub p: [f64; 3],
    pub d1: [f64; 3],
    pub d2: [f64; 3],
    pub d3: [f64; 3],
}

#[derive(Debug, Clone)]
pub(crate) enum Parametric {
    Ellipse {
        center: [f64; 3],
        e1: [f64; 3],
        e2: [f64; 3],
        a: f64,
        b: f64,
    },
    TorusKnot {
        center: [f64; 3],
        p: f64,
        q: f64,
        major: f64,
        minor: f64,
    },
    /// Geodesic circle of unit-curvature radius `rho` about a chart point.
    GeodesicCircle { center: [f64; 3], rho: f64 },
    Spline(PeriodicSpline),
}

impl Parametric {
    pub fn jet(&self, u: f64) -> Jet {
        match self {
            Parametric::Ellipse { center, e1, e2, a, b } => {
                let th = TAU * u;
                let (s, c) = th.sin_cos();
                let comb = |x: f64, y: f64, f: f64| {
                    scale(&add(&scale(e1, a * x), &scale(e2, b * y)), f)
                };
                Jet {
                    p: add(center, &comb(c, s, 1.0)),
                    d1: comb(-s, c, TAU),
                    d2: comb(-c, -s, TAU * TAU),
                    d3: comb(s, -c, TAU * TAU * TAU),
                }
            }
            Parametric::TorusKnot {
                center,
                p,
                q,
                major,
                minor,
            } => {
                let th = TAU * u;
                let (sq, cq) = (q * th).sin_cos();
                let (sp, cp) = (p * th).sin_cos();
                let a0 = major + minor * cq;
                let a1 = -minor * q * sq;
                let a2 = -minor * q * q * cq;
                let a3 = minor * q * q * q * sq;
                let x = [
                    a0 * cp,
                    a1 * cp - p * a0 * sp,
                    a2 * cp - 2.0 * p * a1 * sp - p * p * a0 * cp,
                    a3 * cp - 3.0 * p * a2 * sp - 3.0 * p * p * a1 * cp + p * p * p * a0 * sp,
                ];
                let y = [
                    a0 * sp,
                    a1 * sp + p * a0 * cp,
                    a2 * sp + 2.0 * p * a1 * cp - p * p * a0 * sp,
                    a3 * sp + 3.0 * p * a2 * cp - 3.0 * p * p * a1 * sp - p * p * p * a0 * cp,
                ];
                let z = [
                    minor * sq,
                    minor * q * cq,
                    -minor * q * q * sq,
                    -minor * q * q * q * cq,
                ];
                let f = [1.0, TAU, TAU * TAU, TAU * TAU * TAU];
                let v = |k: usize| [x[k] * f[k], y[k] * f[k], z[k] * f[k]];
                Jet {
                    p: add(center, &v(0)),
                    d1: v(1),
                    d2: v(2),
                    d3: v(3),
                }
            }
            Parametric::GeodesicCircle { center, rho } => {
                // Elliptic rotation about i in the vertical half-plane through
                // the center, dilated by the center height.
                let th = TAU * u;
                let (s, c) = (0.5 * th).sin_cos();
                let z0 = Complex::new(0.0, rho.exp());
                let w = (z0 * c + s) / (z0 * (-s) + c);
                let w1 = (w * w + 1.0) * 0.5;
                let w2 = w * w1;
                let w3 = w1 * (w1 + w * w);
                let h = center[2];
                let chart = |z: Complex<f64>, f: f64, base: bool| {
                    let off = if base { 1.0 } else { 0.0 };
                    [
                        off * center[0] + f * h * z.re,
                        off * center[1],
                        f * h * z.im,
                    ]
                };
                Jet {
                    p: chart(w, 1.0, true),
                    d1: chart(w1, TAU, false),
                    d2: chart(w2, TAU * TAU, false),
                    d3: chart(w3, TAU * TAU * TAU, false),
                }
            }
            Parametric::Spline(sp) => sp.jet(u),
        }
    }

    /// Breakpoints in `u` where the parametrization is only piecewise smooth.
    pub fn breakpoints(&self) -> Option<Vec<f64>> {
        match self {
            Parametric::Spline(sp) => Some(sp.knots_u()),
            _ => None,
        }
    }
}

/// Interpolating periodic cubic spline through a closed polygon, with
/// chord-length knots.
#[derive(Debug, Clone)]
pub(crate) struct PeriodicSpline {
    points: Vec<[f64; 3]>,
    /// Knot positions `t_0 = 0 < … < t_n = T`.
    knots: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<[f64; 3]>,
}

impl PeriodicSpline {
    pub fn new(points: &[[f64; 3]]) -> Self {
        let n = points.len();
        let mut knots = Vec::with_capacity(n + 1);
        knots.push(0.0);
        for i in 0..n {
            let d = norm(crate::geometry::sub(&points[(i + 1) % n], &points[i]));
            knots.push(knots[i] + d);
        }
        let h: Vec<f64> = (0..n).map(|i| knots[i + 1] - knots[i]).collect();
        let mut m = vec![[0.0; 3]; n];
        for k in 0..3 {
            let y: Vec<f64> = points.iter().map(|p| p[k]).collect();
            // h_{i-1} M_{i-1} + 2(h_{i-1} + h_i) M_i + h_i M_{i+1} = rhs_i
            let sub: Vec<f64> = (0..n).map(|i| h[(i + n - 1) % n]).collect();
            let diag: Vec<f64> = (0..n).map(|i| 2.0 * (h[(i + n - 1) % n] + h[i])).collect();
            let sup: Vec<f64> = h.clone();
            let rhs: Vec<f64> = (0..n)
                .map(|i| {
                    let ip = (i + 1) % n;
                    let im = (i + n - 1) % n;
                    6.0 * ((y[ip] - y[i]) / h[i] - (y[i] - y[im]) / h[im])
                })
                .collect();
            let sol = solve_cyclic(&sub, &diag, &sup, &rhs);
            for i in 0..n {
                m[i][k] = sol[i];
            }
        }
        Self {
            points: points.to_vec(),
            knots,
            m,
        }
    }

    fn total(&self) -> f64 {
        *self.knots.last().expect("nonempty")
    }

    pub fn knots_u(&self) -> Vec<f64> {
        let t = self.total();
        self.knots.iter().map(|k| k / t).collect()
    }

    pub fn jet(&self, u: f64) -> Jet {
        let n = self.points.len();
        let total = self.total();
        let tau = u.rem_euclid(1.0) * total;
        let i = match self.knots.binary_search_by(|k| k.total_cmp(&tau)) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        };
        let ip = (i + 1) % n;
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - tau) / h;
        let b = 1.0 - a;
        let (y0, y1) = (self.points[i], self.points[ip]);
        let (m0, m1) = (self.m[i], self.m[ip]);
        let mut jet = Jet {
            p: [0.0; 3],
            d1: [0.0; 3],
            d2: [0.0; 3],
            d3: [0.0; 3],
        };
        for k in 0..3 {
            jet.p[k] = a * y0[k]
                + b * y1[k]
                + ((a * a * a - a) * m0[k] + (b * b * b - b) * m1[k]) * h * h / 6.0;
            jet.d1[k] = (y1[k] - y0[k]) / h - (3.0 * a * a - 1.0) * h * m0[k] / 6.0
                + (3.0 * b * b - 1.0) * h * m1[k] / 6.0;
            jet.d2[k] = a * m0[k] + b * m1[k];
            jet.d3[k] = (m1[k] - m0[k]) / h;
        }
        jet.d1 = scale(&jet.d1, total);
        jet.d2 = scale(&jet.d2, total * total);
        jet.d3 = scale(&jet.d3, total * total * total);
        jet
    }
}

/// Solve a cyclic tridiagonal system (Sherman–Morrison on the Thomas
/// algorithm). `sub[0]` couples row 0 to the last unknown, `sup[n-1]` the
/// last row to the first.
fn solve_cyclic(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let alpha = sup[n - 1];
    let beta = sub[0];
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] = diag[0] - gamma;
    bb[n - 1] = diag[n - 1] - alpha * beta / gamma;
    let x = thomas(sub, &bb, sup, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(sub, &bb, sup, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / den } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Map from arclength to parameter.
#[derive(Debug, Clone)]
pub(crate) enum ArclengthMap {
    Uniform { length: f64 },
    Table(ArclengthTable),
}

#[derive(Debug, Clone)]
pub(crate) struct ArclengthTable {
    breaks: Vec<f64>,
    cumulative: Vec<f64>,
    rule: GaussRule,
}

/// Metric speed `|dγ/du|_g`.
pub(crate) fn speed(manifold: &Manifold, param: &Parametric, u: f64) -> f64 {
    let jet = param.jet(u);
    let (phi, _) = manifold.conformal_log(&jet.p);
    phi.exp() * norm(jet.d1)
}

impl ArclengthMap {
    pub fn uniform(length: f64) -> Self {
        ArclengthMap::Uniform { length }
    }

    pub fn tabulate(manifold: &Manifold, param: &Parametric, panels: usize) -> Self {
        let breaks = match param.breakpoints() {
            Some(b) => {
                // subdivide each spline segment twice for accuracy
                let mut out = Vec::with_capacity(2 * b.len());
                for w in b.windows(2) {
                    out.push(w[0]);
                    out.push(0.5 * (w[0] + w[1]));
                }
                out.push(1.0);
                out
            }
            None => (0..=panels).map(|k| k as f64 / panels as f64).collect(),
        };
        let rule = GaussRule::new(20);
        let mut cumulative = vec![0.0];
        for w in breaks.windows(2) {
            let seg = rule.integrate(w[0], w[1], |u| speed(manifold, param, u));
            cumulative.push(cumulative.last().expect("nonempty") + seg);
        }
        ArclengthMap::Table(ArclengthTable {
            breaks,
            cumulative,
            rule,
        })
    }

    pub fn length(&self) -> f64 {
        match self {
            ArclengthMap::Uniform { length } => *length,
            ArclengthMap::Table(t) => *t.cumulative.last().expect("nonempty"),
        }
    }

    /// Parameter `u ∈ [0, 1)` at arclength `s` (periodically extended).
    pub fn parameter(&self, manifold: &Manifold, param: &Parametric, s: f64) -> f64 {
        let length = self.length();
        let s = s.rem_euclid(length);
        match self {
            ArclengthMap::Uniform { .. } => s / length,
            ArclengthMap::Table(t) => {
                let k = match t.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
                    Ok(k) => k.min(t.breaks.len() - 2),
                    Err(k) => k.saturating_sub(1).min(t.breaks.len() - 2),
                };
                let (u0, u1) = (t.breaks[k], t.breaks[k + 1]);
                let (c0, c1) = (t.cumulative[k], t.cumulative[k + 1]);
                let mut u = u0 + (s - c0) / (c1 - c0) * (u1 - u0);
                for _ in 0..40 {
                    let f = c0 + t.rule.integrate(u0, u, |v| speed(manifold, param, v)) - s;
                    let step = f / speed(manifold, param, u);
                    u = (u - step).clamp(u0, u1);
                    if step.abs() < 1e-16 {
                        break;
                    }
                }
                u
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_solver_matches_dense() {
        let n = 7;
        let sub: Vec<f64> = (0..n).map(|i| 0.3 + 0.1 * i as f64).collect();
        let sup: Vec<f64> = (0..n).map(|i| 0.5 - 0.05 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 3.0 + 0.2 * i as f64).collect();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = solve_cyclic(&sub, &diag, &sup, &rhs);
        for i in 0..n {
            let im = (i + n - 1) % n;
            let ip = (i + 1) % n;
            let lhs = sub[i] * x[im] + diag[i] * x[i] + sup[i] * x[ip];
            assert!((lhs - rhs[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn spline_interpolates_and_is_c2() {
        let pts: Vec<[f64; 3]> = (0..20)
            .map(|k| {
                let t = TAU * k as f64 / 20.0;
                [t.cos() * (1.0 + 0.1 * (3.0 * t).cos()), t.sin(), 0.1 * t.sin()]
            })
            .collect();
        let sp = PeriodicSpline::new(&pts);
        let ku = sp.knots_u();
        for (k, p) in pts.iter().enumerate() {
            let j = sp.jet(ku[k]);
            for c in 0..3 {
                assert!((j.p[c] - p[c]).abs() < 1e-12);
            }
            let left = sp.jet(ku[k] - 1e-12);
            let right = sp.jet(ku[k] + 1e-12);
            for c in 0..3 {
                assert!((left.d2[c] - right.d2[c]).abs() < 1e-6 * (1.0 + left.d2[c].abs()));
            }
        }
    }
}
