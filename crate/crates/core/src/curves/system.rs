//! Systems of curves sharing one ambient manifold and one scheme.

use serde::Serialize;

use super::{Curve, CurveError, CurveSpec};
use crate::config::QuadratureConfig;
use crate::geometry::Manifold;
use crate::operator::Scheme;
use crate::par::{map_range, Execution};
use crate::Error;

/// `N` disjoint closed curves together with the active scheme and the
/// pairwise minimum distances.
#[derive(Debug, Clone)]
pub struct CurveSystem {
    manifold: Manifold,
    curves: Vec<Curve>,
    scheme: Scheme,
    distances: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveSummary {
    pub kind: &'static str,
    pub length: f64,
    pub max_curvature: f64,
    pub delta: f64,
    pub gap: f64,
}

impl CurveSystem {
    /// Build every curve with `config.nodes` nodes and validate the system.
    pub fn new(
        manifold: Manifold,
        specs: &[CurveSpec],
        scheme: Scheme,
        config: &QuadratureConfig,
    ) -> Result<Self, Error> {
        let curves = specs
            .iter()
            .map(|s| Curve::build_with(s, &manifold, config.nodes, config.execution))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_curves(manifold, curves, scheme, config.execution)
    }

    pub fn from_curves(
        manifold: Manifold,
        curves: Vec<Curve>,
        scheme: Scheme,
        execution: Execution,
    ) -> Result<Self, Error> {
        if curves.is_empty() {
            return Err(CurveError::InvalidSpec("a curve system needs at least one curve".into()).into());
        }
        scheme.validate(&manifold, curves.len())?;
        let distances = pairwise_distances(&manifold, &curves, execution)?;
        Ok(Self {
            manifold,
            curves,
            scheme,
            distances,
        })
    }

    /// The same curves under a different scheme.
    pub fn with_scheme(&self, scheme: Scheme) -> Result<Self, Error> {
        scheme.validate(&self.manifold, self.curves.len())?;
        Ok(Self {
            scheme,
            ..self.clone()
        })
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    /// Minimum distance between curves `i ≠ j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[i][j]
    }

    pub fn distances(&self) -> &[Vec<f64>] {
        &self.distances
    }

    pub fn min_distance(&self) -> Option<f64> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.distances[i][j])
            .reduce(f64::min)
    }

    pub fn summary(&self) -> Vec<CurveSummary> {
        self.curves
            .iter()
            .map(|c| CurveSummary {
                kind: c.spec().name(),
                length: c.length(),
                max_curvature: c.frenet().max_curvature,
                delta: c.self_gap().delta,
                gap: c.self_gap().gap,
            })
            .collect()
    }
}

/// Symmetric matrix of minimum geodesic distances; the diagonal is zero.
///
/// The node-pair minimum is refined by alternating golden-section searches
/// in the two arclength variables.
pub fn pairwise_distances(
    manifold: &Manifold,
    curves: &[Curve],
    execution: Execution,
) -> Result<Vec<Vec<f64>>, CurveError> {
    let n = curves.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = curve_distance(manifold, &curves[i], &curves[j], execution);
            let scale = curves[i].length().min(curves[j].length());
            if !(d > 1e-9 * scale) {
                return Err(CurveError::Intersection { i, j, distance: d });
            }
            out[i][j] = d;
            out[j][i] = d;
        }
    }
    Ok(out)
}

fn curve_distance(manifold: &Manifold, a: &Curve, b: &Curve, execution: Execution) -> f64 {
    let rows = map_range(execution, a.node_count(), |k| {
        let p = a.nodes()[k];
        b.nodes()
            .iter()
            .enumerate()
            .map(|(l, q)| (manifold.distance_unchecked(&p, q), l))
            .fold((f64::INFINITY, 0), |m, v| if v.0 < m.0 { v } else { m })
    });
    let (best, k, l) = rows
        .iter()
        .enumerate()
        .fold((f64::INFINITY, 0, 0), |m, (k, &(d, l))| if d < m.0 { (d, k, l) } else { m });
    let ha = a.node_spacing();
    let hb = b.node_spacing();
    let dist = |s: f64, t: f64| manifold.distance_unchecked(&a.raw_point(s), &b.raw_point(t));
    let (mut s, mut t) = (k as f64 * ha, l as f64 * hb);
    let mut value = best;
    for _ in 0..200 {
        s = golden(|x| dist(x, t), s - ha, s + ha);
        t = golden(|y| dist(s, y), t - hb, t + hb);
        let v = dist(s, t);
        if v >= value * (1.0 - 1e-15) {
            value = value.min(v);
            break;
        }
        value = v;
    }
    value.min(best)
}

fn golden<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
