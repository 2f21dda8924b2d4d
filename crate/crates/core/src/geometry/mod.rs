//! Ambient manifolds, unit conventions and the free heat and resolvent
//! kernels of `H₀ = -Δ_g`.

mod euclidean;
mod hyperbolic;
mod torus;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use euclidean::{
    green2, green2_energy_derivative, green3, green3_difference, green3_energy_derivative,
    heat2, heat3, truncated_green3,
};
pub use hyperbolic::{hyperbolic_chart_distance, hyperbolic_green_closed_form};

/// Errors raised by geometric primitives and kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid manifold: {0}")]
    InvalidManifold(String),
    #[error("invalid point {point:?}: {reason}")]
    InvalidPoint { point: [f64; 3], reason: String },
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error("kernel evaluated at coincident points")]
    Coincident,
    #[error("image sum not converged after {shells} shells (last shell {tail_bound:e})")]
    Truncation { shells: usize, tail_bound: f64 },
    #[error("invalid units: {0}")]
    InvalidUnits(String),
}

/// Physical constants used to convert user values to canonical units
/// (`ħ = 1`, `m = 1/2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsConfig {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for UnitsConfig {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 0.5 }
    }
}

impl UnitsConfig {
    pub fn new(hbar: f64, mass: f64) -> Result<Self, GeometryError> {
        let units = Self { hbar, mass };
        units.validate()?;
        Ok(units)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.hbar.is_finite() && self.hbar > 0.0 && self.mass.is_finite() && self.mass > 0.0)
        {
            return Err(GeometryError::InvalidUnits(format!(
                "hbar and mass must be positive and finite, got hbar={} mass={}",
                self.hbar, self.mass
            )));
        }
        Ok(())
    }

    /// `ħ²/2m`: one canonical energy unit expressed in user units.
    pub fn energy_scale(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.mass)
    }

    pub fn energy_to_canonical(&self, energy: f64) -> f64 {
        energy / self.energy_scale()
    }

    pub fn energy_from_canonical(&self, energy: f64) -> f64 {
        energy * self.energy_scale()
    }

    /// Heat-kernel time `t` in canonical units, `ħ t / 2m`.
    pub fn time_to_canonical(&self, t: f64) -> f64 {
        self.hbar * t / (2.0 * self.mass)
    }
}

/// A point in chart coordinates. Planar points have zero third component;
/// hyperbolic points use upper half-space coordinates with `z > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point(pub [f64; 3]);

impl Point {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point([x, y, z])
    }

    pub fn planar(x: f64, y: f64) -> Self {
        Point([x, y, 0.0])
    }

    pub fn coords(&self) -> [f64; 3] {
        self.0
    }
}

/// Parameters of the lattice image sum on the flat torus.
///
/// When the shell budget is too small for the decay rate, kernels switch to
/// a time integral over the product theta-function heat kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSumOptions {
    /// Stop once a shell contributes less than this fraction of the sum.
    pub rel_tol: f64,
    /// Give up after this many shells.
    pub max_shells: usize,
}

impl Default for ImageSumOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_shells: 32,
        }
    }
}

/// The kind of ambient space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldKind {
    EuclideanPlane,
    EuclideanSpace3,
    FlatTorus3 { periods: [f64; 3] },
    HyperbolicSpace3 { curvature_scale: f64 },
}

/// Ambient Riemannian manifold together with kernel evaluation options.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifold {
    kind: ManifoldKind,
    images: ImageSumOptions,
    time_step: f64,
}

const DEFAULT_TIME_STEP: f64 = 0.2;

impl Manifold {
    pub fn new(kind: ManifoldKind) -> Result<Self, GeometryError> {
        match kind {
            ManifoldKind::FlatTorus3 { periods } => {
                if periods.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
                    return Err(GeometryError::InvalidManifold(format!(
                        "torus periods must be positive and finite, got {periods:?}"
                    )));
                }
            }
            ManifoldKind::HyperbolicSpace3 { curvature_scale }
                if !(curvature_scale.is_finite() && curvature_scale > 0.0) =>
            {
                return Err(GeometryError::InvalidManifold(format!(
                    "curvature scale must be positive and finite, got {curvature_scale}"
                )));
            }
            _ => {}
        }
        Ok(Self {
            kind,
            images: ImageSumOptions::default(),
            time_step: DEFAULT_TIME_STEP,
        })
    }

    pub fn euclidean_plane() -> Self {
        Self::new(ManifoldKind::EuclideanPlane).expect("valid")
    }

    pub fn euclidean_space3() -> Self {
        Self::new(ManifoldKind::EuclideanSpace3).expect("valid")
    }

    pub fn flat_torus3(periods: [f64; 3]) -> Result<Self, GeometryError> {
        Self::new(ManifoldKind::FlatTorus3 { periods })
    }

    pub fn hyperbolic_space3(curvature_scale: f64) -> Result<Self, GeometryError> {
        Self::new(ManifoldKind::HyperbolicSpace3 { curvature_scale })
    }

    pub fn with_image_options(mut self, images: ImageSumOptions) -> Self {
        self.images = images;
        self
    }

    /// Step of the log-time trapezoid used by kernels without a closed form.
    pub fn with_time_step(mut self, step: f64) -> Self {
        self.time_step = step;
        self
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn image_options(&self) -> ImageSumOptions {
        self.images
    }

    pub fn dimension(&self) -> usize {
        match self.kind {
            ManifoldKind::EuclideanPlane => 2,
            _ => 3,
        }
    }

    /// Total volume, `None` when infinite.
    pub fn volume(&self) -> Option<f64> {
        match self.kind {
            ManifoldKind::FlatTorus3 { periods } => Some(periods.iter().product()),
            _ => None,
        }
    }

    pub fn is_flat(&self) -> bool {
        !matches!(self.kind, ManifoldKind::HyperbolicSpace3 { .. })
    }

    /// True for the flat spaces where the resolvent has a closed form in the
    /// distance alone.
    pub fn is_euclidean(&self) -> bool {
        matches!(
            self.kind,
            ManifoldKind::EuclideanPlane | ManifoldKind::EuclideanSpace3
        )
    }

    pub fn validate_point(&self, p: &Point) -> Result<(), GeometryError> {
        let c = p.0;
        if c.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidPoint {
                point: c,
                reason: "non-finite coordinate".into(),
            });
        }
        match self.kind {
            ManifoldKind::EuclideanPlane if c[2] != 0.0 => Err(GeometryError::InvalidPoint {
                point: c,
                reason: "planar points must have zero third coordinate".into(),
            }),
            ManifoldKind::HyperbolicSpace3 { .. } if c[2] <= 0.0 => {
                Err(GeometryError::InvalidPoint {
                    point: c,
                    reason: "upper half-space points need z > 0".into(),
                })
            }
            _ => Ok(()),
        }
    }

    /// Reduce to the fundamental domain (identity except on the torus).
    pub fn reduce(&self, p: &Point) -> Result<Point, GeometryError> {
        self.validate_point(p)?;
        Ok(match self.kind {
            ManifoldKind::FlatTorus3 { periods } => {
                let mut c = p.0;
                for k in 0..3 {
                    c[k] = c[k].rem_euclid(periods[k]);
                }
                Point(c)
            }
            _ => *p,
        })
    }

    /// Logarithm of the conformal factor `φ` (metric `e^{2φ} δ`) and its gradient.
    pub(crate) fn conformal_log(&self, c: &[f64; 3]) -> (f64, [f64; 3]) {
        match self.kind {
            ManifoldKind::HyperbolicSpace3 { curvature_scale } => (
                (curvature_scale / c[2]).ln(),
                [0.0, 0.0, -1.0 / c[2]],
            ),
            _ => (0.0, [0.0; 3]),
        }
    }

    /// Geodesic distance between chart points without validation.
    pub(crate) fn distance_unchecked(&self, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        match self.kind {
            ManifoldKind::EuclideanPlane | ManifoldKind::EuclideanSpace3 => norm(sub(a, b)),
            ManifoldKind::FlatTorus3 { periods } => norm(torus::min_image(sub(a, b), &periods)),
            ManifoldKind::HyperbolicSpace3 { curvature_scale } => {
                curvature_scale * hyperbolic_chart_distance(a, b)
            }
        }
    }

    pub fn geodesic_distance(&self, x: &Point, y: &Point) -> Result<f64, GeometryError> {
        self.validate_point(x)?;
        self.validate_point(y)?;
        Ok(self.distance_unchecked(&x.0, &y.0))
    }

    fn check_pair(&self, x: &Point, y: &Point) -> Result<(), GeometryError> {
        self.validate_point(x)?;
        self.validate_point(y)
    }

    fn positive(name: &str, v: f64) -> Result<(), GeometryError> {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(GeometryError::Domain(format!(
                "{name} must be positive and finite, got {v}"
            )))
        }
    }

    /// Heat kernel `K_t(x, y)` of `-Δ_g`.
    pub fn heat_kernel(&self, t: f64, x: &Point, y: &Point) -> Result<f64, GeometryError> {
        Self::positive("t", t)?;
        self.check_pair(x, y)?;
        Ok(self.heat_unchecked(t, &x.0, &y.0))
    }

    pub(crate) fn heat_unchecked(&self, t: f64, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        match self.kind {
            ManifoldKind::EuclideanPlane => heat2(t, norm(sub(a, b))),
            ManifoldKind::EuclideanSpace3 => heat3(t, norm(sub(a, b))),
            ManifoldKind::FlatTorus3 { periods } => {
                torus::heat(t, sub(a, b), &periods, self.images.rel_tol)
            }
            ManifoldKind::HyperbolicSpace3 { curvature_scale } => {
                hyperbolic::heat(t, self.distance_unchecked(a, b), curvature_scale)
            }
        }
    }

    /// Resolvent kernel `G_κ(x, y) = ∫₀^∞ e^{-κ²t} K_t dt`, `E = -κ²`.
    pub fn resolvent_kernel(&self, kappa: f64, x: &Point, y: &Point) -> Result<f64, GeometryError> {
        Self::positive("kappa", kappa)?;
        self.check_pair(x, y)?;
        self.green(kappa, &x.0, &y.0)
    }

    pub(crate) fn green(&self, kappa: f64, a: &[f64; 3], b: &[f64; 3]) -> Result<f64, GeometryError> {
        let v = match self.kind {
            ManifoldKind::EuclideanPlane => {
                let r = norm(sub(a, b));
                if r == 0.0 {
                    return Err(GeometryError::Coincident);
                }
                green2(kappa, r)
            }
            ManifoldKind::EuclideanSpace3 => {
                let r = norm(sub(a, b));
                if r == 0.0 {
                    return Err(GeometryError::Coincident);
                }
                green3(kappa, r)
            }
            ManifoldKind::FlatTorus3 { periods } => {
                let d = torus::min_image(sub(a, b), &periods);
                if norm(d) == 0.0 {
                    return Err(GeometryError::Coincident);
                }
                if torus::shells_suffice(kappa, &periods, self.images) {
                    torus::image_sum(d, &periods, self.images, |r| green3(kappa, r))?
                } else {
                    self.torus_time_integral(d, &periods, 0.0, kappa * kappa, false, |t| {
                        (-kappa * kappa * t).exp()
                    })
                }
            }
            ManifoldKind::HyperbolicSpace3 { curvature_scale } => {
                let r = self.distance_unchecked(a, b);
                if r == 0.0 {
                    return Err(GeometryError::Coincident);
                }
                hyperbolic::green(kappa, r, curvature_scale, self.time_step)
            }
        };
        Ok(v)
    }

    /// `G_ν − G_κ`, finite at coincident points in three dimensions.
    pub fn resolvent_difference(
        &self,
        nu: f64,
        kappa: f64,
        x: &Point,
        y: &Point,
    ) -> Result<f64, GeometryError> {
        Self::positive("nu", nu)?;
        Self::positive("kappa", kappa)?;
        self.check_pair(x, y)?;
        self.green_difference(nu, kappa, &x.0, &y.0)
    }

    pub(crate) fn green_difference(
        &self,
        nu: f64,
        kappa: f64,
        a: &[f64; 3],
        b: &[f64; 3],
    ) -> Result<f64, GeometryError> {
        Ok(match self.kind {
            ManifoldKind::EuclideanPlane => {
                let r = norm(sub(a, b));
                euclidean::green2_difference(nu, kappa, r)
            }
            ManifoldKind::EuclideanSpace3 => green3_difference(nu, kappa, norm(sub(a, b))),
            ManifoldKind::FlatTorus3 { periods } => {
                let d = torus::min_image(sub(a, b), &periods);
                if torus::shells_suffice(nu.min(kappa), &periods, self.images) {
                    torus::image_sum(d, &periods, self.images, |r| green3_difference(nu, kappa, r))?
                } else {
                    let dk = kappa * kappa - nu * nu;
                    self.torus_time_integral(d, &periods, 0.0, nu.min(kappa).powi(2), true, |t| {
                        -(-nu * nu * t).exp() * (-dk * t).exp_m1()
                    })
                }
            }
            ManifoldKind::HyperbolicSpace3 { curvature_scale } => hyperbolic::green_difference(
                nu,
                kappa,
                self.distance_unchecked(a, b),
                curvature_scale,
                self.time_step,
            ),
        })
    }

    /// `∂G/∂E = ∫₀^∞ t e^{-κ²t} K_t dt`.
    pub fn resolvent_energy_derivative(
        &self,
        kappa: f64,
        x: &Point,
        y: &Point,
    ) -> Result<f64, GeometryError> {
        Self::positive("kappa", kappa)?;
        self.check_pair(x, y)?;
        self.green_energy_derivative(kappa, &x.0, &y.0)
    }

    pub(crate) fn green_energy_derivative(
        &self,
        kappa: f64,
        a: &[f64; 3],
        b: &[f64; 3],
    ) -> Result<f64, GeometryError> {
        Ok(match self.kind {
            ManifoldKind::EuclideanPlane => green2_energy_derivative(kappa, norm(sub(a, b))),
            ManifoldKind::EuclideanSpace3 => green3_energy_derivative(kappa, norm(sub(a, b))),
            ManifoldKind::FlatTorus3 { periods } => {
                let d = torus::min_image(sub(a, b), &periods);
                if torus::shells_suffice(kappa, &periods, self.images) {
                    torus::image_sum(d, &periods, self.images, |r| {
                        green3_energy_derivative(kappa, r)
                    })?
                } else {
                    self.torus_time_integral(d, &periods, 0.0, kappa * kappa, true, |t| {
                        t * (-kappa * kappa * t).exp()
                    })
                }
            }
            ManifoldKind::HyperbolicSpace3 { curvature_scale } => hyperbolic::green_energy_derivative(
                kappa,
                self.distance_unchecked(a, b),
                curvature_scale,
                self.time_step,
            ),
        })
    }

    /// `∫_ε^∞ e^{-a t} K_t dt`, finite at coincident points for `ε > 0`.
    pub fn truncated_resolvent(
        &self,
        a: f64,
        epsilon: f64,
        x: &Point,
        y: &Point,
    ) -> Result<f64, GeometryError> {
        Self::positive("a", a)?;
        Self::positive("epsilon", epsilon)?;
        self.check_pair(x, y)?;
        self.truncated_green(a, epsilon, &x.0, &y.0)
    }

    pub(crate) fn truncated_green(
        &self,
        rate: f64,
        epsilon: f64,
        a: &[f64; 3],
        b: &[f64; 3],
    ) -> Result<f64, GeometryError> {
        Ok(match self.kind {
            ManifoldKind::EuclideanPlane => euclidean::truncated_green2(
                rate,
                epsilon,
                norm(sub(a, b)),
                self.time_step,
            ),
            ManifoldKind::EuclideanSpace3 => truncated_green3(rate, epsilon, norm(sub(a, b))),
            ManifoldKind::FlatTorus3 { periods } => {
                let d = torus::min_image(sub(a, b), &periods);
                if torus::shells_suffice(rate.sqrt(), &periods, self.images) {
                    torus::image_sum(d, &periods, self.images, |r| {
                        truncated_green3(rate, epsilon, r)
                    })?
                } else {
                    self.torus_time_integral(d, &periods, epsilon, rate, true, |t| {
                        (-rate * t).exp()
                    })
                }
            }
            ManifoldKind::HyperbolicSpace3 { curvature_scale } => hyperbolic::truncated_green(
                rate,
                epsilon,
                self.distance_unchecked(a, b),
                curvature_scale,
                self.time_step,
            ),
        })
    }

    /// `∫_ε^∞ t e^{-a t} K_t dt`: energy derivative of the truncated kernel.
    pub(crate) fn truncated_green_energy_derivative(
        &self,
        rate: f64,
        epsilon: f64,
        a: &[f64; 3],
        b: &[f64; 3],
    ) -> Result<f64, GeometryError> {
        let step = self.time_step;
        let u_hi = (60.0 / rate).ln();
        let integral = |heat: &dyn Fn(f64) -> f64| {
            crate::quadrature::log_time_integral(epsilon, epsilon.ln() - 40.0, u_hi, step, |t| {
                t * (-rate * t).exp() * heat(t)
            })
        };
        Ok(integral(&|t| self.heat_unchecked(t, a, b)))
    }

    #[allow(clippy::too_many_arguments)]
    fn torus_time_integral<W: Fn(f64) -> f64>(
        &self,
        d: [f64; 3],
        periods: &[f64; 3],
        lower: f64,
        rate: f64,
        integrable_at_zero: bool,
        w: W,
    ) -> f64 {
        torus::time_integral(
            d,
            periods,
            self.images.rel_tol,
            lower,
            rate,
            integrable_at_zero,
            self.time_step,
            w,
        )
    }
}

impl<'de> Deserialize<'de> for Manifold {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let kind = ManifoldKind::deserialize(de)?;
        Manifold::new(kind).map_err(serde::de::Error::custom)
    }
}

#[inline]
pub(crate) fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[inline]
pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn scale(v: &[f64; 3], s: f64) -> [f64; 3] {
    [v[0] * s, v[1] * s, v[2] * s]
}

#[inline]
pub(crate) fn add(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
