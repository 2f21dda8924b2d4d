//! The principal operator `Φ(E)` of a curve system and its energy derivative.
//!
//! Entries:
//!
//! * off-diagonal: `Φᵢⱼ = −(LᵢLⱼ)^{-1/2} ∬ ds ds′ G(γᵢ(s), γⱼ(s′))`;
//! * diagonal: a scheme-dependent constant plus `(1/Lᵢ) ∬ ds ds′ f(γᵢ(s), γᵢ(s′))`
//!   with an integrable (subtracted or cut-off) self-interaction density `f`.
//!
//! The outer integrals use the trapezoid rule on arclength nodes. The inner
//! self-interaction integral runs over the arclength offset `ξ ∈ (−L/2, L/2]`
//! with Gauss–Legendre panels graded geometrically towards `ξ = 0`.

mod rg;
mod scheme;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::config::QuadratureConfig;
use crate::curves::{Curve, CurveSystem};
use crate::geometry::{green3, GeometryError, Manifold};
use crate::par::{map_range, ordered_sum, try_map_range, Execution};
use crate::quadrature::{graded_half_rule, GaussRule};

pub use rg::{rg_image_term, RgImageTerm};
pub use scheme::Scheme;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("energy {0} outside the domain E < 0")]
    Domain(f64),
    #[error("scheme error: {0}")]
    Scheme(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("curve index {index} out of range for {len} curves")]
    Index { index: usize, len: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Per-evaluation numerical summary.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct QuadratureReport {
    pub outer_nodes: Vec<usize>,
    pub inner_nodes: usize,
    pub warnings: Vec<String>,
}

/// `Φ(E)` at one energy.
#[derive(Debug, Clone)]
pub struct PrincipalMatrix {
    pub energy: f64,
    pub values: DMatrix<f64>,
    pub report: QuadratureReport,
}

impl PrincipalMatrix {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// `max |Φᵢⱼ − Φⱼᵢ|`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.values[(i, j)] - self.values[(j, i)]).abs());
            }
        }
        worst
    }
}

/// Quadrature diagnostics for one entry: production value against a
/// coarser rule.
#[derive(Debug, Clone, Serialize)]
pub struct EntryDiagnostics {
    pub i: usize,
    pub j: usize,
    pub energy: f64,
    pub value: f64,
    pub coarse_value: f64,
    pub estimated_error: f64,
    pub outer_nodes: [usize; 2],
    pub inner_nodes: usize,
}

/// Precomputed inner-integral points for one curve.
#[derive(Debug, Clone)]
struct SelfStencil {
    rule: Vec<(f64, f64)>,
    bases: Vec<[f64; 3]>,
    /// Points `γ(s_b + ξ_k)` followed by `γ(s_b − ξ_k)` unless symmetric
    /// (empty when chords are stored instead).
    targets: Vec<Vec<[f64; 3]>>,
    symmetric: bool,
    /// Chord and chord deficit per target (flat, RG scheme only).
    chords: Option<Vec<Vec<(f64, f64)>>>,
}

impl SelfStencil {
    fn new(
        curve: &Curve,
        manifold: &Manifold,
        config: &QuadratureConfig,
        gauss: &GaussRule,
        stride: usize,
        with_chords: bool,
    ) -> Self {
        let length = curve.length();
        let half = 0.5 * length;
        let rule = graded_half_rule(
            gauss,
            half,
            config.uniform_panels,
            config.grading_ratio,
            config.relative_floor * half,
        );
        let symmetric = curve.is_homogeneous()
            && !matches!(manifold.kind(), crate::geometry::ManifoldKind::FlatTorus3 { .. });
        let h = curve.node_spacing();
        let base_s: Vec<f64> = if symmetric {
            vec![0.0]
        } else {
            (0..curve.node_count())
                .step_by(stride)
                .map(|k| k as f64 * h)
                .collect()
        };
        let exec = config.execution;
        let targets = map_range(exec, if with_chords { 0 } else { base_s.len() }, |b| {
            let s = base_s[b];
            let mut out: Vec<[f64; 3]> = rule.iter().map(|&(x, _)| curve.raw_point(s + x)).collect();
            if !symmetric {
                out.extend(rule.iter().map(|&(x, _)| curve.raw_point(s - x)));
            }
            out
        });
        let chords = with_chords.then(|| {
            map_range(exec, base_s.len(), |b| {
                let s = base_s[b];
                let k = Some(curve.frame_at(s).1);
                let mut out: Vec<(f64, f64)> =
                    rule.iter().map(|&(x, _)| curve.chord_and_deficit_with(s, x, k)).collect();
                if !symmetric {
                    out.extend(rule.iter().map(|&(x, _)| curve.chord_and_deficit_with(s, -x, k)));
                }
                out
            })
        });
        let bases = base_s.iter().map(|&s| curve.raw_point(s)).collect();
        Self {
            rule,
            bases,
            targets,
            symmetric,
            chords,
        }
    }

    /// `(1/n_b) Σ_b ∫_{−L/2}^{L/2} f(b, k) dξ` where `f` receives the base
    /// index and target index.
    fn integrate<F>(&self, exec: Execution, f: F) -> Result<f64, GeometryError>
    where
        F: Fn(usize, usize) -> Result<f64, GeometryError> + Sync + Send,
    {
        let m = self.rule.len();
        let per_base = try_map_range(exec, self.bases.len(), |b| {
            let mut acc = 0.0;
            for (k, &(_, w)) in self.rule.iter().enumerate() {
                let v = if self.symmetric {
                    2.0 * f(b, k)?
                } else {
                    f(b, k)? + f(b, k + m)?
                };
                acc += w * v;
            }
            Ok(acc)
        })?;
        Ok(ordered_sum(&per_base) / self.bases.len() as f64)
    }

    fn xi(&self, k: usize) -> f64 {
        self.rule[k % self.rule.len()].0
    }
}

/// Assembles `Φ(E)` and `∂Φ/∂E` for a curve system.
#[derive(Debug, Clone)]
pub struct PrincipalOperator<'a> {
    system: &'a CurveSystem,
    config: QuadratureConfig,
    stencils: Vec<SelfStencil>,
    outer_stride: usize,
    rg_image: Option<RgImageTerm>,
}

#[derive(Clone, Copy)]
enum Quantity {
    Value,
    Derivative,
}

impl<'a> PrincipalOperator<'a> {
    pub fn new(system: &'a CurveSystem, config: &QuadratureConfig) -> Result<Self, OperatorError> {
        Self::with_stride(system, config, 1)
    }

    fn with_stride(
        system: &'a CurveSystem,
        config: &QuadratureConfig,
        stride: usize,
    ) -> Result<Self, OperatorError> {
        let gauss = GaussRule::new(config.gauss_order);
        let rg = matches!(system.scheme(), Scheme::RgSubtracted { .. });
        let stencils = system
            .curves()
            .iter()
            .map(|c| SelfStencil::new(c, system.manifold(), config, &gauss, stride, rg))
            .collect();
        let rg_image = match system.scheme() {
            Scheme::RgSubtracted { scale, .. } => {
                Some(rg_image_term(*scale, system.curves()[0].length(), &gauss)?)
            }
            _ => None,
        };
        Ok(Self {
            system,
            config: config.clone(),
            stencils,
            outer_stride: stride,
            rg_image,
        })
    }

    pub fn system(&self) -> &CurveSystem {
        self.system
    }

    pub fn config(&self) -> &QuadratureConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.system.len()
    }

    pub fn is_empty(&self) -> bool {
        self.system.is_empty()
    }

    /// Number of inner quadrature points per base point of curve `i`.
    pub fn inner_nodes(&self, i: usize) -> usize {
        self.stencils[i].rule.len()
    }

    fn check_energy(&self, energy: f64) -> Result<(), OperatorError> {
        if energy.is_finite() && energy < self.system.scheme().energy_limit() {
            Ok(())
        } else {
            Err(OperatorError::Domain(energy))
        }
    }

    fn check_index(&self, i: usize) -> Result<(), OperatorError> {
        if i < self.len() {
            Ok(())
        } else {
            Err(OperatorError::Index {
                index: i,
                len: self.len(),
            })
        }
    }

    /// `Φ(E)`.
    pub fn matrix(&self, energy: f64) -> Result<PrincipalMatrix, OperatorError> {
        let values = self.assemble(energy, Quantity::Value)?;
        Ok(PrincipalMatrix {
            energy,
            values,
            report: self.report(),
        })
    }

    /// `∂Φ/∂E`.
    pub fn derivative(&self, energy: f64) -> Result<DMatrix<f64>, OperatorError> {
        self.assemble(energy, Quantity::Derivative)
    }

    /// A single entry `Φᵢⱼ(E)`.
    pub fn entry(&self, i: usize, j: usize, energy: f64) -> Result<f64, OperatorError> {
        self.check_energy(energy)?;
        self.check_index(i)?;
        self.check_index(j)?;
        self.compute(i, j, energy, Quantity::Value)
    }

    /// A single entry of `∂Φ/∂E`.
    pub fn derivative_entry(&self, i: usize, j: usize, energy: f64) -> Result<f64, OperatorError> {
        self.check_energy(energy)?;
        self.check_index(i)?;
        self.check_index(j)?;
        self.compute(i, j, energy, Quantity::Derivative)
    }

    /// Per-entry diagnostics comparing against half the outer nodes and a
    /// coarser inner rule.
    pub fn diagnostics(&self, energy: f64) -> Result<Vec<EntryDiagnostics>, OperatorError> {
        self.check_energy(energy)?;
        let coarse_cfg = self.config.coarsened();
        let coarse = Self::with_stride(self.system, &coarse_cfg, 2)?;
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i..n {
                let value = self.compute(i, j, energy, Quantity::Value)?;
                let coarse_value = coarse.compute(i, j, energy, Quantity::Value)?;
                out.push(EntryDiagnostics {
                    i,
                    j,
                    energy,
                    value,
                    coarse_value,
                    estimated_error: (value - coarse_value).abs(),
                    outer_nodes: [
                        self.system.curves()[i].node_count(),
                        self.system.curves()[j].node_count(),
                    ],
                    inner_nodes: if i == j { self.inner_nodes(i) } else { 0 },
                });
            }
        }
        Ok(out)
    }

    fn report(&self) -> QuadratureReport {
        let mut warnings = Vec::new();
        let curves = self.system.curves();
        if let Scheme::Regularized { epsilon, .. } = self.system.scheme() {
            for (i, c) in curves.iter().enumerate() {
                if *epsilon > 0.1 * c.length() * c.length() {
                    warnings.push(format!(
                        "epsilon {epsilon} exceeds 0.1 L² for curve {i}: regularization not asymptotic"
                    ));
                }
            }
        }
        let n = curves.len();
        for i in 0..n {
            for j in i + 1..n {
                let h = curves[i].node_spacing().max(curves[j].node_spacing());
                let d = self.system.distance(i, j);
                if d < 2.0 * h {
                    warnings.push(format!(
                        "curves {i} and {j} are {d:e} apart, below twice the node spacing {h:e}: off-diagonal accuracy degraded"
                    ));
                }
            }
        }
        QuadratureReport {
            outer_nodes: curves.iter().map(Curve::node_count).collect(),
            inner_nodes: self.stencils.iter().map(|s| s.rule.len()).max().unwrap_or(0),
            warnings,
        }
    }

    fn assemble(&self, energy: f64, q: Quantity) -> Result<DMatrix<f64>, OperatorError> {
        self.check_energy(energy)?;
        let n = self.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
        let values = try_map_range(self.config.execution, pairs.len(), |k| {
            let (i, j) = pairs[k];
            self.compute(i, j, energy, q)
        })?;
        let mut m = DMatrix::zeros(n, n);
        for (&(i, j), v) in pairs.iter().zip(values) {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        Ok(m)
    }

    fn compute(&self, i: usize, j: usize, energy: f64, q: Quantity) -> Result<f64, OperatorError> {
        if i == j {
            self.diagonal(i, energy, q)
        } else {
            self.off_diagonal(i, j, energy, q)
        }
    }

    fn off_diagonal(&self, i: usize, j: usize, energy: f64, q: Quantity) -> Result<f64, OperatorError> {
        let m = self.system.manifold();
        let kappa = (-energy).sqrt();
        let scheme = self.system.scheme();
        let kernel = |p: &[f64; 3], x: &[f64; 3]| -> Result<f64, GeometryError> {
            match (scheme, q) {
                (Scheme::Regularized { epsilon, .. }, Quantity::Value) => {
                    m.truncated_green(epsilon - energy, *epsilon, p, x)
                }
                (Scheme::Regularized { epsilon, .. }, Quantity::Derivative) => {
                    m.truncated_green_energy_derivative(epsilon - energy, *epsilon, p, x)
                }
                (_, Quantity::Value) => m.green(kappa, p, x),
                (_, Quantity::Derivative) => m.green_energy_derivative(kappa, p, x),
            }
        };
        let ci = &self.system.curves()[i];
        let cj = &self.system.curves()[j];
        let stride = self.outer_stride;
        let pi: Vec<[f64; 3]> = ci.nodes().iter().step_by(stride).cloned().collect();
        let pj: Vec<[f64; 3]> = cj.nodes().iter().step_by(stride).cloned().collect();
        let rows = try_map_range(self.config.execution, pi.len(), |a| {
            let mut acc = 0.0;
            for b in &pj {
                acc += kernel(&pi[a], b)?;
            }
            Ok::<f64, GeometryError>(acc)
        })?;
        let sum = ordered_sum(&rows);
        let (li, lj) = (ci.length(), cj.length());
        Ok(-(li * lj).sqrt() * sum / (pi.len() * pj.len()) as f64)
    }

    fn diagonal(&self, i: usize, energy: f64, q: Quantity) -> Result<f64, OperatorError> {
        let m = self.system.manifold();
        let st = &self.stencils[i];
        let exec = self.config.execution;
        let kappa = (-energy).sqrt();
        let point = |b: usize, k: usize| (&st.bases[b], &st.targets[b][k]);
        let value = match (self.system.scheme(), q) {
            (Scheme::BoundState3D { binding_wavenumbers }, Quantity::Value) => {
                let nu = binding_wavenumbers[i];
                st.integrate(exec, |b, k| {
                    let (p, x) = point(b, k);
                    m.green_difference(nu, kappa, p, x)
                })?
            }
            (Scheme::Finite2D { couplings }, Quantity::Value) => {
                let integral = st.integrate(exec, |b, k| {
                    let (p, x) = point(b, k);
                    green_regular(m, kappa, p, x, st.xi(k))
                })?;
                1.0 / couplings[i] - integral
            }
            (Scheme::Regularized { epsilon, inverse_couplings }, Quantity::Value) => {
                let integral = st.integrate(exec, |b, k| {
                    let (p, x) = point(b, k);
                    m.truncated_green(epsilon - energy, *epsilon, p, x)
                })?;
                inverse_couplings[i] - integral
            }
            (Scheme::Regularized { epsilon, .. }, Quantity::Derivative) => -st.integrate(exec, |b, k| {
                let (p, x) = point(b, k);
                m.truncated_green_energy_derivative(epsilon - energy, *epsilon, p, x)
            })?,
            (Scheme::RgSubtracted { inverse_coupling, scale }, Quantity::Value) => {
                let chords = st.chords.as_ref().expect("rg stencil has chords");
                let mu = *scale;
                let integral = st.integrate(exec, |b, k| {
                    let xi = st.xi(k);
                    let (r, deficit) = chords[b][k];
                    Ok(rg_density(mu, kappa, xi, r, deficit))
                })?;
                let image = self.rg_image.as_ref().expect("rg image term").value;
                inverse_coupling + image + integral
            }
            (Scheme::RgSubtracted { .. }, Quantity::Derivative) => {
                let chords = st.chords.as_ref().expect("rg stencil has chords");
                // ∂G_κ(r)/∂E = e^{−κr}/(8πκ)
                -st.integrate(exec, |b, k| Ok((-kappa * chords[b][k].0).exp() / (8.0 * PI * kappa)))?
            }
            (_, Quantity::Derivative) => -st.integrate(exec, |b, k| {
                let (p, x) = point(b, k);
                m.green_energy_derivative(kappa, p, x)
            })?,
        };
        Ok(value)
    }
}

/// `G_κ` with a fallback to the arclength offset when the chord rounds to zero.
fn green_regular(
    m: &Manifold,
    kappa: f64,
    p: &[f64; 3],
    x: &[f64; 3],
    xi: f64,
) -> Result<f64, GeometryError> {
    match m.green(kappa, p, x) {
        Err(GeometryError::Coincident) => {
            if m.dimension() == 2 {
                Ok(crate::geometry::green2(kappa, xi))
            } else {
                Ok(green3(kappa, xi))
            }
        }
        other => other,
    }
}

/// `G_μ(|ξ|) − G_κ(r)` in ℝ³ from the chord `r` and deficit `|ξ| − r`.
fn rg_density(mu: f64, kappa: f64, xi: f64, r: f64, deficit: f64) -> f64 {
    let ax = xi.abs();
    let ek = (-kappa * r).exp();
    // [e^{−μξ} − e^{−κr}]/ξ + e^{−κr}(1/ξ − 1/r)
    let a = ek * (kappa * r - mu * ax).exp_m1() / ax;
    let b = if r > 0.0 { -ek * deficit / (ax * r) } else { 0.0 };
    (a + b) / (4.0 * PI)
}

/// Bare inverse couplings `1/λᵢ(ε) = 1/λ_R + (1/Lᵢ) ∬ ∫_ε^∞ e^{−(μ²+ε)t} K_t`.
pub fn regularized_inverse_couplings(
    system: &CurveSystem,
    epsilon: f64,
    inverse_renormalized: f64,
    mu: f64,
    config: &QuadratureConfig,
) -> Result<Vec<f64>, OperatorError> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(OperatorError::Scheme(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(OperatorError::Scheme(format!("mu must be positive, got {mu}")));
    }
    let gauss = GaussRule::new(config.gauss_order);
    let m = system.manifold();
    system
        .curves()
        .iter()
        .map(|c| {
            let st = SelfStencil::new(c, m, config, &gauss, 1, false);
            let integral = st.integrate(config.execution, |b, k| {
                m.truncated_green(mu * mu + epsilon, epsilon, &st.bases[b], &st.targets[b][k])
            })?;
            Ok(inverse_renormalized + integral)
        })
        .collect()
}

fn operator_for<'a>(
    system: &'a CurveSystem,
    config: &QuadratureConfig,
) -> Result<PrincipalOperator<'a>, OperatorError> {
    PrincipalOperator::new(system, config)
}

/// `Φᵢⱼ(E)` for `i ≠ j`.
pub fn phi_offdiag(
    system: &CurveSystem,
    i: usize,
    j: usize,
    energy: f64,
    config: &QuadratureConfig,
) -> Result<f64, OperatorError> {
    if i == j {
        return Err(OperatorError::Scheme("phi_offdiag needs distinct curves".into()));
    }
    operator_for(system, config)?.entry(i, j, energy)
}

/// Diagonal entry in the on-shell scheme.
pub fn phi_diag_boundstate(
    system: &CurveSystem,
    i: usize,
    energy: f64,
    config: &QuadratureConfig,
) -> Result<f64, OperatorError> {
    if !matches!(system.scheme(), Scheme::BoundState3D { .. }) {
        return Err(OperatorError::Scheme("system is not in the bound_state_3d scheme".into()));
    }
    operator_for(system, config)?.entry(i, i, energy)
}

/// Full matrix in the regularized scheme.
pub fn phi_regularized(
    system: &CurveSystem,
    energy: f64,
    config: &QuadratureConfig,
) -> Result<PrincipalMatrix, OperatorError> {
    if !matches!(system.scheme(), Scheme::Regularized { .. }) {
        return Err(OperatorError::Scheme("system is not in the regularized scheme".into()));
    }
    operator_for(system, config)?.matrix(energy)
}

/// The RG-subtracted principal operator of a single flat-space curve.
pub fn phi_rg_subtracted(
    curve: &Curve,
    inverse_coupling: f64,
    mu: f64,
    energy: f64,
    config: &QuadratureConfig,
) -> Result<f64, OperatorError> {
    let system = CurveSystem::from_curves(
        curve.manifold().clone(),
        vec![curve.clone()],
        Scheme::rg_subtracted(inverse_coupling, mu),
        config.execution,
    )
    .map_err(|e| match e {
        crate::Error::Operator(o) => o,
        other => OperatorError::Unsupported(other.to_string()),
    })?;
    operator_for(&system, config)?.entry(0, 0, energy)
}

/// Full matrix of the two-dimensional theory.
pub fn phi_finite2d(
    system: &CurveSystem,
    energy: f64,
    config: &QuadratureConfig,
) -> Result<PrincipalMatrix, OperatorError> {
    if !matches!(system.scheme(), Scheme::Finite2D { .. }) {
        return Err(OperatorError::Scheme("system is not in the finite_2d scheme".into()));
    }
    operator_for(system, config)?.matrix(energy)
}

/// `∂Φ/∂E`.
pub fn phi_derivative(
    system: &CurveSystem,
    energy: f64,
    config: &QuadratureConfig,
) -> Result<DMatrix<f64>, OperatorError> {
    operator_for(system, config)?.derivative(energy)
}
