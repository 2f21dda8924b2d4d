//! Renormalization-group flow of the RG-subtracted coupling of a single
//! curve in flat three-space.
//!
//! With `g = 1/λ_R`, scale independence of `Φ_R` gives
//! `μ dλ_R/dμ = β(λ_R) = −λ_R² C / (2π L)`, hence
//! `1/λ_R(τμ) = 1/λ_R(μ) + (C / 2πL) ln τ`.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::config::QuadratureConfig;
use crate::curves::Curve;
use crate::geometry::ManifoldKind;
use crate::operator::{phi_rg_subtracted, OperatorError};
use crate::quadrature::log_time_integral;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("coupling flow is singular at τ = {tau_pole:e}")]
    Pole { tau_pole: f64 },
    #[error("invalid flow input: {0}")]
    Domain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// The flow constant `C` with a quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowConstant {
    pub value: f64,
    pub error: f64,
}

/// `C = (L/L_μ) ∬ dθ dθ′ ∫₀^∞ dt e^{−t} K_t^{S¹}(θ − θ′)` on the circle of
/// circumference `L_μ = μL` (the length in the metric `μ²g`), with the
/// `S¹` kernel in image-sum form.
pub fn flow_constant(length: f64, mu: f64) -> Result<FlowConstant, FlowError> {
    if !(length.is_finite() && length > 0.0 && mu.is_finite() && mu > 0.0) {
        return Err(FlowError::Domain(format!(
            "length and scale must be positive, got L={length}, μ={mu}"
        )));
    }
    let value = flow_integral(length, mu, 0.1);
    let coarse = flow_integral(length, mu, 0.2);
    Ok(FlowConstant {
        value,
        error: (value - coarse).abs(),
    })
}

/// `∫ K_t^{S¹}(ξ) dξ` over one period: each image contributes an erf
/// difference.
fn period_integral(lm: f64, t: f64) -> f64 {
    let w = (4.0 * t).sqrt();
    let reach = (12.0 * w / lm).ceil() as i64 + 1;
    (-reach..=reach)
        .map(|n| {
            let a = (n as f64 - 0.5) * lm / w;
            let b = (n as f64 + 0.5) * lm / w;
            0.5 * (erf(b) - erf(a))
        })
        .sum()
}

fn erf(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 - crate::special::erfc(x)
    } else {
        crate::special::erfc(-x) - 1.0
    }
}

fn flow_integral(length: f64, mu: f64, step: f64) -> f64 {
    let lm = mu * length;
    // (1/L_μ) ∬ = ∫ over one period for a fixed base point
    let per_base = log_time_integral(0.0, -30.0, (60.0f64).ln(), step, |t| {
        (-t).exp() * period_integral(lm, t)
    });
    length * per_base
}

/// `β(λ) = −λ² C / (2πL)`.
pub fn beta_function(lambda: f64, c: f64, length: f64) -> f64 {
    -lambda * lambda * c / (2.0 * PI * length)
}

/// Coupling data at reference scale `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RgState {
    /// `1/λ_R(μ)`; zero for infinite coupling.
    pub inverse_coupling: f64,
    pub mu: f64,
    pub length: f64,
    pub c: f64,
}

impl RgState {
    /// State for a curve of the given length; `C` is computed numerically.
    pub fn new(inverse_coupling: f64, mu: f64, length: f64) -> Result<Self, FlowError> {
        if !inverse_coupling.is_finite() {
            return Err(FlowError::Domain("inverse coupling must be finite".into()));
        }
        let c = flow_constant(length, mu)?.value;
        Ok(Self {
            inverse_coupling,
            mu,
            length,
            c,
        })
    }

    pub fn lambda(&self) -> f64 {
        1.0 / self.inverse_coupling
    }

    pub fn beta(&self) -> f64 {
        beta_function(self.lambda(), self.c, self.length)
    }

    /// `1/λ_R(τμ)`; always finite.
    pub fn flowed_inverse(&self, tau: f64) -> Result<f64, FlowError> {
        check_tau(tau)?;
        Ok(self.inverse_coupling + self.c / (2.0 * PI * self.length) * tau.ln())
    }

    /// State re-expressed at scale `τμ`.
    pub fn at_scale(&self, tau: f64) -> Result<Self, FlowError> {
        Ok(Self {
            inverse_coupling: self.flowed_inverse(tau)?,
            mu: self.mu * tau,
            ..*self
        })
    }

    /// `τ` where `λ_R(τμ)` diverges.
    pub fn pole(&self) -> f64 {
        (-2.0 * PI * self.length * self.inverse_coupling / self.c).exp()
    }
}

fn check_tau(tau: f64) -> Result<(), FlowError> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(FlowError::Domain(format!("τ must be positive, got {tau}")))
    }
}

/// `λ_R(τμ) = λ_R(μ) / (1 + λ_R(μ) C ln τ / (2πL))`.
pub fn flow_coupling(state: &RgState, tau: f64) -> Result<f64, FlowError> {
    check_tau(tau)?;
    let lambda = state.lambda();
    if !lambda.is_finite() {
        return Ok(1.0 / state.flowed_inverse(tau)?);
    }
    let den = 1.0 + lambda * state.c / (2.0 * PI * state.length) * tau.ln();
    let pole = state.pole();
    let crosses = (tau - pole) * (1.0 - pole) <= 0.0;
    if den == 0.0 || crosses {
        return Err(FlowError::Pole { tau_pole: pole });
    }
    Ok(lambda / den)
}

/// `λ_R(τμ)` by classical RK4 in `ln τ` on `μ dλ/dμ = β(λ)`.
pub fn flow_coupling_ode(state: &RgState, tau: f64, steps: usize) -> Result<f64, FlowError> {
    check_tau(tau)?;
    if steps == 0 {
        return Err(FlowError::Domain("steps must be positive".into()));
    }
    let pole = state.pole();
    if state.lambda().is_finite() && (tau - pole) * (1.0 - pole) <= 0.0 {
        return Err(FlowError::Pole { tau_pole: pole });
    }
    let f = |l: f64| beta_function(l, state.c, state.length);
    let h = tau.ln() / steps as f64;
    let mut l = state.lambda();
    for _ in 0..steps {
        let k1 = f(l);
        let k2 = f(l + 0.5 * h * k1);
        let k3 = f(l + 0.5 * h * k2);
        let k4 = f(l + h * k3);
        l += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Ok(l)
}

/// Both sides of the scaling law
/// `Φ_R(μ, λ_R(μ), τ²E, τ⁻²g) = Φ_R(μ, λ_R(μτ), E, g)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingReport {
    pub tau: f64,
    pub energy: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub discrepancy: f64,
}

fn require_flat(curve: &Curve) -> Result<(), FlowError> {
    if curve.manifold().kind() != ManifoldKind::EuclideanSpace3 {
        return Err(FlowError::Unsupported(
            "the RG scheme is only available in flat three-space".into(),
        ));
    }
    Ok(())
}

/// The metric scaling `g → τ⁻²g` is realized as the coordinate scaling
/// `x → x/τ` of the curve.
pub fn scaling_law_check(
    curve: &Curve,
    state: &RgState,
    energy: f64,
    tau: f64,
    config: &QuadratureConfig,
) -> Result<ScalingReport, FlowError> {
    require_flat(curve)?;
    check_tau(tau)?;
    let scaled = if tau == 1.0 {
        curve.clone()
    } else {
        Curve::build_with(
            &curve.spec().scaled(1.0 / tau),
            curve.manifold(),
            curve.node_count(),
            config.execution,
        )
        .map_err(|e| FlowError::Domain(e.to_string()))?
    };
    let lhs = phi_rg_subtracted(&scaled, state.inverse_coupling, state.mu, tau * tau * energy, config)?;
    let rhs = phi_rg_subtracted(curve, state.flowed_inverse(tau)?, state.mu, energy, config)?;
    Ok(ScalingReport {
        tau,
        energy,
        lhs,
        rhs,
        discrepancy: (lhs - rhs).abs(),
    })
}

/// `Φ_R(μ′, λ_R(μ′), E) − Φ_R(μ, λ_R(μ), E)` with `μ′ = (1 + rel)μ`.
pub fn mu_invariance(
    curve: &Curve,
    state: &RgState,
    energy: f64,
    rel: f64,
    config: &QuadratureConfig,
) -> Result<f64, FlowError> {
    require_flat(curve)?;
    let moved = state.at_scale(1.0 + rel)?;
    let a = phi_rg_subtracted(curve, state.inverse_coupling, state.mu, energy, config)?;
    let b = phi_rg_subtracted(curve, moved.inverse_coupling, moved.mu, energy, config)?;
    Ok(b - a)
}
