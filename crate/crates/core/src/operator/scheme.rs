use serde::{Deserialize, Serialize};

use super::OperatorError;
use crate::geometry::{Manifold, ManifoldKind};

/// Renormalization scheme of the whole system. Couplings are indexed by curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scheme {
    /// Lower heat-kernel time cutoff `ε` with bare inverse couplings `1/λᵢ(ε)`.
    Regularized {
        epsilon: f64,
        inverse_couplings: Vec<f64>,
    },
    /// On-shell scheme in three dimensions: curve `i` alone binds at `-νᵢ²`.
    #[serde(rename = "bound_state_3d")]
    BoundState3D { binding_wavenumbers: Vec<f64> },
    /// Heat-kernel counterterm subtraction at scale `μ` (single curve, ℝ³).
    RgSubtracted { inverse_coupling: f64, scale: f64 },
    /// Two-dimensional theory with finite couplings `λᵢ`.
    #[serde(rename = "finite_2d")]
    Finite2D { couplings: Vec<f64> },
}

impl Scheme {
    pub fn bound_state_3d(binding_wavenumbers: Vec<f64>) -> Self {
        Scheme::BoundState3D {
            binding_wavenumbers,
        }
    }

    pub fn finite_2d(couplings: Vec<f64>) -> Self {
        Scheme::Finite2D { couplings }
    }

    pub fn rg_subtracted(inverse_coupling: f64, scale: f64) -> Self {
        Scheme::RgSubtracted {
            inverse_coupling,
            scale,
        }
    }

    pub fn regularized(epsilon: f64, inverse_couplings: Vec<f64>) -> Self {
        Scheme::Regularized {
            epsilon,
            inverse_couplings,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Regularized { .. } => "regularized",
            Scheme::BoundState3D { .. } => "bound_state_3d",
            Scheme::RgSubtracted { .. } => "rg_subtracted",
            Scheme::Finite2D { .. } => "finite_2d",
        }
    }

    /// Energies `E` must satisfy `E < energy_limit()`.
    pub fn energy_limit(&self) -> f64 {
        0.0
    }

    pub fn validate(&self, manifold: &Manifold, curves: usize) -> Result<(), OperatorError> {
        let err = |m: String| Err(OperatorError::Scheme(m));
        let per_curve = |v: &[f64], what: &str| -> Result<(), OperatorError> {
            if v.len() != curves {
                return Err(OperatorError::Scheme(format!(
                    "{} {what} given for {curves} curves",
                    v.len()
                )));
            }
            Ok(())
        };
        match self {
            Scheme::BoundState3D {
                binding_wavenumbers,
            } => {
                if manifold.dimension() != 3 {
                    return err("bound_state_3d requires a three-dimensional manifold".into());
                }
                per_curve(binding_wavenumbers, "binding wavenumbers")?;
                if binding_wavenumbers.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return err(format!(
                        "binding wavenumbers must be positive, got {binding_wavenumbers:?}"
                    ));
                }
            }
            Scheme::Finite2D { couplings } => {
                if manifold.dimension() != 2 {
                    return err("finite_2d requires the Euclidean plane".into());
                }
                per_curve(couplings, "couplings")?;
                if couplings.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return err(format!("couplings must be positive, got {couplings:?}"));
                }
            }
            Scheme::RgSubtracted {
                inverse_coupling,
                scale,
            } => {
                if manifold.kind() != ManifoldKind::EuclideanSpace3 {
                    return Err(OperatorError::Unsupported(
                        "rg_subtracted is only available in flat three-space".into(),
                    ));
                }
                if curves != 1 {
                    return Err(OperatorError::Unsupported(format!(
                        "rg_subtracted works with a single curve, got {curves}"
                    )));
                }
                if !inverse_coupling.is_finite() || !(scale.is_finite() && *scale > 0.0) {
                    return err(format!(
                        "rg_subtracted needs finite 1/λ and positive μ, got {inverse_coupling}, {scale}"
                    ));
                }
            }
            Scheme::Regularized {
                epsilon,
                inverse_couplings,
            } => {
                if !(epsilon.is_finite() && *epsilon > 0.0) {
                    return err(format!("epsilon must be positive, got {epsilon}"));
                }
                per_curve(inverse_couplings, "inverse couplings")?;
                if inverse_couplings.iter().any(|v| !v.is_finite()) {
                    return err("inverse couplings must be finite".into());
                }
            }
        }
        Ok(())
    }
}
