//! Image part of the circle counterterm in the RG-subtracted scheme.

use std::f64::consts::PI;

use serde::Serialize;

use super::OperatorError;
use crate::quadrature::GaussRule;

/// `∫_{−L/2}^{L/2} dξ Σ_{n≠0} G_μ(|ξ + nL|)` with its truncation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RgImageTerm {
    pub value: f64,
    pub images: usize,
    pub tail_bound: f64,
}

const MAX_IMAGES: usize = 50_000_000;

/// Sum the images cell by cell: cell `n ≥ 1` covers `[(n−½)L, (n+½)L]` and
/// appears twice (`±n`).
pub fn rg_image_term(mu: f64, length: f64, rule: &GaussRule) -> Result<RgImageTerm, OperatorError> {
    let g = |x: f64| (-mu * x).exp() / (4.0 * PI * x);
    let mut total = 0.0;
    for n in 1..=MAX_IMAGES {
        let a = (n as f64 - 0.5) * length;
        let b = a + length;
        // split the first cell, where 1/x varies fastest
        let cell = if n == 1 {
            let m = a * 2.0f64.sqrt();
            rule.integrate(a, m, g) + rule.integrate(m, b, g)
        } else {
            rule.integrate(a, b, g)
        };
        total += 2.0 * cell;
        // ∫_b^∞ e^{−μx}/(4πx) ≤ e^{−μb}/(4πμb), counted twice
        let tail = (-mu * b).exp() / (2.0 * PI * mu * b);
        if tail < 1e-17 * total {
            return Ok(RgImageTerm {
                value: total,
                images: n,
                tail_bound: tail,
            });
        }
    }
    Err(OperatorError::Unsupported(format!(
        "image sum for μL = {} did not converge within {MAX_IMAGES} cells",
        mu * length
    )))
}
