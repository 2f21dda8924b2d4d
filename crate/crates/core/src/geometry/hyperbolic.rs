//! Kernels on hyperbolic 3-space with curvature `-1/R²`.
//!
//! Points use upper half-space coordinates scaled to unit curvature; the
//! physical distance is `R` times the unit-curvature distance.

use std::f64::consts::PI;

use super::euclidean::heat3;
use crate::quadrature::log_time_integral;
use crate::special::rho_over_sinh;

/// Unit-curvature distance `2 asinh(|x−y| / 2√(z₁z₂))`.
pub fn hyperbolic_chart_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    let e = (dx * dx + dy * dy + dz * dz).sqrt();
    2.0 * (e / (2.0 * (a[2] * b[2]).sqrt())).asinh()
}

pub(crate) fn heat(t: f64, r: f64, scale: f64) -> f64 {
    heat3(t, r) * rho_over_sinh(r / scale) * (-t / (scale * scale)).exp()
}

/// Closed-form resolvent `e^{-√(κ² + R⁻²) r} / (4π R sinh(r/R))`.
pub fn hyperbolic_green_closed_form(kappa: f64, r: f64, scale: f64) -> f64 {
    let k = (kappa * kappa + 1.0 / (scale * scale)).sqrt();
    (-k * r).exp() / (4.0 * PI * scale * (r / scale).sinh())
}

/// Window `[u_lo, u_hi]` in `u = ln t` outside of which the integrand of
/// a time integral with decay `rate` at separation `r` is negligible.
fn window(rate: f64, r: f64, integrable_at_zero: bool) -> (f64, f64) {
    let u_hi = (60.0 / rate).ln();
    let u_lo = if r > 0.0 {
        let lo = (r * r / 240.0).ln();
        if integrable_at_zero {
            lo.max(u_hi - 90.0)
        } else {
            lo
        }
    } else {
        u_hi - 90.0
    };
    (u_lo, u_hi)
}

pub(crate) fn green(kappa: f64, r: f64, scale: f64, step: f64) -> f64 {
    let rate = kappa * kappa + 1.0 / (scale * scale);
    let (lo, hi) = window(rate, r, false);
    log_time_integral(0.0, lo, hi, step, |t| (-kappa * kappa * t).exp() * heat(t, r, scale))
}

pub(crate) fn green_difference(nu: f64, kappa: f64, r: f64, scale: f64, step: f64) -> f64 {
    let rate = nu.min(kappa).powi(2) + 1.0 / (scale * scale);
    let (lo, hi) = window(rate, r, true);
    let d = kappa * kappa - nu * nu;
    log_time_integral(0.0, lo, hi, step, |t| {
        -(-nu * nu * t).exp() * (-d * t).exp_m1() * heat(t, r, scale)
    })
}

pub(crate) fn green_energy_derivative(kappa: f64, r: f64, scale: f64, step: f64) -> f64 {
    let rate = kappa * kappa + 1.0 / (scale * scale);
    let (lo, hi) = window(rate, r, true);
    log_time_integral(0.0, lo, hi, step, |t| {
        t * (-kappa * kappa * t).exp() * heat(t, r, scale)
    })
}

pub(crate) fn truncated_green(rate: f64, epsilon: f64, r: f64, scale: f64, step: f64) -> f64 {
    let u_hi = (60.0 / (rate + 1.0 / (scale * scale))).ln();
    log_time_integral(epsilon, epsilon.ln() - 40.0, u_hi, step, |t| {
        (-rate * t).exp() * heat(t, r, scale)
    })
}
