//! Closed-form kernels of `-Δ` on ℝ² and ℝ³ as functions of the distance.

use std::f64::consts::PI;

use crate::quadrature::log_time_integral;
use crate::special::{bessel_k0, erfcx, exp_integral_e1, x_bessel_k1};

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// `(4πt)^{-3/2} e^{-r²/4t}`.
pub fn heat3(t: f64, r: f64) -> f64 {
    (4.0 * PI * t).powf(-1.5) * (-r * r / (4.0 * t)).exp()
}

/// `(4πt)^{-1} e^{-r²/4t}`.
pub fn heat2(t: f64, r: f64) -> f64 {
    (-r * r / (4.0 * t)).exp() / (4.0 * PI * t)
}

/// `e^{-κr} / 4πr`.
pub fn green3(kappa: f64, r: f64) -> f64 {
    (-kappa * r).exp() / (4.0 * PI * r)
}

/// `K₀(κr) / 2π`.
pub fn green2(kappa: f64, r: f64) -> f64 {
    bessel_k0(kappa * r) / (2.0 * PI)
}

/// `G_ν − G_κ` in ℝ³; equals `(κ−ν)/4π` at `r = 0`.
pub fn green3_difference(nu: f64, kappa: f64, r: f64) -> f64 {
    if r == 0.0 {
        return (kappa - nu) / (4.0 * PI);
    }
    -(-nu * r).exp() * (-(kappa - nu) * r).exp_m1() / (4.0 * PI * r)
}

/// `G_ν − G_κ` in ℝ²; equals `ln(κ/ν)/2π` at `r = 0`.
pub(crate) fn green2_difference(nu: f64, kappa: f64, r: f64) -> f64 {
    if r == 0.0 {
        return (kappa / nu).ln() / (2.0 * PI);
    }
    (bessel_k0(nu * r) - bessel_k0(kappa * r)) / (2.0 * PI)
}

/// `∂G/∂E = e^{-κr} / 8πκ` in ℝ³.
pub fn green3_energy_derivative(kappa: f64, r: f64) -> f64 {
    (-kappa * r).exp() / (8.0 * PI * kappa)
}

/// `∂G/∂E = r K₁(κr) / 4πκ` in ℝ².
pub fn green2_energy_derivative(kappa: f64, r: f64) -> f64 {
    x_bessel_k1(kappa * r) / (4.0 * PI * kappa * kappa)
}

/// `∫_ε^∞ e^{-a t} (4πt)^{-3/2} e^{-r²/4t} dt` in closed form.
///
/// With `x = r/2√ε` and `y = √(aε)` the value is
/// `[e^{-2xy} erfc(y−x) − e^{2xy} erfc(x+y)] / 8πr`, written in terms of
/// `erfcx` so that nothing overflows. Small `x` uses a Taylor expansion in
/// which the factor `1/r` cancels.
pub fn truncated_green3(a: f64, epsilon: f64, r: f64) -> f64 {
    let se = epsilon.sqrt();
    let x = r / (2.0 * se);
    let y = (a * epsilon).sqrt();
    let pref = (-(x * x) - y * y).exp();
    if x < 0.05 {
        // erfcx(y−x) − erfcx(y+x) = −2 Σ_{odd n} w⁽ⁿ⁾(y) xⁿ / n!
        let mut w = [0.0f64; 10];
        w[0] = erfcx(y);
        w[1] = 2.0 * y * w[0] - FRAC_2_SQRT_PI;
        for n in 1..9 {
            w[n + 1] = 2.0 * y * w[n] + 2.0 * n as f64 * w[n - 1];
        }
        let x2 = x * x;
        let s = w[1]
            + x2 * (w[3] / 6.0 + x2 * (w[5] / 120.0 + x2 * (w[7] / 5040.0 + x2 * w[9] / 362_880.0)));
        return -pref * s / (8.0 * PI * se);
    }
    let t1 = if y >= x {
        pref * erfcx(y - x)
    } else {
        2.0 * (-2.0 * x * y).exp() - pref * erfcx(x - y)
    };
    let t2 = pref * erfcx(x + y);
    (t1 - t2) / (8.0 * PI * r)
}

/// `∫_ε^∞ e^{-a t} (4πt)^{-1} e^{-r²/4t} dt`.
pub(crate) fn truncated_green2(a: f64, epsilon: f64, r: f64, step: f64) -> f64 {
    if r == 0.0 {
        return exp_integral_e1(a * epsilon) / (4.0 * PI);
    }
    let u_hi = (60.0 / a).ln();
    log_time_integral(epsilon, epsilon.ln() - 40.0, u_hi, step, |t| {
        (-a * t).exp() * heat2(t, r)
    })
}
