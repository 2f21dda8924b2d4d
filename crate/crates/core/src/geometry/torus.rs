//! Lattice sums on the flat torus `ℝ³ / (ℓ₁ℤ × ℓ₂ℤ × ℓ₃ℤ)`.

use std::f64::consts::PI;

use super::{GeometryError, ImageSumOptions};
use crate::quadrature::log_time_integral;

/// Minimum-image displacement, each component in `[-ℓ/2, ℓ/2]`.
pub(crate) fn min_image(d: [f64; 3], periods: &[f64; 3]) -> [f64; 3] {
    let mut out = d;
    for k in 0..3 {
        out[k] = d[k] - periods[k] * (d[k] / periods[k]).round();
    }
    out
}

/// `Σ_{n ∈ ℤ³} f(|d + n∘ℓ|)` summed over cubic shells `max|nᵢ| = k`.
pub(crate) fn image_sum<F: Fn(f64) -> f64>(
    d: [f64; 3],
    periods: &[f64; 3],
    options: ImageSumOptions,
    f: F,
) -> Result<f64, GeometryError> {
    let eval = |n: [i64; 3]| {
        let v = [
            d[0] + n[0] as f64 * periods[0],
            d[1] + n[1] as f64 * periods[1],
            d[2] + n[2] as f64 * periods[2],
        ];
        f((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
    };
    let mut total = eval([0, 0, 0]);
    let mut total_abs = total.abs();
    let mut last = f64::INFINITY;
    for k in 1..=options.max_shells as i64 {
        let mut shell = 0.0;
        let mut shell_abs = 0.0;
        for i in -k..=k {
            for j in -k..=k {
                let on_face = i.abs() == k || j.abs() == k;
                if on_face {
                    for l in -k..=k {
                        let v = eval([i, j, l]);
                        shell += v;
                        shell_abs += v.abs();
                    }
                } else {
                    for l in [-k, k] {
                        let v = eval([i, j, l]);
                        shell += v;
                        shell_abs += v.abs();
                    }
                }
            }
        }
        total += shell;
        total_abs += shell_abs;
        last = shell_abs;
        if shell_abs <= options.rel_tol * total_abs {
            return Ok(total);
        }
    }
    Err(GeometryError::Truncation {
        shells: options.max_shells,
        tail_bound: last,
    })
}

/// One-dimensional periodic heat kernel `Σ_n (4πt)^{-1/2} e^{-(δ+nℓ)²/4t}`.
///
/// Uses the image sum for short times and the dual mode sum
/// `(1/ℓ) Σ_k e^{-4π²k²t/ℓ²} cos(2πkδ/ℓ)` for long times.
pub(crate) fn theta1(t: f64, delta: f64, period: f64, rel_tol: f64) -> f64 {
    if t <= period * period / (4.0 * PI) {
        let pre = (4.0 * PI * t).powf(-0.5);
        let term = |n: f64| (-(delta + n * period).powi(2) / (4.0 * t)).exp();
        let mut sum = term(0.0);
        for n in 1..10_000 {
            let add = term(n as f64) + term(-(n as f64));
            sum += add;
            if add <= rel_tol * 1e-3 * sum {
                break;
            }
        }
        pre * sum
    } else {
        let a = 4.0 * PI * PI * t / (period * period);
        let mut sum = 1.0;
        for k in 1..10_000 {
            let kf = k as f64;
            let damp = (-a * kf * kf).exp();
            sum += 2.0 * damp * (2.0 * PI * kf * delta / period).cos();
            if damp <= rel_tol * 1e-3 {
                break;
            }
        }
        sum / period
    }
}

pub(crate) fn heat(t: f64, d: [f64; 3], periods: &[f64; 3], rel_tol: f64) -> f64 {
    let d = min_image(d, periods);
    (0..3).map(|k| theta1(t, d[k], periods[k], rel_tol)).product()
}

/// Whether the cubic-shell image sum is expected to converge within the
/// shell budget for decay rate `kappa`.
pub(crate) fn shells_suffice(kappa: f64, periods: &[f64; 3], options: ImageSumOptions) -> bool {
    let lmin = periods.iter().cloned().fold(f64::INFINITY, f64::min);
    let needed = (1.0 / options.rel_tol).ln() / (kappa * lmin) + 2.0;
    needed <= options.max_shells as f64
}

/// `∫_lower^∞ w(t) K_t(d) dt` with the product theta-function heat kernel.
///
/// `rate` is the slowest exponential decay of `w`; `integrable_at_zero`
/// marks weights that vanish with `t` so the window can be cut off.
#[allow(clippy::too_many_arguments)]
pub(crate) fn time_integral<W: Fn(f64) -> f64>(
    d: [f64; 3],
    periods: &[f64; 3],
    rel_tol: f64,
    lower: f64,
    rate: f64,
    integrable_at_zero: bool,
    step: f64,
    w: W,
) -> f64 {
    let d = min_image(d, periods);
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let u_hi = (60.0 / rate).ln();
    let u_lo = if lower > 0.0 {
        lower.ln() - 40.0
    } else if r > 0.0 {
        let lo = (r * r / 240.0).ln();
        if integrable_at_zero {
            lo.max(u_hi - 90.0)
        } else {
            lo
        }
    } else {
        u_hi - 90.0
    };
    log_time_integral(lower, u_lo, u_hi, step, |t| w(t) * heat(t, d, periods, rel_tol))
}
