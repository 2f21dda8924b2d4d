//! Special functions used by the kernels.

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Modified Bessel function `K₀(x)` for `x > 0`.
pub fn bessel_k0(x: f64) -> f64 {
    if x > 745.0 {
        return 0.0;
    }
    puruspe::Kn(0, x)
}

/// Modified Bessel function `K₁(x)` for `x > 0`.
pub fn bessel_k1(x: f64) -> f64 {
    if x > 745.0 {
        return 0.0;
    }
    puruspe::Kn(1, x)
}

/// `x K₁(x)`, continuous at the origin where it tends to one.
pub fn x_bessel_k1(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x * bessel_k1(x)
    }
}

/// Scaled complementary error function `e^{x²} erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    puruspe::erfcx(x)
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    puruspe::erfc(x)
}

/// `x - sin x` without cancellation.
pub fn x_minus_sin(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let x2 = x * x;
        x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0 * (1.0 - x2 / 110.0))))
    } else {
        x - x.sin()
    }
}

/// `ρ / sinh ρ`, continuous at zero.
pub fn rho_over_sinh(rho: f64) -> f64 {
    if rho.abs() < 1e-4 {
        1.0 - rho * rho / 6.0
    } else if rho > 700.0 {
        2.0 * rho * (-rho).exp()
    } else {
        rho / rho.sinh()
    }
}

/// Exponential integral `E₁(x)` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> f64 {
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        -EULER_GAMMA - x.ln() + sum
    } else {
        // Continued fraction (modified Lentz).
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussRule;

    fn k_integral(nu: f64, x: f64) -> f64 {
        // K_ν(x) = ∫_0^∞ e^{-x cosh t} cosh(νt) dt
        let rule = GaussRule::new(32);
        let tmax = (2.0 * 50.0 / x).ln().max(1.0) + 2.0;
        let panels = 64;
        let w = tmax / panels as f64;
        (0..panels)
            .map(|p| {
                rule.integrate(p as f64 * w, (p + 1) as f64 * w, |t| {
                    (-x * t.cosh()).exp() * (nu * t).cosh()
                })
            })
            .sum()
    }

    #[test]
    fn k0_matches_integral_representation() {
        for &x in &[1e-3, 0.1, 0.5, 1.0, 1.5, 3.0, 10.0, 40.0] {
            let a = bessel_k0(x);
            let b = k_integral(0.0, x);
            assert!(((a - b) / b).abs() < 1e-13, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn k1_matches_integral_representation() {
        for &x in &[1e-3, 0.1, 0.5, 1.0, 1.5, 3.0, 10.0, 40.0] {
            let a = bessel_k1(x);
            let b = k_integral(1.0, x);
            assert!(((a - b) / b).abs() < 1e-13, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn erfcx_consistent_with_erfc() {
        for &x in &[-2.0, -0.5, 0.0, 0.3, 1.0, 4.0] {
            let a = erfcx(x);
            let b = (x * x).exp() * erfc(x);
            assert!(((a - b) / b).abs() < 1e-13);
        }
        // asymptotic 1/(x√π)
        let x = 1e6;
        assert!((erfcx(x) * x * std::f64::consts::PI.sqrt() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn e1_values() {
        // E1(1) = 0.21938393439552029, E1(0.1) = 1.8229239584193906, E1(5) = 0.001148295591275326
        assert!((exp_integral_e1(1.0) - 0.219_383_934_395_520_3).abs() < 1e-14);
        assert!((exp_integral_e1(0.1) - 1.822_923_958_419_390_6).abs() < 1e-13);
        assert!((exp_integral_e1(5.0) / 0.001_148_295_591_275_326 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn small_argument_helpers() {
        for &x in &[1e-6, 1e-3, 0.05, 0.099, 0.2] {
            let series = x_minus_sin(x);
            let f128 = {
                // compare with Taylor to many terms
                let mut s = 0.0;
                let mut t = x;
                for k in 1..12 {
                    t *= -x * x / ((2 * k) * (2 * k + 1)) as f64;
                    s -= t;
                }
                s
            };
            assert!(((series - f128) / f128).abs() < 1e-13);
        }
        assert!((rho_over_sinh(1.0) - 1.0 / 1.0f64.sinh()).abs() < 1e-15);
    }
}
