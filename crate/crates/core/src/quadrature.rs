//! Quadrature rules: Gauss–Legendre panels, graded rules for weakly singular
//! integrands and a trapezoid rule in logarithmic time.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    /// Rule with `order` points. Panics when `order < 2`.
    pub fn new(order: usize) -> Self {
        let order = NonZeroUsize::new(order.max(2)).expect("nonzero");
        let rule = GaussLegendre::new(order);
        let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x);
        }
        sum * half
    }

    /// Append the mapped nodes and weights for `[a, b]` to `out`.
    pub fn push_panel(&self, a: f64, b: f64, out: &mut Vec<(f64, f64)>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            out.push((mid + half * x, w * half));
        }
    }
}

/// Composite rule on `(0, half]` refined geometrically towards the origin.
///
/// Panels above `half / uniform_panels` are uniform; below that they shrink
/// by `ratio` down to `floor`, and a final panel covers `[0, floor]`.
pub fn graded_half_rule(
    rule: &GaussRule,
    half: f64,
    uniform_panels: usize,
    ratio: f64,
    floor: f64,
) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let width = half / uniform_panels.max(1) as f64;
    let break_point = width.min(half);
    let n_uniform = ((half - break_point) / width).round() as usize;
    for k in 0..n_uniform {
        let a = break_point + k as f64 * width;
        let b = if k + 1 == n_uniform { half } else { a + width };
        rule.push_panel(a, b, &mut out);
    }
    let mut b = break_point;
    let ratio = ratio.clamp(0.05, 0.9);
    while b * ratio > floor {
        let a = b * ratio;
        rule.push_panel(a, b, &mut out);
        b = a;
    }
    rule.push_panel(0.0, b, &mut out);
    out
}

/// Uniform composite rule on `[a, b]`.
pub fn uniform_rule(rule: &GaussRule, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(panels * rule.order());
    let w = (b - a) / panels as f64;
    for k in 0..panels {
        rule.push_panel(a + k as f64 * w, a + (k + 1) as f64 * w, &mut out);
    }
    out
}

/// Trapezoid rule for `∫_lower^∞ f(t) dt` after the substitution
/// `t = lower + e^u`, summed over `u ∈ [u_lo, u_hi]` with step `h`.
///
/// The integrand must be negligible at both ends of the window.
pub fn log_time_integral<F: FnMut(f64) -> f64>(
    lower: f64,
    u_lo: f64,
    u_hi: f64,
    h: f64,
    mut f: F,
) -> f64 {
    let n = ((u_hi - u_lo) / h).ceil().max(1.0) as usize;
    let mut sum = 0.0;
    for k in 0..=n {
        let eu = (u_lo + k as f64 * h).exp();
        sum += f(lower + eu) * eu;
    }
    sum * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_exact_for_polynomials() {
        let rule = GaussRule::new(16);
        let v = rule.integrate(0.0, 2.0, |x| x.powi(31));
        assert!((v / (2f64.powi(32) / 32.0) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn graded_rule_integrates_log_singularity() {
        let rule = GaussRule::new(16);
        let pts = graded_half_rule(&rule, 1.0, 32, 0.5, 1e-14);
        let v: f64 = pts.iter().map(|&(x, w)| w * x.ln()).sum();
        assert!((v + 1.0).abs() < 1e-12, "{v}");
        let v: f64 = pts.iter().map(|&(x, w)| w / x.sqrt()).sum();
        assert!((v - 2.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn log_time_trapezoid_gamma_integral() {
        // ∫_0^∞ t^{-1/2} e^{-t} dt = √π
        let v = log_time_integral(0.0, -80.0, 5.0, 0.2, |t| t.powf(-0.5) * (-t).exp());
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-13, "{v}");
    }
}
