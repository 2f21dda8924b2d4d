//! The invariant suite behind `curvebound check`.

use curvebound::curves::CurveSystem;
use curvebound::geometry::{ManifoldKind, Point};
use curvebound::operator::{PrincipalOperator, Scheme};
use curvebound::rgflow::{flow_coupling, flow_coupling_ode, scaling_law_check};
use curvebound::spectral::{
    eigen_flow_with, gershgorin_lower_bound_with, ground_state_wavefunction, positivity_check,
    solve_ground_state_with,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::{canonical_root_options, decoupled_threshold, rg_state};
use crate::error::CliError;
use crate::scenario::{CurveInput, Scenario};

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckBlock {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
}

struct Suite {
    checks: Vec<CheckOutcome>,
}

impl Suite {
    fn record(&mut self, name: &str, passed: bool, detail: String) {
        if passed {
            log::info!("PASS {name}: {detail}");
        } else {
            log::error!("FAIL {name}: {detail}");
        }
        self.checks.push(CheckOutcome {
            name: name.into(),
            passed,
            detail,
        });
    }

    /// Record an error as a failed check instead of aborting the suite.
    fn attempt<T>(&mut self, name: &str, r: Result<T, CliError>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.record(name, false, e.to_string());
                None
            }
        }
    }
}

fn self_gap_sandwich(system: &CurveSystem) -> (bool, String) {
    let m = system.manifold();
    let mut worst_low = f64::INFINITY;
    let mut worst_high = 0.0f64;
    for c in system.curves() {
        let cert = c.self_gap();
        let nodes = c.nodes();
        let n = nodes.len();
        let h = c.node_spacing();
        let reach = (cert.delta / h).floor() as usize;
        for i in 0..n {
            for k in 1..=reach.min(n / 2) {
                let xi = k as f64 * h;
                let a = Point(nodes[i]);
                let b = Point(nodes[(i + k) % n]);
                let d = match m.geodesic_distance(&a, &b) {
                    Ok(d) => d,
                    Err(e) => return (false, e.to_string()),
                };
                worst_low = worst_low.min(d / (cert.lower_factor * xi));
                worst_high = worst_high.max(d / xi);
            }
        }
        if !(cert.delta > 0.0 && cert.gap > 0.0) {
            return (false, format!("degenerate certificate {cert:?}"));
        }
    }
    let ok = worst_low >= 1.0 - 1e-12 && worst_high <= 1.0 + 1e-12;
    (
        ok,
        format!("min d/(√(1−κδ)ξ) = {worst_low:.12}, max d/ξ = {worst_high:.12}"),
    )
}

/// Offset preserving the manifold: horizontal on hyperbolic space, in-plane
/// on the plane.
fn isometric_offset(kind: ManifoldKind, rng: &mut ChaCha8Rng) -> [f64; 3] {
    let mut o = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
    if matches!(kind, ManifoldKind::EuclideanPlane | ManifoldKind::HyperbolicSpace3 { .. }) {
        o[2] = 0.0;
    }
    o
}

/// Runs every applicable invariant check. Geometry and schema failures of
/// the scenario itself abort with an error; everything else is recorded.
pub fn run_suite(scenario: &Scenario, seed: u64) -> Result<CheckBlock, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut suite = Suite { checks: Vec::new() };
    let q = scenario.quadrature();

    let system = scenario.build_system()?;
    let (ok, detail) = self_gap_sandwich(&system);
    suite.record("geometry.self_gap", ok, detail);
    if system.len() >= 2 {
        let d = system.distances();
        let mut ok = true;
        for i in 0..system.len() {
            for j in 0..system.len() {
                if i != j {
                    ok &= d[i][j] > 0.0 && d[i][j] == d[j][i];
                }
            }
        }
        suite.record(
            "geometry.distances",
            ok,
            format!("min distance {:e}", system.min_distance().unwrap_or(f64::NAN)),
        );
    }

    let op = PrincipalOperator::new(&system, q)?;
    let solved = solve_ground_state_with(&op, &canonical_root_options(scenario)).map_err(CliError::from);
    let solution = match solved {
        Ok(s) => s,
        Err(e) => {
            suite.record("spectral.ground_state", false, e.to_string());
            return Ok(finish(seed, suite));
        }
    };
    let e_gr = solution.energy;
    let n = system.len();
    let mut detail = format!("E_gr = {e_gr:.15e}, |ω⁽⁰⁾| = {:e}", solution.residual);
    let mut ok = e_gr.is_finite() && e_gr < 0.0 && solution.omega_slope < 0.0;
    if let (Some(th), 1) = (decoupled_threshold(system.scheme()), n) {
        ok &= (e_gr - th).abs() <= 1e-10 * th.abs();
        detail.push_str(&format!(", on-shell value {th}"));
    }
    suite.record("spectral.ground_state", ok, detail);

    let mut structure = (true, 0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..3 {
        let e = e_gr * rng.random_range(0.5..2.0);
        let Some(m) = suite.attempt("operator.structure", op.matrix(e).map_err(CliError::from)) else {
            structure.0 = false;
            break;
        };
        let Some(dm) = suite.attempt("operator.structure", op.derivative(e).map_err(CliError::from)) else {
            structure.0 = false;
            break;
        };
        let scale = m.values.amax().max(1e-300);
        structure.1 = structure.1.max(m.symmetry_defect() / scale);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    structure.2 = structure.2.max(m.values[(i, j)]);
                }
            }
            structure.3 = structure.3.max(dm[(i, i)]);
        }
    }
    if structure.0 {
        let (_, asym, max_off, max_ddiag) = structure;
        let ok = asym <= 1e-12 && (n == 1 || max_off < 0.0) && max_ddiag < 0.0;
        suite.record(
            "operator.structure",
            ok,
            if n == 1 {
                format!("asymmetry {asym:e}, max dΦᵢᵢ/dE {max_ddiag:e}")
            } else {
                format!("asymmetry {asym:e}, max Φᵢⱼ {max_off:e}, max dΦᵢᵢ/dE {max_ddiag:e}")
            },
        );
    }

    match positivity_check(&solution, &system, q) {
        Ok(p) => suite.record(
            "spectral.positivity",
            p.passed,
            format!("min Aᵢ {:e}, gap {:e}", p.min_component, p.gap),
        ),
        Err(e) => suite.record("spectral.positivity", false, e.to_string()),
    }

    if n >= 2 {
        let opts = canonical_root_options(scenario);
        match gershgorin_lower_bound_with(&op, e_gr, &opts) {
            Ok(g) => {
                let mut ok = g.e_star <= e_gr;
                let mut detail = format!("E* = {:.15e} ≤ E_gr = {e_gr:.15e}", g.e_star);
                if let Some(th) = decoupled_threshold(system.scheme()) {
                    ok &= e_gr < th;
                    detail.push_str(&format!(" < {th}"));
                }
                suite.record("spectral.ordering", ok, detail);
            }
            Err(e) => suite.record("spectral.ordering", false, e.to_string()),
        }
    }

    let grid: Vec<f64> = (0..12).map(|k| 2.0 * e_gr + (-1.5 * e_gr) * k as f64 / 11.0).collect();
    match eigen_flow_with(&op, &grid) {
        Ok(flow) => {
            let crossing = flow
                .zero_crossings()
                .into_iter()
                .filter(|(k, _)| *k == 0)
                .map(|(_, e)| e)
                .next();
            let step = (grid[1] - grid[0]).abs();
            let ok = flow.max_slope() < 0.0 && crossing.is_some_and(|e| (e - e_gr).abs() <= step);
            suite.record(
                "spectral.flow",
                ok,
                format!("max slope {:e}, ω⁽⁰⁾ crosses zero at {crossing:?}", flow.max_slope()),
            );
        }
        Err(e) => suite.record("spectral.flow", false, e.to_string()),
    }

    let kind = system.manifold().kind();
    let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
    for c in system.curves() {
        for p in c.nodes() {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
    }
    let points: Vec<Point> = (0..16)
        .map(|_| {
            let mut x = [0.0; 3];
            for k in 0..3 {
                x[k] = rng.random_range(lo[k] - 1.0..hi[k] + 1.0);
            }
            match kind {
                ManifoldKind::EuclideanPlane => x[2] = 0.0,
                ManifoldKind::HyperbolicSpace3 { .. } => x[2] = rng.random_range(0.5 * lo[2]..2.0 * hi[2]),
                _ => {}
            }
            Point(x)
        })
        .collect();
    match ground_state_wavefunction(&solution, &system, q, &points) {
        Ok(samples) => {
            let min = samples
                .iter()
                .filter(|s| !s.near_support)
                .map(|s| s.psi)
                .fold(f64::INFINITY, f64::min);
            suite.record("spectral.wavefunction", min > 0.0, format!("min ψ_gr {min:e} over 16 points"));
        }
        Err(e) => suite.record("spectral.wavefunction", false, e.to_string()),
    }

    {
        let offset = isometric_offset(kind, &mut rng);
        let mut moved = scenario.clone();
        moved.curves = scenario
            .specs()?
            .into_iter()
            .map(|s| CurveInput::Spec(s.translated(offset)))
            .collect();
        let r = moved.build_system().and_then(|sys| {
            let op = PrincipalOperator::new(&sys, q)?;
            Ok(solve_ground_state_with(&op, &canonical_root_options(scenario))?)
        });
        match r {
            Ok(s) => {
                let dev = (s.energy - e_gr).abs();
                suite.record(
                    "property.translation",
                    dev <= 1e-9 * e_gr.abs(),
                    format!("offset {offset:?}: |ΔE_gr| = {dev:e}"),
                );
            }
            Err(e) => suite.record("property.translation", false, e.to_string()),
        }
    }

    if let Scheme::RgSubtracted { .. } = system.scheme() {
        rg_checks(&mut suite, scenario, &system);
    }
    Ok(finish(seed, suite))
}

fn rg_checks(suite: &mut Suite, scenario: &Scenario, system: &CurveSystem) {
    let Some(state) = suite.attempt("rgflow.state", rg_state(system)) else {
        return;
    };
    let identity = state.flowed_inverse(1.0).map(|g| g == state.inverse_coupling);
    suite.record(
        "rgflow.identity",
        identity == Ok(true),
        format!("1/λ_R(μ) = {}", state.inverse_coupling),
    );
    let mut dev = 0.0f64;
    for &tau in &scenario.solver.taus {
        if let (Ok(a), Ok(b)) = (
            flow_coupling(&state, tau),
            flow_coupling_ode(&state, tau, scenario.solver.ode_steps),
        ) {
            dev = dev.max((a - b).abs() / a.abs());
        }
    }
    suite.record("rgflow.ode", dev < 1e-8, format!("max relative deviation {dev:e}"));
    let curve = &system.curves()[0];
    let e = scenario.units.energy_to_canonical(scenario.solver.scaling_energies[0]);
    match scaling_law_check(curve, &state, e, 2.0, scenario.quadrature()) {
        Ok(r) => suite.record(
            "rgflow.scaling",
            r.discrepancy < 1e-6,
            format!("τ = 2, E = {e}: |LHS − RHS| = {:e}", r.discrepancy),
        ),
        Err(e) => suite.record("rgflow.scaling", false, e.to_string()),
    }
}

fn finish(seed: u64, suite: Suite) -> CheckBlock {
    CheckBlock {
        seed,
        passed: suite.checks.iter().all(|c| c.passed),
        checks: suite.checks,
    }
}
