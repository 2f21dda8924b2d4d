//! Subcommand implementations. Each command writes its artifacts into the
//! output directory and returns the run record.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use curvebound::curves::{CurveSummary, CurveSystem};
use curvebound::geometry::{ManifoldKind, Point, UnitsConfig};
use curvebound::operator::{PrincipalOperator, Scheme};
use curvebound::rgflow::{flow_coupling, flow_coupling_ode, scaling_law_check, RgState, ScalingReport};
use curvebound::spectral::{
    eigen_flow_with, gershgorin_lower_bound_with, ground_state_wavefunction, l2_box_normalization,
    positivity_check, solve_ground_state_with, GershgorinRow, PositivityReport, SolverOptions,
    SpectralSolution,
};
use serde::Serialize;

use crate::check::{run_suite, CheckBlock};
use crate::error::CliError;
use crate::output::{fmt_f64, write_json, Table};
use crate::scenario::Scenario;

pub const ARTIFACT: &str = "curvebound";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Wall-clock seconds per phase. Excluded from determinism comparisons.
pub type Timings = BTreeMap<String, f64>;

#[derive(Debug, Clone, Serialize)]
pub struct SystemBlock {
    pub manifold: ManifoldKind,
    pub scheme: Scheme,
    pub nodes: usize,
    pub curves: Vec<CurveSummary>,
    pub distances: Vec<Vec<f64>>,
}

impl SystemBlock {
    fn new(system: &CurveSystem, nodes: usize) -> Self {
        Self {
            manifold: system.manifold().kind(),
            scheme: system.scheme().clone(),
            nodes,
            curves: system.summary(),
            distances: system.distances().to_vec(),
        }
    }
}

/// Ground state in user energy units.
#[derive(Debug, Clone, Serialize)]
pub struct GroundStateBlock {
    pub energy: f64,
    pub energy_canonical: f64,
    pub eigenvector: Vec<f64>,
    /// `dω⁽⁰⁾/dE` per canonical energy unit.
    pub omega_slope: f64,
    pub normalization: f64,
    pub residual: f64,
    pub gap: f64,
    pub bracket_canonical: (f64, f64),
    pub evaluations: usize,
}

impl GroundStateBlock {
    fn new(sol: &SpectralSolution, units: &UnitsConfig) -> Self {
        Self {
            energy: units.energy_from_canonical(sol.energy),
            energy_canonical: sol.energy,
            eigenvector: sol.eigenvector.clone(),
            omega_slope: sol.omega_slope,
            normalization: sol.normalization,
            residual: sol.residual,
            gap: sol.gap,
            bracket_canonical: sol.bracket,
            evaluations: sol.evaluations,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GershgorinBlock {
    pub e_star: f64,
    pub e_star_canonical: f64,
    /// `E* ≤ E_gr`.
    pub ordered: bool,
    /// Rows with canonical energies.
    pub certificate: Vec<GershgorinRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateBlock {
    pub positivity: PositivityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gershgorin: Option<GershgorinBlock>,
    /// `E_gr < −max νᵢ²` (bound-state scheme with several curves).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub binding_enhanced: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanBlock {
    pub points: usize,
    pub max_slope: f64,
    pub monotone: bool,
    /// `(curve, energy)` sign changes in user units.
    pub zero_crossings: Vec<(usize, f64)>,
    pub ambiguous_points: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WavefunctionBlock {
    pub points: usize,
    pub flagged: usize,
    pub min_psi: f64,
    pub all_positive: bool,
    /// Factor making `Σ ψ² ΔV = 1` over the box.
    pub box_normalization: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RgFlowBlock {
    pub c: f64,
    pub length: f64,
    pub pole: f64,
    pub max_ode_deviation: f64,
    pub scaling: Vec<ScalingReport>,
    pub max_scaling_discrepancy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub artifact: &'static str,
    pub version: &'static str,
    pub command: String,
    pub scenario_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario_name: Option<String>,
    pub units: UnitsConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_state: Option<GroundStateBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificates: Option<CertificateBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavefunction: Option<WavefunctionBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rgflow: Option<RgFlowBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckBlock>,
    pub timings: Timings,
}

impl RunRecord {
    pub fn new(command: &str, scenario: &Scenario) -> Self {
        Self {
            artifact: ARTIFACT,
            version: VERSION,
            command: command.into(),
            scenario_hash: scenario.hash(),
            scenario_name: scenario.name.clone(),
            units: scenario.units,
            system: None,
            ground_state: None,
            certificates: None,
            scan: None,
            wavefunction: None,
            rgflow: None,
            check: None,
            timings: Timings::new(),
        }
    }

    /// Serialized record without the timings block.
    pub fn numerics_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("record serializes");
        v.as_object_mut().expect("object").remove("timings");
        v
    }
}

/// Where a command writes.
#[derive(Debug, Clone)]
pub struct OutputDir(pub PathBuf);

impl OutputDir {
    pub fn file(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }
}

struct Timer<'a> {
    timings: &'a mut Timings,
}

impl Timer<'_> {
    fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.insert(phase.into(), start.elapsed().as_secs_f64());
        out
    }
}

/// Root options with user energies converted to canonical units.
pub fn canonical_root_options(scenario: &Scenario) -> SolverOptions {
    let u = &scenario.units;
    SolverOptions {
        e_min: u.energy_to_canonical(scenario.solver.root.e_min),
        e_max: u.energy_to_canonical(scenario.solver.root.e_max),
        ..scenario.solver.root
    }
}

pub(crate) struct Solved {
    pub system: CurveSystem,
    pub solution: SpectralSolution,
}

pub(crate) fn build_and_solve(scenario: &Scenario, timings: &mut Timings) -> Result<Solved, CliError> {
    let mut t = Timer { timings };
    let system = t.time("build", || scenario.build_system())?;
    let solution = t.time("ground_state", || -> Result<_, CliError> {
        let op = PrincipalOperator::new(&system, scenario.quadrature())?;
        Ok(solve_ground_state_with(&op, &canonical_root_options(scenario))?)
    })?;
    log::info!("E_gr = {:.15e} (canonical)", solution.energy);
    Ok(Solved { system, solution })
}

/// `−max νᵢ²` for the bound-state scheme.
pub fn decoupled_threshold(scheme: &Scheme) -> Option<f64> {
    match scheme {
        Scheme::BoundState3D { binding_wavenumbers } => {
            Some(-binding_wavenumbers.iter().fold(0.0f64, |m, v| m.max(v * v)))
        }
        _ => None,
    }
}

/// Build, solve, certify. Writes the JSON record.
pub fn cmd_solve(scenario: &Scenario, out: &OutputDir) -> Result<RunRecord, CliError> {
    let mut record = RunRecord::new("solve", scenario);
    let Solved { system, solution } = build_and_solve(scenario, &mut record.timings)?;
    record.system = Some(SystemBlock::new(&system, scenario.quadrature().nodes));
    record.ground_state = Some(GroundStateBlock::new(&solution, &scenario.units));

    let start = Instant::now();
    let positivity = positivity_check(&solution, &system, scenario.quadrature());
    let mut failure = None;
    let positivity = match positivity {
        Ok(p) => p,
        Err(e) => {
            failure = Some(CliError::from(e));
            PositivityReport {
                max_offdiagonal: f64::NAN,
                min_component: solution.eigenvector.iter().cloned().fold(f64::INFINITY, f64::min),
                gap: solution.gap,
                passed: false,
            }
        }
    };
    let gershgorin = if system.len() >= 2 {
        let op = PrincipalOperator::new(&system, scenario.quadrature())?;
        let g = gershgorin_lower_bound_with(&op, solution.energy, &canonical_root_options(scenario))?;
        let ordered = g.e_star <= solution.energy;
        if !ordered && failure.is_none() {
            failure = Some(CliError::Invariant(format!(
                "Geršgorin bound {} above E_gr {}",
                g.e_star, solution.energy
            )));
        }
        Some(GershgorinBlock {
            e_star: scenario.units.energy_from_canonical(g.e_star),
            e_star_canonical: g.e_star,
            ordered,
            certificate: g.certificate,
        })
    } else {
        None
    };
    let binding_enhanced = match decoupled_threshold(system.scheme()) {
        Some(th) if system.len() >= 2 => Some(solution.energy < th),
        _ => None,
    };
    record.timings.insert("certificates".into(), start.elapsed().as_secs_f64());
    record.certificates = Some(CertificateBlock {
        positivity,
        gershgorin,
        binding_enhanced,
    });
    write_json(&out.file(&scenario.outputs.record), &record)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(record),
    }
}

/// Eigenvalue flow on the scenario grid. Writes the CSV and the record.
pub fn cmd_scan(scenario: &Scenario, out: &OutputDir) -> Result<RunRecord, CliError> {
    let grid = scenario
        .solver
        .scan
        .as_ref()
        .ok_or_else(|| CliError::Schema("scan needs `solver.scan`".into()))?;
    let units = scenario.units;
    let mut record = RunRecord::new("scan", scenario);
    let mut t = Timer {
        timings: &mut record.timings,
    };
    let system = t.time("build", || scenario.build_system())?;
    let energies: Vec<f64> = grid.energies().iter().map(|e| units.energy_to_canonical(*e)).collect();
    let flow = t.time("flow", || -> Result<_, CliError> {
        let op = PrincipalOperator::new(&system, scenario.quadrature())?;
        Ok(eigen_flow_with(&op, &energies)?)
    })?;
    let n = flow.curves();
    let header = std::iter::once("E".to_string())
        .chain((0..n).map(|k| format!("omega_{k}")))
        .chain((0..n).map(|k| format!("slope_{k}")));
    let mut table = Table::new(header);
    for (p, e) in grid.energies().iter().enumerate() {
        let mut row = vec![fmt_f64(*e)];
        row.extend(flow.eigenvalues[p].iter().map(|w| fmt_f64(*w)));
        row.extend(flow.slopes[p].iter().map(|s| fmt_f64(s / units.energy_scale())));
        table.push(row);
    }
    table.write(&out.file(&scenario.outputs.scan))?;
    let max_slope = flow.max_slope();
    record.system = Some(SystemBlock::new(&system, scenario.quadrature().nodes));
    record.scan = Some(ScanBlock {
        points: energies.len(),
        max_slope,
        monotone: max_slope < 0.0,
        zero_crossings: flow
            .zero_crossings()
            .into_iter()
            .map(|(k, e)| (k, units.energy_from_canonical(e)))
            .collect(),
        ambiguous_points: flow.crossings.clone(),
    });
    write_json(&out.file(&scenario.outputs.record), &record)?;
    if max_slope >= 0.0 {
        return Err(CliError::Invariant(format!(
            "eigenvalue flow not decreasing: max slope {max_slope:e}"
        )));
    }
    Ok(record)
}

/// Ground-state wave function on the scenario box.
pub fn cmd_wavefunction(scenario: &Scenario, out: &OutputDir) -> Result<RunRecord, CliError> {
    let grid = scenario
        .solver
        .wavefunction
        .as_ref()
        .ok_or_else(|| CliError::Schema("wavefunction needs `solver.wavefunction`".into()))?;
    let manifold = scenario.manifold();
    let points: Vec<Point> = grid.points().into_iter().map(Point).collect();
    for p in &points {
        manifold
            .validate_point(p)
            .map_err(|e| CliError::Schema(format!("solver.wavefunction: {e}")))?;
    }
    let mut record = RunRecord::new("wavefunction", scenario);
    let Solved { system, solution } = build_and_solve(scenario, &mut record.timings)?;
    let start = Instant::now();
    let samples = ground_state_wavefunction(&solution, &system, scenario.quadrature(), &points)?;
    record.timings.insert("wavefunction".into(), start.elapsed().as_secs_f64());

    let mut table = Table::new(["x", "y", "z", "psi", "near_support", "node_distance"]);
    let (mut flagged, mut min_psi) = (0, f64::INFINITY);
    for s in &samples {
        let [x, y, z] = s.point.0;
        if s.near_support {
            flagged += 1;
        } else {
            min_psi = min_psi.min(s.psi);
        }
        table.push(vec![
            fmt_f64(x),
            fmt_f64(y),
            fmt_f64(z),
            fmt_f64(s.psi),
            s.near_support.to_string(),
            fmt_f64(s.node_distance),
        ]);
    }
    table.write(&out.file(&scenario.outputs.wavefunction))?;
    let regular: Vec<_> = samples.iter().filter(|s| !s.near_support).cloned().collect();
    let all_positive = regular.iter().all(|s| s.psi > 0.0);
    record.system = Some(SystemBlock::new(&system, scenario.quadrature().nodes));
    record.ground_state = Some(GroundStateBlock::new(&solution, &scenario.units));
    record.wavefunction = Some(WavefunctionBlock {
        points: samples.len(),
        flagged,
        min_psi,
        all_positive,
        box_normalization: l2_box_normalization(&regular, grid.cell_volume(manifold.dimension())),
    });
    write_json(&out.file(&scenario.outputs.record), &record)?;
    if flagged > 0 {
        log::warn!("{flagged} grid points lie on the support and are flagged");
    }
    if !all_positive {
        return Err(CliError::Invariant(format!("ψ_gr not positive: min {min_psi:e}")));
    }
    Ok(record)
}

pub(crate) fn rg_state(system: &CurveSystem) -> Result<RgState, CliError> {
    match system.scheme() {
        Scheme::RgSubtracted {
            inverse_coupling,
            scale,
        } => Ok(RgState::new(*inverse_coupling, *scale, system.curves()[0].length())?),
        other => Err(CliError::Schema(format!(
            "rgflow needs the rg_subtracted scheme, got {}",
            other.name()
        ))),
    }
}

/// Coupling flow over `solver.taus` and the scaling-law table.
pub fn cmd_rgflow(scenario: &Scenario, out: &OutputDir) -> Result<RunRecord, CliError> {
    if !matches!(scenario.scheme, Scheme::RgSubtracted { .. }) {
        return Err(CliError::Schema(format!(
            "rgflow needs the rg_subtracted scheme, got {}",
            scenario.scheme.name()
        )));
    }
    let mut record = RunRecord::new("rgflow", scenario);
    let mut t = Timer {
        timings: &mut record.timings,
    };
    let system = t.time("build", || scenario.build_system())?;
    let state = rg_state(&system)?;
    let mut table = Table::new(["tau", "mu", "inverse_coupling", "lambda", "lambda_ode", "beta", "pole"]);
    let mut max_dev = 0.0f64;
    for &tau in &scenario.solver.taus {
        let inv = state.flowed_inverse(tau)?;
        let closed = flow_coupling(&state, tau);
        let ode = flow_coupling_ode(&state, tau, scenario.solver.ode_steps);
        let (lambda, lambda_ode, pole) = match (closed, ode) {
            (Ok(a), Ok(b)) => {
                max_dev = max_dev.max((a - b).abs() / a.abs().max(1e-300));
                (fmt_f64(a), fmt_f64(b), false)
            }
            _ => (String::new(), String::new(), true),
        };
        let beta = state.at_scale(tau)?.beta();
        table.push(vec![
            fmt_f64(tau),
            fmt_f64(state.mu * tau),
            fmt_f64(inv),
            lambda,
            lambda_ode,
            fmt_f64(beta),
            pole.to_string(),
        ]);
    }
    table.write(&out.file(&scenario.outputs.rgflow))?;
    let mut t = Timer {
        timings: &mut record.timings,
    };
    let scaling = t.time("scaling", || -> Result<Vec<ScalingReport>, CliError> {
        let curve = &system.curves()[0];
        let mut rows = Vec::new();
        for &tau in &scenario.solver.taus {
            for &e in &scenario.solver.scaling_energies {
                let e = scenario.units.energy_to_canonical(e);
                rows.push(scaling_law_check(curve, &state, e, tau, scenario.quadrature())?);
            }
        }
        Ok(rows)
    })?;
    let max_scaling = scaling.iter().map(|r| r.discrepancy).fold(0.0, f64::max);
    record.system = Some(SystemBlock::new(&system, scenario.quadrature().nodes));
    record.rgflow = Some(RgFlowBlock {
        c: state.c,
        length: state.length,
        pole: state.pole(),
        max_ode_deviation: max_dev,
        scaling,
        max_scaling_discrepancy: max_scaling,
    });
    write_json(&out.file(&scenario.outputs.record), &record)?;
    Ok(record)
}

/// Run the invariant suite; any failure is an invariant error.
pub fn cmd_check(scenario: &Scenario, out: &OutputDir, seed: u64) -> Result<RunRecord, CliError> {
    let mut record = RunRecord::new("check", scenario);
    let start = Instant::now();
    let block = run_suite(scenario, seed)?;
    record.timings.insert("suite".into(), start.elapsed().as_secs_f64());
    let failed: Vec<String> = block
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect();
    record.check = Some(block);
    write_json(&out.file(&scenario.outputs.check), &record)?;
    if !failed.is_empty() {
        return Err(CliError::Invariant(failed.join("; ")));
    }
    Ok(record)
}

/// Reference scenarios shipped with the binary.
pub const BUNDLED: &[(&str, &str)] = &[
    ("single_circle", include_str!("../scenarios/single_circle.json")),
    ("two_circles", include_str!("../scenarios/two_circles.json")),
    ("three_circles", include_str!("../scenarios/three_circles.json")),
    ("planar_circle", include_str!("../scenarios/planar_circle.json")),
    ("rg_circle", include_str!("../scenarios/rg_circle.json")),
];

pub fn bundled(name: &str) -> Option<Scenario> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| Scenario::from_json(text).expect("bundled scenarios are valid"))
}

/// `check` over every bundled scenario, each in its own subdirectory.
pub fn check_bundled(out: &Path, seed: u64) -> Result<Vec<RunRecord>, CliError> {
    let mut records = Vec::new();
    let mut first_error = None;
    for (name, text) in BUNDLED {
        let scenario = Scenario::from_json(text)?;
        match cmd_check(&scenario, &OutputDir(out.join(name)), seed) {
            Ok(r) => records.push(r),
            Err(e) => {
                log::error!("{name}: {e}");
                first_error.get_or_insert(e.with_context(name));
            }
        }
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(records),
    }
}

/// Gnuplot script header for the scan CSV of `scenario`.
pub fn gnuplot_header(scenario: &Scenario) -> String {
    let n = scenario.curves.len();
    let csv = &scenario.outputs.scan;
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str("set xlabel 'E'\nset ylabel 'omega'\n");
    s.push_str("set yzeroaxis\nset xzeroaxis\n");
    let plots: Vec<String> = (0..n)
        .map(|k| format!("'{csv}' using 1:{} with lines", k + 2))
        .collect();
    s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    s
}
