//! Spectral problem of the principal operator: eigenvalue flow in `E`,
//! ground-state root, Geršgorin lower bound, wave function and positivity.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use roots::{find_root_brent, Convergency};
use serde::Serialize;
use thiserror::Error;

use crate::config::QuadratureConfig;
use crate::curves::CurveSystem;
use crate::geometry::{Point, GeometryError};
use crate::operator::{OperatorError, PrincipalOperator, Scheme};
use crate::par::{map_slice, try_map_range};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("no bound state: lowest eigenvalue keeps its sign on [{e_min:e}, {e_max:e}]")]
    NoBoundState { e_min: f64, e_max: f64 },
    #[error("Geršgorin criterion not satisfied down to E = {e_min:e}")]
    Gershgorin { e_min: f64 },
    #[error("invalid energy grid: {0}")]
    Grid(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("root search failed: {0}")]
    Root(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

impl From<GeometryError> for SpectralError {
    fn from(e: GeometryError) -> Self {
        SpectralError::Operator(e.into())
    }
}

/// Root-finding controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Deepest energy searched.
    pub e_min: f64,
    /// Shallowest energy searched when the scheme has no natural seed.
    pub e_max: f64,
    /// Relative tolerance on the root, `|ΔE| < rel_tol·|E|`.
    pub rel_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            e_min: -1e8,
            e_max: -1e-12,
            rel_tol: 1e-12,
            max_iterations: 200,
        }
    }
}

/// Sorted eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Columns are unit eigenvectors in the order of `values`.
    pub vectors: DMatrix<f64>,
}

pub fn sorted_eigen(m: &DMatrix<f64>) -> Eigen {
    let n = m.nrows();
    let se = SymmetricEigen::new(m.clone());
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values = idx.iter().map(|&k| se.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &k) in idx.iter().enumerate() {
        let mut v = se.eigenvectors.column(k).clone_owned();
        if v.sum() < 0.0 {
            v = -v;
        }
        vectors.set_column(c, &v);
    }
    Eigen { values, vectors }
}

/// Eigenvalue curves `ω⁽ᵏ⁾(E)` on a grid, tracked by eigenvector overlap.
#[derive(Debug, Clone, Serialize)]
pub struct EigenFlow {
    pub energies: Vec<f64>,
    /// `eigenvalues[p][k]`: curve `k` at grid point `p`.
    pub eigenvalues: Vec<Vec<f64>>,
    /// `A⁽ᵏ⁾·∂Φ/∂E·A⁽ᵏ⁾`.
    pub slopes: Vec<Vec<f64>>,
    /// Grid points where overlap tracking was ambiguous; curves there are
    /// re-sorted by value.
    pub crossings: Vec<usize>,
}

impl EigenFlow {
    pub fn curves(&self) -> usize {
        self.eigenvalues.first().map_or(0, Vec::len)
    }

    /// Largest slope over all curves and grid points.
    pub fn max_slope(&self) -> f64 {
        self.slopes
            .iter()
            .flatten()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sign changes of every tracked curve, located by linear interpolation.
    pub fn zero_crossings(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for k in 0..self.curves() {
            for p in 1..self.energies.len() {
                let (a, b) = (self.eigenvalues[p - 1][k], self.eigenvalues[p][k]);
                if a == 0.0 {
                    out.push((k, self.energies[p - 1]));
                } else if a * b < 0.0 {
                    let (ea, eb) = (self.energies[p - 1], self.energies[p]);
                    out.push((k, ea + (eb - ea) * a / (a - b)));
                }
            }
        }
        out
    }
}

/// Eigenvalue flow of `Φ(E)` over an increasing grid.
pub fn eigen_flow(
    system: &CurveSystem,
    config: &QuadratureConfig,
    grid: &[f64],
) -> Result<EigenFlow, SpectralError> {
    let op = PrincipalOperator::new(system, config)?;
    eigen_flow_with(&op, grid)
}

pub fn eigen_flow_with(op: &PrincipalOperator<'_>, grid: &[f64]) -> Result<EigenFlow, SpectralError> {
    if grid.is_empty() {
        return Err(SpectralError::Grid("empty grid".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(SpectralError::Grid("grid must be strictly increasing".into()));
    }
    let limit = op.system().scheme().energy_limit();
    if let Some(e) = grid.iter().find(|e| !(**e < limit)) {
        return Err(SpectralError::Grid(format!("energy {e} outside E < {limit}")));
    }
    let exec = op.config().execution;
    let points = try_map_range(exec, grid.len(), |p| {
        let m = op.matrix(grid[p])?.values;
        let d = op.derivative(grid[p])?;
        Ok::<_, OperatorError>((sorted_eigen(&m), d))
    })?;
    let n = op.len();
    let mut eigenvalues = Vec::with_capacity(grid.len());
    let mut slopes = Vec::with_capacity(grid.len());
    let mut crossings = Vec::new();
    let mut prev: Option<DMatrix<f64>> = None;
    for (p, (eig, d)) in points.iter().enumerate() {
        // order[k] = column of this point's decomposition assigned to curve k
        let mut order: Vec<usize> = (0..n).collect();
        if let Some(pv) = &prev {
            let mut taken = vec![false; n];
            let mut ambiguous = false;
            for k in 0..n {
                let mut best = (0.0, usize::MAX);
                let mut second: f64 = 0.0;
                for c in 0..n {
                    let o = pv.column(k).dot(&eig.vectors.column(c)).abs();
                    if o > best.0 {
                        second = second.max(best.0);
                        best = (o, c);
                    } else {
                        second = second.max(o);
                    }
                }
                if best.1 == usize::MAX || taken[best.1] || best.0 - second < 0.1 {
                    ambiguous = true;
                    break;
                }
                taken[best.1] = true;
                order[k] = best.1;
            }
            if ambiguous {
                crossings.push(p);
                order = (0..n).collect();
            }
        }
        let mut tracked = DMatrix::zeros(n, n);
        for (k, &c) in order.iter().enumerate() {
            tracked.set_column(k, &eig.vectors.column(c));
        }
        eigenvalues.push(order.iter().map(|&c| eig.values[c]).collect());
        slopes.push(
            (0..n)
                .map(|k| {
                    let a = tracked.column(k);
                    a.dot(&(d * a))
                })
                .collect(),
        );
        prev = Some(tracked);
    }
    Ok(EigenFlow {
        energies: grid.to_vec(),
        eigenvalues,
        slopes,
        crossings,
    })
}

/// Ground state of the system.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralSolution {
    pub energy: f64,
    /// Unit Perron vector `A⁽⁰⁾`, positive components.
    pub eigenvector: Vec<f64>,
    /// `A⁽⁰⁾·∂Φ/∂E·A⁽⁰⁾` at the root.
    pub omega_slope: f64,
    /// `|ω′|^{-1/2}`.
    pub normalization: f64,
    pub bracket: (f64, f64),
    /// `|ω⁽⁰⁾(E_gr)|`.
    pub residual: f64,
    /// `ω⁽¹⁾ − ω⁽⁰⁾` at the root (infinite for one curve).
    pub gap: f64,
    pub evaluations: usize,
}

struct RelativeTolerance {
    rel: f64,
    max_iter: usize,
}

impl Convergency<f64> for RelativeTolerance {
    fn is_root_found(&mut self, y: f64) -> bool {
        y == 0.0
    }

    fn is_converged(&mut self, x1: f64, x2: f64) -> bool {
        (x1 - x2).abs() <= self.rel * x1.abs().max(x2.abs())
    }

    fn is_iteration_limit_reached(&mut self, iter: usize) -> bool {
        iter >= self.max_iter
    }
}

/// Solve `ω⁽⁰⁾(E) = 0` with default solver options.
pub fn solve_ground_state(
    system: &CurveSystem,
    config: &QuadratureConfig,
) -> Result<SpectralSolution, SpectralError> {
    let op = PrincipalOperator::new(system, config)?;
    solve_ground_state_with(&op, &SolverOptions::default())
}

fn lowest(op: &PrincipalOperator<'_>, e: f64) -> Result<f64, SpectralError> {
    let m = op.matrix(e)?.values;
    Ok(if m.nrows() == 1 {
        m[(0, 0)]
    } else {
        sorted_eigen(&m).values[0]
    })
}

/// Find `[E_lo, E_hi]` with `ω⁽⁰⁾(E_lo) > 0 ≥ ω⁽⁰⁾(E_hi)`.
fn bracket(
    op: &PrincipalOperator<'_>,
    opts: &SolverOptions,
    evals: &mut usize,
) -> Result<(f64, f64, f64), SpectralError> {
    let mut w = |e: f64| {
        *evals += 1;
        lowest(op, e)
    };
    let no_state = SpectralError::NoBoundState {
        e_min: opts.e_min,
        e_max: opts.e_max,
    };
    if let Scheme::BoundState3D { binding_wavenumbers } = op.system().scheme() {
        // the curve with the deepest single-curve level makes ω⁽⁰⁾ ≤ 0 there
        let nu = binding_wavenumbers.iter().cloned().fold(0.0, f64::max);
        let hi = -nu * nu;
        let w_hi = w(hi)?;
        let m = op.matrix(hi)?.values;
        let tol = 16.0 * f64::EPSILON * m.amax();
        if w_hi > tol {
            return Err(SpectralError::Invariant(format!(
                "lowest eigenvalue {w_hi:e} > 0 at the single-curve level {hi}"
            )));
        }
        if w_hi >= 0.0 {
            // couplings too weak to move the root off the level in f64
            return Ok((hi, hi, 0.0));
        }
        let mut delta = 1e-3;
        loop {
            let lo = hi * (1.0 + delta);
            if lo < opts.e_min {
                return Err(no_state);
            }
            let w_lo = w(lo)?;
            if w_lo > 0.0 {
                return Ok((lo, hi, w_hi));
            }
            delta *= 2.0;
        }
    }
    let len = op
        .system()
        .curves()
        .iter()
        .map(|c| c.length())
        .fold(0.0, f64::max);
    let mut e = (-1.0 / (len * len)).clamp(opts.e_min, opts.e_max);
    let mut we = w(e)?;
    if we > 0.0 {
        loop {
            let up = (0.25 * e).min(opts.e_max);
            if up <= e || up > opts.e_max {
                return Err(no_state);
            }
            let wu = w(up)?;
            if wu <= 0.0 {
                return Ok((e, up, wu));
            }
            if up == opts.e_max {
                return Err(no_state);
            }
            e = up;
        }
    } else {
        loop {
            let down = (4.0 * e).max(opts.e_min);
            if down >= e {
                return Err(no_state);
            }
            let wd = w(down)?;
            if wd > 0.0 {
                return Ok((down, e, we));
            }
            if down == opts.e_min {
                return Err(no_state);
            }
            e = down;
            we = wd;
        }
    }
}

/// Perron vector of a matrix with negative off-diagonal entries, refined by
/// inverse iteration from a positive start so that no component loses its
/// sign to rounding.
fn perron_vector(m: &DMatrix<f64>, omega: f64, gap: f64) -> DVector<f64> {
    let n = m.nrows();
    if n == 1 {
        return DVector::from_element(1, 1.0);
    }
    let scale = m.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-300);
    let shift = omega - (1e-3 * gap).max(1e-12 * scale);
    let shifted = m - DMatrix::identity(n, n) * shift;
    let lu = shifted.lu();
    let mut x = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    for _ in 0..30 {
        let Some(y) = lu.solve(&x) else { break };
        let y = &y / y.norm();
        let change = (&y - &x).norm();
        x = y;
        if change < 1e-15 {
            break;
        }
    }
    x
}

pub fn solve_ground_state_with(
    op: &PrincipalOperator<'_>,
    opts: &SolverOptions,
) -> Result<SpectralSolution, SpectralError> {
    let mut evals = 0;
    let (lo, hi, w_hi) = bracket(op, opts, &mut evals)?;
    let energy = if w_hi == 0.0 {
        hi
    } else {
        let mut err = None;
        let mut conv = RelativeTolerance {
            rel: opts.rel_tol,
            max_iter: opts.max_iterations,
        };
        let root = find_root_brent(
            lo,
            hi,
            |e| {
                evals += 1;
                match lowest(op, e) {
                    Ok(v) => v,
                    Err(x) => {
                        err.get_or_insert(x);
                        f64::NAN
                    }
                }
            },
            &mut conv,
        );
        if let Some(e) = err {
            return Err(e);
        }
        root.map_err(|e| SpectralError::Root(format!("{e:?}")))?
    };
    let m = op.matrix(energy)?.values;
    let eig = sorted_eigen(&m);
    let n = m.nrows();
    let gap = if n > 1 {
        eig.values[1] - eig.values[0]
    } else {
        f64::INFINITY
    };
    let a = perron_vector(&m, eig.values[0], if n > 1 { gap } else { 1.0 });
    let d = op.derivative(energy)?;
    let slope = a.dot(&(&d * &a));
    Ok(SpectralSolution {
        energy,
        eigenvector: a.iter().cloned().collect(),
        omega_slope: slope,
        normalization: slope.abs().powf(-0.5),
        bracket: (lo, hi),
        residual: eig.values[0].abs(),
        gap,
        evaluations: evals,
    })
}

/// One row of the Geršgorin certificate table.
#[derive(Debug, Clone, Serialize)]
pub struct GershgorinRow {
    pub energy: f64,
    /// `min_i [Φᵢᵢ − Σ_{j≠i} |Φᵢⱼ|]`.
    pub margin: f64,
    pub radii: Vec<f64>,
    pub centers: Vec<f64>,
}

/// Operational lower bound `E* ≤ E_gr`: below `E*` every Geršgorin disk of
/// `Φ(E)` lies in the right half-line.
#[derive(Debug, Clone, Serialize)]
pub struct GershgorinBound {
    pub e_star: f64,
    pub certificate: Vec<GershgorinRow>,
}

pub fn gershgorin_row(op: &PrincipalOperator<'_>, energy: f64) -> Result<GershgorinRow, SpectralError> {
    let m = op.matrix(energy)?.values;
    let n = m.nrows();
    let centers: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    let radii: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum())
        .collect();
    let margin = centers
        .iter()
        .zip(&radii)
        .map(|(c, r)| c - r)
        .fold(f64::INFINITY, f64::min);
    Ok(GershgorinRow {
        energy,
        margin,
        radii,
        centers,
    })
}

/// Bisection for the largest `E` with zero Geršgorin margin, searching
/// below `upper` (typically `E_gr`).
pub fn gershgorin_lower_bound(
    system: &CurveSystem,
    config: &QuadratureConfig,
    upper: f64,
) -> Result<GershgorinBound, SpectralError> {
    let op = PrincipalOperator::new(system, config)?;
    gershgorin_lower_bound_with(&op, upper, &SolverOptions::default())
}

pub fn gershgorin_lower_bound_with(
    op: &PrincipalOperator<'_>,
    upper: f64,
    opts: &SolverOptions,
) -> Result<GershgorinBound, SpectralError> {
    if op.len() < 2 {
        return Err(SpectralError::Invariant("Geršgorin bound needs at least two curves".into()));
    }
    let mut table = Vec::new();
    let mut hi = upper;
    let row = gershgorin_row(op, hi)?;
    let hi_margin = row.margin;
    let scale = row.centers.iter().chain(&row.radii).fold(0.0f64, |m, x| m.max(x.abs()));
    table.push(row);
    if hi_margin > 0.0 && hi_margin <= 1e-9 * scale {
        // two-curve symmetric systems: the margin is the lowest eigenvalue
        return Ok(GershgorinBound {
            e_star: upper,
            certificate: table,
        });
    }
    if hi_margin > 0.0 {
        return Err(SpectralError::Invariant(format!(
            "Geršgorin margin {hi_margin:e} > 0 at the upper energy {upper}"
        )));
    }
    let mut step = 1e-3 * upper.abs().max(1e-12);
    let lo = loop {
        let e = hi - step;
        if e < opts.e_min {
            return Err(SpectralError::Gershgorin { e_min: opts.e_min });
        }
        let row = gershgorin_row(op, e)?;
        let positive = row.margin > 0.0;
        table.push(row);
        if positive {
            break e;
        }
        hi = e;
        step *= 2.0;
    };
    let (mut a, mut b) = (lo, hi);
    for _ in 0..opts.max_iterations {
        if (b - a) <= opts.rel_tol * a.abs() {
            break;
        }
        let mid = 0.5 * (a + b);
        let row = gershgorin_row(op, mid)?;
        if row.margin > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        table.push(row);
    }
    table.sort_by(|x, y| x.energy.total_cmp(&y.energy));
    Ok(GershgorinBound {
        e_star: a,
        certificate: table,
    })
}

/// Value of `ψ_gr` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WavefunctionSample {
    pub point: Point,
    pub psi: f64,
    /// Closer than `1e-6·L` to some curve: the kernel is singular there
    /// and the value is unreliable.
    pub near_support: bool,
    /// Distance to the nearest node, in units of the node spacing.
    pub node_distance: f64,
}

/// `ψ_gr(x) = |ω′|^{-1/2} Σᵢ Lᵢ^{-1/2} ∫ds G_{E_gr}(x, γᵢ(s)) Aᵢ`.
pub fn ground_state_wavefunction(
    solution: &SpectralSolution,
    system: &CurveSystem,
    config: &QuadratureConfig,
    points: &[Point],
) -> Result<Vec<WavefunctionSample>, SpectralError> {
    let m = system.manifold();
    for p in points {
        m.validate_point(p)?;
    }
    let kappa = (-solution.energy).sqrt();
    let results = map_slice(config.execution, points, |x| {
        let mut psi = 0.0;
        let mut closest = f64::INFINITY;
        let mut near = false;
        for (c, a) in system.curves().iter().zip(&solution.eigenvector) {
            let h = c.node_spacing();
            let mut sum = 0.0;
            for q in c.nodes() {
                let d = m.distance_unchecked(&x.0, q);
                closest = closest.min(d / h);
                if d < 1e-6 * c.length() {
                    near = true;
                }
                sum += m.green(kappa, &x.0, q).unwrap_or(f64::INFINITY);
            }
            psi += a * sum * h / c.length().sqrt();
        }
        WavefunctionSample {
            point: *x,
            psi: solution.normalization * psi,
            near_support: near,
            node_distance: closest,
        }
    });
    for r in &results {
        if r.near_support {
            log::warn!("wave function evaluated on the support near {:?}", r.point);
        }
    }
    Ok(results)
}

/// Scale factor making `Σ ψ² ΔV = 1` over a sampled box of cell volume `cell`.
pub fn l2_box_normalization(samples: &[WavefunctionSample], cell: f64) -> f64 {
    let s: f64 = samples.iter().map(|w| w.psi * w.psi).sum::<f64>() * cell;
    1.0 / s.sqrt()
}

/// Perron–Frobenius structure at the ground state.
#[derive(Debug, Clone, Serialize)]
pub struct PositivityReport {
    /// `max_{i≠j} Φᵢⱼ(E_gr)`, negative when the structure holds.
    pub max_offdiagonal: f64,
    pub min_component: f64,
    pub gap: f64,
    pub passed: bool,
}

pub fn positivity_check(
    solution: &SpectralSolution,
    system: &CurveSystem,
    config: &QuadratureConfig,
) -> Result<PositivityReport, SpectralError> {
    let op = PrincipalOperator::new(system, config)?;
    let m = op.matrix(solution.energy)?.values;
    let n = m.nrows();
    let mut max_off = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                max_off = max_off.max(m[(i, j)]);
            }
        }
    }
    let min_component = solution.eigenvector.iter().cloned().fold(f64::INFINITY, f64::min);
    let report = PositivityReport {
        max_offdiagonal: max_off,
        min_component,
        gap: solution.gap,
        passed: (n == 1 || max_off < 0.0) && min_component > 0.0 && solution.gap > 0.0,
    };
    if !report.passed {
        return Err(SpectralError::Invariant(format!(
            "Perron–Frobenius structure violated: max offdiagonal {max_off:e}, min component {min_component:e}, gap {:e}",
            solution.gap
        )));
    }
    Ok(report)
}

#[cfg(test)]
mod tests;
