//! Scenario documents: parsing, validation and system construction.

use std::path::{Path, PathBuf};

use curvebound::config::QuadratureConfig;
use curvebound::curves::{parse_point_table, CurveSpec, CurveSystem};
use curvebound::geometry::{Manifold, ManifoldKind, UnitsConfig};
use curvebound::operator::Scheme;
use curvebound::spectral::SolverOptions;
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// One curve of a scenario: an inline specification or a table of points
/// read from a file relative to the scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum CurveInput {
    Spec(CurveSpec),
    PointTable { point_table: PathBuf },
}

impl<'de> Deserialize<'de> for CurveInput {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let value = serde_json::Value::deserialize(d)?;
        if let Some(obj) = value.as_object() {
            if let Some(path) = obj.get("point_table") {
                if obj.len() != 1 {
                    return Err(D::Error::custom("point_table entries take no other fields"));
                }
                let path = path
                    .as_str()
                    .ok_or_else(|| D::Error::custom("point_table must be a string"))?;
                return Ok(CurveInput::PointTable {
                    point_table: PathBuf::from(path),
                });
            }
        }
        CurveSpec::deserialize(value).map(CurveInput::Spec).map_err(D::Error::custom)
    }
}

/// Energy grid for `scan`, in user energy units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyGrid {
    pub e_min: f64,
    pub e_max: f64,
    pub points: usize,
}

impl EnergyGrid {
    /// Uniform grid, deepest energy first.
    pub fn energies(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|k| self.e_min + (self.e_max - self.e_min) * k as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Rectilinear sampling box for `wavefunction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxGrid {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    pub points: [usize; 3],
}

impl BoxGrid {
    pub fn axis(&self, k: usize) -> Vec<f64> {
        let n = self.points[k];
        if n == 1 {
            return vec![0.5 * (self.lower[k] + self.upper[k])];
        }
        (0..n)
            .map(|i| self.lower[k] + (self.upper[k] - self.lower[k]) * i as f64 / (n - 1) as f64)
            .collect()
    }

    /// Grid points in x-fastest order.
    pub fn points(&self) -> Vec<[f64; 3]> {
        let (xs, ys, zs) = (self.axis(0), self.axis(1), self.axis(2));
        let mut out = Vec::with_capacity(xs.len() * ys.len() * zs.len());
        for z in &zs {
            for y in &ys {
                for x in &xs {
                    out.push([*x, *y, *z]);
                }
            }
        }
        out
    }

    pub fn cell_volume(&self, dimension: usize) -> f64 {
        (0..dimension)
            .map(|k| {
                if self.points[k] > 1 {
                    (self.upper[k] - self.lower[k]) / (self.points[k] - 1) as f64
                } else {
                    1.0
                }
            })
            .product()
    }
}

fn default_taus() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0]
}

fn default_scaling_energies() -> Vec<f64> {
    vec![-0.5, -1.0, -2.0]
}

fn default_ode_steps() -> usize {
    400
}

/// Tolerances, node counts and grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub root: SolverOptions,
    #[serde(default)]
    pub scan: Option<EnergyGrid>,
    #[serde(default)]
    pub wavefunction: Option<BoxGrid>,
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
    /// Energies of the scaling-law table, in user units.
    #[serde(default = "default_scaling_energies")]
    pub scaling_energies: Vec<f64>,
    #[serde(default = "default_ode_steps")]
    pub ode_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            quadrature: QuadratureConfig::default(),
            root: SolverOptions::default(),
            scan: None,
            wavefunction: None,
            taus: default_taus(),
            scaling_energies: default_scaling_energies(),
            ode_steps: default_ode_steps(),
        }
    }
}

/// File names of the artifacts, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub record: String,
    pub scan: String,
    pub wavefunction: String,
    pub rgflow: String,
    pub check: String,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            record: "record.json".into(),
            scan: "scan.csv".into(),
            wavefunction: "wavefunction.csv".into(),
            rgflow: "rgflow.csv".into(),
            check: "check.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub units: UnitsConfig,
    pub manifold: ManifoldKind,
    pub curves: Vec<CurveInput>,
    pub scheme: Scheme,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub outputs: Outputs,
}

impl Scenario {
    /// Parse a scenario, reporting the failing field path and position.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            CliError::Schema(format!(
                "field `{path}`: {inner} (line {}, column {})",
                inner.line(),
                inner.column()
            ))
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Read a scenario file; point tables resolve relative to its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut scenario =
            Self::from_json(&text).map_err(|e| e.with_context(&path.display().to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        scenario.inline_point_tables(base)?;
        Ok(scenario)
    }

    /// Replace point-table references by inline sampled specs.
    pub fn inline_point_tables(&mut self, base: &Path) -> Result<(), CliError> {
        for c in &mut self.curves {
            if let CurveInput::PointTable { point_table } = c {
                let full = base.join(&point_table);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| CliError::Io(format!("{}: {e}", full.display())))?;
                let points = parse_point_table(&text)
                    .map_err(|e| CliError::Schema(format!("{}: {e}", full.display())))?;
                *c = CurveInput::Spec(CurveSpec::sampled(points));
            }
        }
        Ok(())
    }

    /// Checks that need no geometry: compatibility and positive tolerances.
    pub fn validate(&self) -> Result<(), CliError> {
        let schema = |m: String| Err(CliError::Schema(m));
        self.units.validate().map_err(|e| CliError::Schema(e.to_string()))?;
        let manifold = Manifold::new(self.manifold).map_err(|e| CliError::Schema(e.to_string()))?;
        if self.curves.is_empty() {
            return schema("`curves` must list at least one curve".into());
        }
        self.scheme
            .validate(&manifold, self.curves.len())
            .map_err(|e| CliError::Schema(format!("scheme: {e}")))?;
        let q = &self.solver.quadrature;
        if q.nodes < curvebound::curves::MIN_NODES {
            return schema(format!(
                "solver.quadrature.nodes must be at least {}, got {}",
                curvebound::curves::MIN_NODES,
                q.nodes
            ));
        }
        if q.gauss_order == 0 || q.uniform_panels == 0 {
            return schema("solver.quadrature: gauss_order and uniform_panels must be positive".into());
        }
        for (name, v) in [
            ("solver.quadrature.time_step", q.time_step),
            ("solver.quadrature.relative_floor", q.relative_floor),
            ("solver.root.rel_tol", self.solver.root.rel_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return schema(format!("{name} must be positive, got {v}"));
            }
        }
        if !(q.grading_ratio > 0.0 && q.grading_ratio < 1.0) {
            return schema(format!(
                "solver.quadrature.grading_ratio must lie in (0, 1), got {}",
                q.grading_ratio
            ));
        }
        let r = &self.solver.root;
        if !(r.e_min < r.e_max && r.e_max < 0.0) {
            return schema(format!(
                "solver.root requires e_min < e_max < 0, got [{}, {}]",
                r.e_min, r.e_max
            ));
        }
        if r.max_iterations == 0 {
            return schema("solver.root.max_iterations must be positive".into());
        }
        if let Some(g) = &self.solver.scan {
            if g.points < 2 || !(g.e_min < g.e_max) || !(g.e_max < 0.0) {
                return schema(format!(
                    "solver.scan requires points >= 2 and e_min < e_max < 0, got {g:?}"
                ));
            }
        }
        if let Some(b) = &self.solver.wavefunction {
            if b.points.contains(&0) || (0..3).any(|k| b.lower[k] > b.upper[k]) {
                return schema(format!("solver.wavefunction box is empty: {b:?}"));
            }
        }
        if self.solver.taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return schema(format!("solver.taus must be positive, got {:?}", self.solver.taus));
        }
        if self.solver.scaling_energies.iter().any(|e| !(e.is_finite() && *e < 0.0)) {
            return schema(format!(
                "solver.scaling_energies must be negative, got {:?}",
                self.solver.scaling_energies
            ));
        }
        if self.solver.ode_steps == 0 {
            return schema("solver.ode_steps must be positive".into());
        }
        Ok(())
    }

    pub fn manifold(&self) -> Manifold {
        Manifold::new(self.manifold).expect("validated")
    }

    pub fn specs(&self) -> Result<Vec<CurveSpec>, CliError> {
        self.curves
            .iter()
            .map(|c| match c {
                CurveInput::Spec(s) => Ok(s.clone()),
                CurveInput::PointTable { point_table } => Err(CliError::Schema(format!(
                    "point table {} was not loaded",
                    point_table.display()
                ))),
            })
            .collect()
    }

    pub fn quadrature(&self) -> &QuadratureConfig {
        &self.solver.quadrature
    }

    pub fn build_system(&self) -> Result<CurveSystem, CliError> {
        let system = CurveSystem::new(
            self.manifold(),
            &self.specs()?,
            self.scheme.clone(),
            self.quadrature(),
        )?;
        Ok(system)
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "manifold": {"kind": "euclidean_space3"},
        "curves": [{"type": "circle", "radius": 1.0}],
        "scheme": {"kind": "bound_state_3d", "binding_wavenumbers": [1.0]}
    }"#;

    #[test]
    fn minimal_scenario_uses_defaults() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(s.units, UnitsConfig::default());
        assert_eq!(s.solver.quadrature, QuadratureConfig::default());
        assert_eq!(s.outputs.record, "record.json");
    }

    #[test]
    fn unknown_field_reports_path() {
        let text = MINIMAL.replace("\"radius\": 1.0", "\"radius\": 1.0, \"radus\": 2.0");
        let err = Scenario::from_json(&text).unwrap_err();
        assert!(matches!(err, CliError::Schema(_)));
        let msg = err.to_string();
        assert!(msg.contains("curves[0]"), "{msg}");
        assert!(msg.contains("radus"), "{msg}");
    }

    #[test]
    fn planar_scheme_in_space_is_a_schema_error() {
        let text = MINIMAL.replace(
            r#"{"kind": "bound_state_3d", "binding_wavenumbers": [1.0]}"#,
            r#"{"kind": "finite_2d", "couplings": [5.0]}"#,
        );
        let err = Scenario::from_json(&text).unwrap_err();
        assert!(matches!(err, CliError::Schema(_)), "{err}");
    }

    #[test]
    fn wrong_type_reports_line() {
        let text = MINIMAL.replace("1.0}]", "\"one\"}]");
        let msg = Scenario::from_json(&text).unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn nonpositive_tolerance_rejected() {
        let text = MINIMAL.replace(
            "\"scheme\"",
            "\"solver\": {\"root\": {\"rel_tol\": 0.0}}, \"scheme\"",
        );
        assert!(matches!(Scenario::from_json(&text), Err(CliError::Schema(_))));
    }

    #[test]
    fn hash_ignores_whitespace() {
        let a = Scenario::from_json(MINIMAL).unwrap();
        let b = Scenario::from_json(&MINIMAL.replace('\n', " ")).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let c = Scenario::from_json(&MINIMAL.replace("1.0}]", "1.5}]")).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn grids() {
        let g = EnergyGrid {
            e_min: -4.0,
            e_max: -1.0,
            points: 4,
        };
        assert_eq!(g.energies(), vec![-4.0, -3.0, -2.0, -1.0]);
        let b = BoxGrid {
            lower: [-1.0, 0.0, 2.0],
            upper: [1.0, 0.0, 2.0],
            points: [3, 1, 1],
        };
        assert_eq!(b.points(), vec![[-1.0, 0.0, 2.0], [0.0, 0.0, 2.0], [1.0, 0.0, 2.0]]);
        assert_eq!(b.cell_volume(1), 1.0);
    }

    #[test]
    fn point_table_entries() {
        let text = MINIMAL.replace(
            r#"{"type": "circle", "radius": 1.0}"#,
            r#"{"point_table": "square.txt"}"#,
        );
        let s = Scenario::from_json(&text).unwrap();
        assert!(matches!(&s.curves[0], CurveInput::PointTable { point_table } if point_table == Path::new("square.txt")));
        assert!(s.specs().is_err());
    }
}
