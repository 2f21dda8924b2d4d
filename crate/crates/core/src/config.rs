//! Numerical configuration shared by the operator, spectral and flow modules.

use serde::{Deserialize, Serialize};

use crate::par::Execution;

/// Quadrature and execution parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Trapezoid nodes per curve in the outer arclength variable.
    pub nodes: usize,
    /// Gauss–Legendre order per panel.
    pub gauss_order: usize,
    /// Uniform panels on the half-period away from the diagonal.
    pub uniform_panels: usize,
    /// Ratio of consecutive graded panels near the diagonal.
    pub grading_ratio: f64,
    /// Smallest graded panel relative to the smallest length scale.
    pub relative_floor: f64,
    /// Step of the trapezoid rule in logarithmic time.
    pub time_step: f64,
    /// Dump per-entry diagnostics when assembling.
    pub diagnostics: bool,
    pub execution: Execution,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            nodes: 256,
            gauss_order: 16,
            uniform_panels: 32,
            grading_ratio: 0.5,
            relative_floor: 1e-14,
            time_step: 0.2,
            diagnostics: false,
            execution: Execution::default(),
        }
    }
}

impl QuadratureConfig {
    /// Twice the nodes and panels, for error estimates.
    pub fn refined(&self) -> Self {
        Self {
            nodes: self.nodes * 2,
            gauss_order: self.gauss_order + 8,
            uniform_panels: self.uniform_panels * 2,
            grading_ratio: self.grading_ratio.sqrt(),
            time_step: self.time_step * 0.5,
            ..self.clone()
        }
    }

    /// Half the nodes and panels, for cheap error estimates.
    pub fn coarsened(&self) -> Self {
        Self {
            nodes: (self.nodes / 2).max(32),
            gauss_order: (self.gauss_order.saturating_sub(4)).max(8),
            uniform_panels: (self.uniform_panels / 2).max(8),
            ..self.clone()
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }
}
