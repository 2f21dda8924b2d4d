//! Bound states of Schrödinger operators with attractive delta interactions
//! supported on closed curves.
//!
//! The crate assembles the principal operator `Φ(E)` of a curve system,
//! computes its spectral flow, solves for the ground state and evaluates the
//! associated wave function and renormalization-group flow.
//!
//! Units are canonical throughout: `ħ = 1` and `m = 1/2`, so the free
//! Hamiltonian is `-∇²`. [`geometry::UnitsConfig`] converts user-facing
//! values.
//!
//! ```
//! use curvebound::prelude::*;
//!
//! let manifold = Manifold::euclidean_space3();
//! let curve = CurveSpec::circle3(1.0, [0.0; 3], [0.0, 0.0, 1.0]);
//! let system = CurveSystem::new(
//!     manifold,
//!     &[curve],
//!     Scheme::bound_state_3d(vec![1.0]),
//!     &QuadratureConfig::default(),
//! )
//! .unwrap();
//! let solution = solve_ground_state(&system, &QuadratureConfig::default()).unwrap();
//! assert!((solution.energy + 1.0).abs() < 1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod curves;
pub mod geometry;
pub mod operator;
pub mod par;
pub mod quadrature;
pub mod rgflow;
pub mod special;
pub mod spectral;

mod error;

pub use error::Error;

/// Common imports.
pub mod prelude {
    pub use crate::config::QuadratureConfig;
    pub use crate::curves::{Curve, CurveSpec, CurveSystem};
    pub use crate::geometry::{Manifold, Point, UnitsConfig};
    pub use crate::operator::{PrincipalOperator, Scheme};
    pub use crate::par::Execution;
    pub use crate::rgflow::{flow_coupling, flow_constant, RgState};
    pub use crate::spectral::{
        eigen_flow, gershgorin_lower_bound, ground_state_wavefunction, solve_ground_state,
    };
    pub use crate::Error;
}
