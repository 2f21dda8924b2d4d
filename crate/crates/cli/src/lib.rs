//! Batch front end for `curvebound`: scenario files, subcommands and the
//! invariant suite.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod check;
pub mod commands;
pub mod error;
pub mod output;
pub mod scenario;

pub use commands::{cmd_check, cmd_rgflow, cmd_scan, cmd_solve, cmd_wavefunction, OutputDir, RunRecord};
pub use error::CliError;
pub use scenario::Scenario;
