use thiserror::Error;

use crate::curves::CurveError;
use crate::geometry::GeometryError;
use crate::operator::OperatorError;
use crate::rgflow::FlowError;
use crate::spectral::SpectralError;

/// Top-level error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}
