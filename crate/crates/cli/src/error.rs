use curvebound::spectral::SpectralError;
use curvebound::Error as CoreError;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const IO: u8 = 1;
    pub const SCHEMA: u8 = 2;
    pub const GEOMETRY: u8 = 3;
    pub const NO_ROOT: u8 = 4;
    pub const INVARIANT: u8 = 5;
    pub const NUMERICAL: u8 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("scenario error: {0}")]
    Schema(String),
    #[error("geometry violation: {0}")]
    Geometry(String),
    #[error("no bound state: {0}")]
    NoRoot(String),
    #[error("invariant failure: {0}")]
    Invariant(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema(_) => exit::SCHEMA,
            CliError::Geometry(_) => exit::GEOMETRY,
            CliError::NoRoot(_) => exit::NO_ROOT,
            CliError::Invariant(_) => exit::INVARIANT,
            CliError::Numerical(_) => exit::NUMERICAL,
            CliError::Io(_) => exit::IO,
        }
    }

    pub fn with_context(self, ctx: &str) -> Self {
        let wrap = |m: String| format!("{ctx}: {m}");
        match self {
            CliError::Schema(m) => CliError::Schema(wrap(m)),
            CliError::Geometry(m) => CliError::Geometry(wrap(m)),
            CliError::NoRoot(m) => CliError::NoRoot(wrap(m)),
            CliError::Invariant(m) => CliError::Invariant(wrap(m)),
            CliError::Numerical(m) => CliError::Numerical(wrap(m)),
            CliError::Io(m) => CliError::Io(wrap(m)),
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::NoBoundState { .. } | SpectralError::Gershgorin { .. } => {
                CliError::NoRoot(e.to_string())
            }
            SpectralError::Invariant(_) => CliError::Invariant(e.to_string()),
            SpectralError::Grid(_) => CliError::Schema(e.to_string()),
            SpectralError::Operator(op) => CoreError::from(op).into(),
            SpectralError::Root(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        use curvebound::operator::OperatorError;
        match e {
            CoreError::Geometry(_) | CoreError::Curve(_) => CliError::Geometry(e.to_string()),
            CoreError::Operator(OperatorError::Geometry(_)) => CliError::Geometry(e.to_string()),
            CoreError::Operator(OperatorError::Scheme(_) | OperatorError::Unsupported(_)) => {
                CliError::Schema(e.to_string())
            }
            CoreError::Operator(_) | CoreError::Flow(_) => CliError::Numerical(e.to_string()),
            CoreError::Spectral(s) => s.into(),
        }
    }
}

impl From<curvebound::operator::OperatorError> for CliError {
    fn from(e: curvebound::operator::OperatorError) -> Self {
        CoreError::from(e).into()
    }
}

impl From<curvebound::rgflow::FlowError> for CliError {
    fn from(e: curvebound::rgflow::FlowError) -> Self {
        CoreError::from(e).into()
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
