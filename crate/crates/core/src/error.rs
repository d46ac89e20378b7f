use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("state outside the evaluable domain: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("money is not desirable at this state (dS/dM = {0})")]
    SingularDerivative(f64),
    #[error("finite-difference step underflow near the domain boundary")]
    StepUnderflow,
    #[error("no root in bracket [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("encounter graph is not connected")]
    Disconnected,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("step too large: {0}")]
    StepTooLarge(String),
    #[error("leg infeasible: {0}")]
    LegInfeasible(String),
    #[error("script invalid: {0}")]
    Script(String),
    #[error("no equilibrium state: {0}")]
    NoEquilibrium(String),
    #[error("infeasible constraint: {0}")]
    Infeasible(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
