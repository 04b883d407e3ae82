use thiserror::Error;

/// Errors produced by the lattice toolkit.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("frame rescaling is undefined for epsilon = 0")]
    UndefinedScaling,

    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:e})")]
    Diverged {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("pole at phi = -1")]
    Pole,

    #[error("eigenvalue iteration failed to converge after {0} sweeps")]
    EigenNoConvergence(usize),

    #[error("profile does not match parameters: {0}")]
    Provenance(String),

    #[error("degenerate adjoint frame: pairing {0:e}")]
    DegenerateFrame(f64),

    #[error("eigenvalue tracking failed: {0}")]
    Tracking(String),

    #[error("non-finite state at t = {last_good_time}")]
    BlowUp { last_good_time: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid decay window: {0}")]
    InvalidWindow(String),

    #[error("no crossings occur without damping")]
    NoCrossing,

    #[error("modulation fit failed: {0}")]
    Fit(String),

    #[error("state is outside the fit basin (distance {0:.3e})")]
    OutOfBasin(f64),

    #[error("numerical check failed: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
