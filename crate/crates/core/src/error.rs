use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParams { name: &'static str, reason: String },

    #[error("photon distribution not converged: n_max exceeded the hard cap {cap}")]
    Truncation { cap: usize },

    #[error("thermal distribution not normalizable: theta_eff^2 (a - b) = {value} >= 1")]
    Normalizability { value: f64 },

    #[error("outside the domain of validity: {0}")]
    Domain(String),

    #[error("quadrature did not reach tolerance {tol:e} on [{lo}, {hi}]")]
    Quadrature { lo: f64, hi: f64, tol: f64 },

    #[error("theta = {theta} lies outside the branch image [{lo}, {hi}]")]
    Range { theta: f64, lo: f64, hi: f64 },

    #[error("no crossing: {0}")]
    NoCrossing(String),

    #[error("branch construction failed: {0}")]
    Branch(String),

    #[error("spectral computation failed: {0}")]
    Spectral(String),

    #[error("exponential fit failed: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
