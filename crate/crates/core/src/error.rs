use thiserror::Error;

/// Errors raised by the harvesting toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarvestError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("boundary 0 classified as entrance; the species would reappear after extinction")]
    EntranceBoundary,

    #[error("boundary classification at 0 is ambiguous ({0}); refine the probe parameters")]
    AmbiguousBoundary(String),

    #[error("increasing solution not isolated; refine grid or check parameters ({0})")]
    NotIncreasing(String),

    #[error("ODE residual {residual:e} exceeds tolerance {tol:e} at x = {x}")]
    Residual { x: f64, residual: f64, tol: f64 },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("x = {x} outside the solution range [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no admissible b̃; condition (i) fails on truncated domain (h still rising at x = {0})")]
    NoAdmissibleThreshold(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("LP build error: {0}")]
    LpBuild(String),

    #[error("simplex solver error: {0}")]
    Solver(String),
}

impl HarvestError {
    /// True for errors caused by bad user input rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            HarvestError::InvalidModel(_)
                | HarvestError::Config(_)
                | HarvestError::Domain(_)
                | HarvestError::OutOfRange { .. }
                | HarvestError::LpBuild(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, HarvestError>;
