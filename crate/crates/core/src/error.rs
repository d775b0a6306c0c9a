use thiserror::Error;

/// Errors raised by the numerical pipeline.
///
/// Each variant corresponds to one failure class; the CLI maps them to exit
/// codes (configuration errors vs. numerical failures).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("integration blow-up at t = {time}")]
    IntegrationBlowup { time: f64 },

    #[error("degenerate matrix at grid index {index} (|det| = {det:e})")]
    DegenerateMatrix { index: usize, det: f64 },

    #[error("fixed point for a(v) did not converge in {iterations} iterations (K = {k}); increase K")]
    KTooSmall { k: usize, iterations: usize },

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("contraction violated: measured factor {factor} at iteration {iteration}")]
    ContractionViolation { factor: f64, iteration: usize },

    #[error("solver error: {0}")]
    Solver(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("manifold graph is empty")]
    EmptyGraph,

    #[error("infeasible at resolution: {0}")]
    Infeasible(String),

    #[error("dissipativity monitor failure: {0}")]
    MonitorFailure(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by invalid user input rather than numerics.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::Configuration(_) | Error::Domain(_) | Error::SizeMismatch { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
