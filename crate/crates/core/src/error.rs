use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Adaptive quadrature ran out of subdivisions before meeting its tolerance.
    #[error("quadrature did not converge after {subdivisions} subdivisions (estimate {estimate:e}, error {error:e})")]
    NonConvergence {
        subdivisions: usize,
        estimate: f64,
        error: f64,
    },

    /// The operation needs a finite correlation width; use the delta-limit routines instead.
    #[error("epsilon = 0 selects the delta-correlation limit; {0} is undefined there")]
    DeltaLimit(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("estimator needs at least one event")]
    EmptyInput,

    #[error("estimator weights must sum to 1 (got {0})")]
    Weight(f64),
}
