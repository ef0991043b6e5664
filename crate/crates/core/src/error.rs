use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("ill-posed problem (condition number {condition:.3e}, cap {cap:.3e}) for plan {plan}")]
    IllPosed {
        condition: f64,
        cap: f64,
        plan: String,
    },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("integrator failure: {0}")]
    Integrator(String),

    #[error("spectrum does not cover plan points: missing detunings {0:?}")]
    MissingPoints(Vec<f64>),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
