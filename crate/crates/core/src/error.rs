use alloc::string::String;

/// Errors produced by the estimation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("TV radius {0} outside [0, 1]")]
    InvalidRadius(f64),

    #[error("innovation covariance of mode {mode} is singular at step {step} (eigenvalue ratio {ratio:e})")]
    SingularInnovation { mode: usize, step: usize, ratio: f64 },

    #[error("covariance is not positive definite")]
    NotPositiveDefinite,

    #[error("all mode likelihoods vanish; evidence is degenerate")]
    DegenerateEvidence,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("filter failed at step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = core::result::Result<T, Error>;
