use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation (non-finite
    /// values, wrong dimension).
    #[error("domain error: {0}")]
    Domain(String),

    /// A specification failed validation at construction time.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    /// The homogeneous function does not satisfy the smoothness / maximizer
    /// structure required by the tail expansion.
    #[error("condition violation [{check}]: {detail}")]
    ConditionViolation { check: String, detail: String },

    /// Spherical chart evaluated too close to one of its poles.
    #[error("chart singularity: sin(phi_{index}) = {sin_value:.3e} is below the chart threshold; use a rotated chart")]
    ChartSingular { index: usize, sin_value: f64 },

    /// Asymptotic formula requested below its validity floor.
    #[error("x = {x} is below the validity floor {floor} of the asymptotic expansion; use Monte Carlo instead")]
    BelowValidityFloor { x: f64, floor: f64 },

    /// Gaussian simulation could not be set up (indefinite covariance).
    #[error("simulation error: {0}")]
    Simulation(String),

    /// A formula was requested for a model it does not apply to.
    #[error("not applicable: {0}")]
    Applicability(String),

    /// A cached constant needed by a formula is absent.
    #[error("missing constant in cache: {key}")]
    MissingConstant { key: String },

    /// The truncated Piterbarg horizon leaves too much mass outside.
    #[error("truncation bound {bound:.3e} exceeds 10% of the estimate {estimate:.3e}; increase the horizon S (try S >= {suggested})")]
    HorizonTooShort { bound: f64, estimate: f64, suggested: f64 },

    /// A caller-side precondition failed.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn condition(check: &str, detail: impl Into<String>) -> Error {
    Error::ConditionViolation { check: check.to_string(), detail: detail.into() }
}
