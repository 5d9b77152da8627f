use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("scheme unavailable for {kind}: {reason}")]
    SchemeUnavailable { kind: String, reason: String },

    #[error("Euler step produced a non-finite state on path {path} at t = {time}")]
    StepUnstable { path: usize, time: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("mapping `{mapping}` is undefined at the state on path {path}")]
    MappingDomain { mapping: String, path: usize },

    #[error("model outside the scope of this check: {0}")]
    OutOfScope(String),

    #[error("call price {target} violates the no-arbitrage interval ({lower}, {upper})")]
    NoArbViolation { target: f64, lower: f64, upper: f64 },

    #[error("implied volatility not bracketed by [{lo}, {hi}] for target {target}")]
    VolBracket { target: f64, lo: f64, hi: f64 },

    #[error("statistical failure: {0}")]
    StatisticalFailure(String),

    #[error("limit law is degenerate; the check does not apply")]
    DegenerateLimit,

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("empty sample")]
    EmptySample,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
