use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("subcriticality violated: progeny mass {0} >= 1, sampler would not terminate")]
    Supercritical(f64),

    #[error("dominating bound violated: rate {rate} exceeds bound {bound} at t = {t}")]
    BoundViolated { t: f64, rate: f64, bound: f64 },

    #[error("retention mass diverges: exact sampling impossible")]
    RetentionDiverges,

    #[error("retention envelope violated at distance {distance}: p = {prob} > envelope {envelope}")]
    EnvelopeViolated {
        distance: f64,
        prob: f64,
        envelope: f64,
    },

    #[error("retention probability unavailable in closed form")]
    RetentionUnavailable,

    #[error("conditioning event too rare for rejection (probability {0:e})")]
    ConditioningTooRare(f64),

    #[error("rejection attempt cap {cap} exceeded for germ at {location:?} (retention {retention:e})")]
    AttemptCapExceeded {
        cap: u64,
        location: Vec<f64>,
        retention: f64,
    },

    #[error("cluster point cap {0} exceeded")]
    PointCapExceeded(usize),

    #[error("distribution of T not computable: no closed-form tail and no dominating sequence")]
    TailNotComputable,

    #[error("grid too coarse: quadrature error estimate {estimate:e} above tolerance {tol:e}")]
    GridTooCoarse { estimate: f64, tol: f64 },

    #[error("supplied G does not bracket the fixed point (node t = {t}, deficit {deficit:e})")]
    BracketFailed { t: f64, deficit: f64 },

    #[error("sandwich did not reach tolerance after {iterations} iterations (gap {gap:e})")]
    SandwichNotConverged { iterations: usize, gap: f64 },

    #[error("{} dominated points left unclassified after refinement: {points:?}", points.len())]
    Unclassified { points: Vec<f64> },

    #[error("regeneration gap search exceeded horizon {horizon} (expected search distance {expected:.3})")]
    GapSearchExceeded { horizon: f64, expected: f64 },

    #[error("buffer radius undefined; use exact sampler")]
    UnboundedSupport,

    #[error("sample too small for asymptotic test: {got} < {min}")]
    SampleTooSmall { got: usize, min: usize },

    #[error("incompatible request: {0}")]
    Incompatible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
