use thiserror::Error;

/// Malformed expression text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {0} (must be between 2 and 8)")]
    InvalidDimension(usize),

    #[error("non-finite component in vector")]
    NonFinite,

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unbound variable `{0}`")]
    UnboundVariable(String),

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("tangent is null at sample {sample}")]
    NullCurve { sample: usize },

    #[error("causal character of the tangent changes at sample {sample}")]
    MixedCausality { sample: usize },

    #[error("curve is not regular at sample {sample} (speed vanishes)")]
    DegenerateCurve { sample: usize },

    #[error("curve is not generic: Gram-Schmidt vector {index} degenerates at sample {sample}")]
    NonGenericCurve { index: usize, sample: usize },

    #[error("closed curve admits no periodic f1: loop integral {residual:e} is not zero")]
    IncompatibleClosedFlow { residual: f64 },

    #[error("speed f{index} is not periodic on the closed curve: f(0) and f(L) differ by {jump:e} (L = {length})")]
    NonPeriodicSpeed { index: usize, jump: f64, length: f64 },

    #[error("tangent became null during evolution at t = {t}")]
    NullCurveDeveloped { t: f64 },

    #[error("evolution became unstable at t = {t}: {reason}")]
    Stability { t: f64, reason: String },

    #[error("need at least {needed} trajectory states, found {found}")]
    InsufficientStates { needed: usize, found: usize },

    #[error("flow is not inextensible: max |df1/ds - e0 e1 f2 k1| = {violation:e}")]
    NotInextensible { violation: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
