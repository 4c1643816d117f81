use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("level {level}: expected {expected} mask values, found {found}")]
    LevelLength {
        level: u32,
        expected: usize,
        found: usize,
    },

    #[error("mask levels must be contiguous from j_min = {j_min}, found level {found} at position {position}")]
    NonContiguous { j_min: u32, position: usize, found: u32 },

    #[error("invalid mask table: {0}")]
    InvalidTable(String),

    #[error("unknown mask family `{0}`")]
    UnknownFamily(String),

    #[error("spline order K = {0} is outside the supported range 1..=8")]
    UnsupportedOrder(u32),

    #[error("level j = {0} is too small (need j >= 2)")]
    LevelTooSmall(u32),

    #[error("level j = {level} is not available (table covers {j_min}..={j_max})")]
    LevelUnavailable { level: u32, j_min: u32, j_max: u32 },

    #[error("phase spline system is singular or ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("derivative of order {order} jumps at xi = {xi}: left {left}, right {right}")]
    Breakpoint {
        xi: f64,
        order: usize,
        left: f64,
        right: f64,
    },

    #[error("product tail {tail:e} still exceeds tolerance {tol:e} after {depth} factors")]
    TruncationUnreachable { tail: f64, tol: f64, depth: usize },

    #[error("sample grid does not cover frequency {k}")]
    SpanTooSmall { k: i64 },

    #[error("spectrum has not decayed at the span edge (edge/peak ratio {ratio:e}) and its second moment does not grow with the span")]
    InsufficientDecay { ratio: f64 },

    #[error("input has zero norm")]
    ZeroNorm,

    #[error("input is a single harmonic (only coefficient {0} is nonzero)")]
    SingleHarmonic(i64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
