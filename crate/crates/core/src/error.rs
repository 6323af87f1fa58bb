use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not allowable (some row or column has no positive entry)")]
    NotAllowable,

    #[error("invalid matrix entries: {0}")]
    InvalidEntries(String),

    #[error("pattern {index} is not the support of an allowable matrix")]
    PatternNotAllowable { index: usize },

    #[error("semigroup closure exceeded {limit} states")]
    StateLimit { limit: usize },

    #[error("zero vector cannot be projected onto the simplex")]
    ZeroVector,

    #[error("invalid simplex point: {0}")]
    InvalidPoint(String),

    #[error("power iteration did not converge after {iterations} iterations (best residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid sampler specification: {0}")]
    SpecInvalid(String),

    #[error("backward iteration exceeded {max_iter} steps; last diameters {trace:?}")]
    MaxIterExceeded { max_iter: usize, trace: Vec<f64> },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("contraction diameter never left 1; condition (C) appears violated")]
    Degenerate,

    #[error("insufficient tail mass: expected {expected:.1} hits at u = {u}, need at least {needed}")]
    InsufficientTailMass { u: f64, expected: f64, needed: f64 },

    #[error("could not bracket the scaling equation: {0}")]
    BracketFailure(String),

    #[error("unsupported dimension {0} (only q = 2 is discretized)")]
    UnsupportedDim(usize),

    #[error("no spectral gap detected at t = {t}: residual {residual:e} after {iterations} iterations")]
    NoGap { t: f64, iterations: usize, residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
