use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("matrix is not Hermitian (max defect {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("resonant denominator: {0}")]
    Resonance(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("step size underflow at t = {t} (dt = {dt:.3e})")]
    StepUnderflow { t: f64, dt: f64 },

    #[error("invariant breach at t = {t}: {what}")]
    InvariantBreach { t: f64, what: String },

    #[error("steady state is not unique: {0}")]
    Degenerate(String),

    #[error("averaging window rejected: {0}")]
    Window(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("superoperator too large for a dense solve (Hilbert dimension {0})")]
    TooLarge(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
