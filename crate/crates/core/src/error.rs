use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (max |m - m^dag| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid tensor factors: {0}")]
    InvalidFactors(String),

    #[error("partial trace needs at least one factor to keep")]
    EmptyKeep,

    #[error("factor index {index} out of range for {count} factors")]
    FactorOutOfRange { index: usize, count: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not a permutation of 0..{n}: {order:?}")]
    InvalidPermutation { order: Vec<usize>, n: usize },

    #[error("time series too short: need {needed} samples, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("no spectral peak above the noise floor")]
    NoSpectralPeak,

    #[error("eigensolver failure: {0}")]
    EigenFailure(String),

    #[error("integrator step underflow: {0}")]
    StepUnderflow(String),

    #[error("missing recorded ingredients: {0}")]
    MissingIngredients(String),

    #[error("subsystem partitions overlap")]
    OverlappingParts,

    #[error("refusing to record: {0}")]
    MemoryGuard(String),
}
