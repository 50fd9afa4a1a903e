use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid horizon: {0}")]
    InvalidHorizon(&'static str),
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("time stamps of episode {episode} differ from episode 0")]
    InconsistentTimes { episode: usize },
    #[error("time stamps of episode {episode} are not strictly increasing")]
    NonMonotoneTimes { episode: usize },
    #[error("invalid weights: {0}")]
    InvalidWeights(&'static str),
    #[error("ensemble is already centered")]
    AlreadyCentered,
    #[error("ensemble must be centered before building data matrices")]
    NotCentered,
    #[error("operation requires a {expected} ensemble")]
    WrongKind { expected: &'static str },
    #[error("series of {len} snapshots is shorter than one episode of {needed}")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(&'static str),
    #[error("rank {rank} out of range 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },
    #[error("no mode above the eigenvalue floor; the hindcast data carries no variance")]
    DegenerateData,
    #[error("retained eigenvalue {index} is not positive")]
    ZeroEigenvalue { index: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("{0} did not converge")]
    NoConvergence(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("model has no stored mean; raw input cannot be centered")]
    MissingMean,
    #[error("prediction and truth disagree on mean handling")]
    MeanMismatch,
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
    #[error("model invariant violated: {0}")]
    InvariantViolation(String),
}
