use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate mode label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown mode label `{0}`")]
    UnknownLabel(String),
    #[error("amplitude vector length {actual} does not match 2^{qubits}")]
    AmplitudeLength { qubits: usize, actual: usize },
    #[error("register of {0} qubits exceeds the supported maximum of 8")]
    RegisterTooLarge(usize),
    #[error("squared norm {0} outside [0, 1]")]
    NormOutOfRange(f64),
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("operator arity mismatch: expected {expected} target(s), got {actual}")]
    ArityMismatch { expected: usize, actual: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("operator is not a valid projector")]
    InvalidProjector,
    #[error("not a valid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("concurrence requires a 2-qubit state, got {0} qubits")]
    ConcurrenceArity(usize),
    #[error("label sets differ: {0}")]
    LabelMismatch(String),
    #[error("measurement setting must be 0 or 1, got {0}")]
    InvalidSetting(u8),
    #[error("variant `{0}` is not supported here")]
    UnsupportedVariant(String),
    #[error("{name} = {value} outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("counts table is empty or all zero")]
    EmptyCounts,
    #[error("monte carlo needs at least {min} samples, got {actual}")]
    InsufficientSamples { min: usize, actual: usize },
    #[error("zero-eigenvalue outcome mass {0} exceeds tolerance; coarse-grain first")]
    NonBinaryMass(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
