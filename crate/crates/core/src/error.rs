use thiserror::Error;

/// Errors produced by curvlab operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("state space must contain at least one state")]
    EmptySpace,
    #[error("duplicate state label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown state label `{0}`")]
    UnknownLabel(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("entry ({row}, {col}) is not a finite non-negative number: {value}")]
    BadEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, expected {expected}")]
    BadRowSum { row: usize, sum: f64, expected: f64 },
    #[error("weights do not form a probability vector: {0}")]
    NotProbability(String),
    #[error("chain is not irreducible")]
    NotIrreducible,
    #[error("distribution is not stationary for the chain (residual {0:e})")]
    StationaryMismatch(f64),
    #[error("time must be finite and non-negative, got {0}")]
    NonFiniteTime(f64),
    #[error("epsilon must lie in (0, 1), got {0}")]
    BadEpsilon(f64),
    #[error("support graph is not connected")]
    NotConnected,
    #[error("edge weight must be positive, got {0}")]
    NonpositiveWeight(f64),
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("generating set is empty")]
    EmptyGeneratingSet,
    #[error("pair set does not generate the metric")]
    NotGenerating,
    #[error("invalid pair ({0}, {1})")]
    InvalidPair(usize, usize),
    #[error("target distribution has zero mass where the measure is positive (state {0})")]
    SupportViolation(usize),
    #[error("measure coincides with the stationary law")]
    AtStationarity,
    #[error("invalid rates: {0}")]
    BadRates(String),
    #[error("rate monotonicity condition violated: {0}")]
    MonotonicityViolated(String),
    #[error("state space too large: {states} states exceeds cap {cap}")]
    TooLarge { states: usize, cap: usize },
    #[error("Laplace matrix is singular (smallest eigenvalue {0:e})")]
    SingularLaplacian(f64),
    #[error("target distribution has a disconnected support")]
    DisconnectedSupport,
    #[error("interaction is not symmetric: {0}")]
    AsymmetricInteraction(String),
    #[error("bound curve value {value} at index {index} outside [0, 1]")]
    BoundOutOfRange { index: usize, value: f64 },
    #[error("at least {min} samples are required, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
