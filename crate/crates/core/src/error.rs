use thiserror::Error;

/// Errors produced by the simulator, the protocols and the information-theory checks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("machine index {index} out of range for a pool of {machines}")]
    MachineOutOfRange { index: usize, machines: usize },

    #[error("invalid codec: {0}")]
    InvalidCodec(String),

    #[error("non-finite value {0} cannot be encoded")]
    NonFiniteValue(f64),

    #[error("code {code} out of range for a {bits}-bit codec")]
    CodeOutOfRange { code: u64, bits: u32 },

    #[error("machine pool exhausted: protocol needs {needed} machines, pool has {available}")]
    InsufficientMachines { needed: usize, available: usize },

    #[error("protocol precondition violated: {0}")]
    Precondition(String),

    #[error("malformed transcript: {0}")]
    Transcript(String),

    #[error("distribution is not normalized: total mass {total}")]
    Unnormalized { total: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("inputs are not conditionally independent (factorization residual {residual:e})")]
    NotConditionallyIndependent { residual: f64 },

    #[error("grid too coarse: marginal normalization drift {drift:e} exceeds {limit:e}")]
    GridTooCoarse { drift: f64, limit: f64 },

    #[error("budget check failed: {0}")]
    BudgetMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
