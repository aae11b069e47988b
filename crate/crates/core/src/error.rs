use thiserror::Error;

#[derive(Debug, Error)]
pub enum SurfError {
    #[error("invalid distribution spec `{spec}`: {reason}")]
    InvalidSpec { spec: String, reason: String },

    #[error("horizon {n} needs about {needed} bytes, over the budget of {budget} bytes")]
    MemoryBudget { n: u64, needed: u64, budget: u64 },

    #[error("enumeration needs {sequences} sequences, over the budget of {budget}")]
    EnumerationBudget { sequences: u128, budget: u64 },

    #[error("distribution `{0}` has unbounded support; exhaustive enumeration is impossible")]
    InfiniteSupport(String),

    #[error(
        "root-sum truncation did not reach error budget {epsilon} within {cap} roots (best certified error {achieved})"
    )]
    NonConvergent { epsilon: f64, cap: u64, achieved: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid experiment config: {0}")]
    Config(String),

    #[error("malformed trace file: {0}")]
    Trace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SurfError>;
