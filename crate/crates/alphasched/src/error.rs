use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("job {0} not found")]
    JobNotFound(u32),

    #[error("job {0} is not complete in the virtual schedule")]
    JobIncomplete(u32),

    #[error("jobs must be inserted in nondecreasing release order: job {job} released at {release} precedes current frontier {frontier}")]
    OutOfOrderInsertion { job: u32, release: f64, frontier: f64 },

    #[error("time-indexed horizon {required} exceeds cap {cap}; rerun with --lp-cap at least {required}")]
    HorizonCapExceeded { required: u64, cap: u64 },

    #[error("cannot scale instance to even integers: {0}")]
    ScalingFailed(String),

    #[error("subset check limited to {limit} jobs, got {got}")]
    SubsetTooLarge { got: usize, limit: usize },

    #[error("LP solve failed: {0}")]
    LpSolve(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    // Sources carry the detail; keep the display terse so error chains
    // don't repeat it.
    #[error("invalid JSON")]
    Json(#[from] serde_json::Error),

    #[error("I/O error")]
    Io(#[from] std::io::Error),
}
