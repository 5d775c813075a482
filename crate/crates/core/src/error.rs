use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("unsupported dimension {0}; only 1 and 2 are modeled")]
    UnsupportedDimension(usize),

    #[error("cube at level {level} has no children (max level {max_level})")]
    LevelOverflow { level: u32, max_level: u32 },

    #[error("invalid cube: {0}")]
    InvalidCube(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid function: {0}")]
    InvalidFunction(String),

    #[error("weight values must be strictly positive and finite")]
    NonPositiveWeight,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not convex: {0}")]
    NotConvex(String),

    #[error("luxemburg bisection could not bracket the norm: {0}")]
    BracketFailure(String),

    #[error("young function is not doubling (grid exponent {exponent:.3e})")]
    Delta2Failure { exponent: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("evaluation budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("slot {slot} out of range for arity {arity}")]
    SlotOutOfRange { slot: usize, arity: usize },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
