use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: left has {left} variables, right has {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid element vector: {0}")]
    InvalidVector(String),

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("sign-flip mask has length {mask}, expected {expected}")]
    MaskLength { mask: usize, expected: usize },

    #[error("relation is not a strict partial order: {0}")]
    InvalidRelation(String),

    #[error("column {index} is constant; correlation is undefined")]
    ConstantColumn { index: usize },

    #[error("correlation input needs at least 3 rows, got {0}")]
    TooFewRows(usize),

    #[error("correlation matrix is invalid: {0}")]
    InvalidCorrelation(String),

    #[error("poset has {n} elements; exact linear-extension machinery supports at most {max}")]
    PosetTooLarge { n: usize, max: usize },

    #[error("invalid design configuration: {0}")]
    InvalidConfig(String),

    #[error("height summaries do not match the sets: {0}")]
    HeightMismatch(String),

    #[error("allocation total {total} exceeds population size {available}")]
    AllocationInfeasible { total: usize, available: usize },

    #[error("cannot draw {requested} from a stratum of {available} without replacement")]
    SampleTooLarge { requested: usize, available: usize },

    #[error("design mismatch: {0}")]
    DesignMismatch(String),

    #[error("estimation input is invalid: {0}")]
    InvalidEstimationInput(String),

    #[error("model parameters are incomplete: {0}")]
    MissingModelParams(String),

    #[error("population model is invalid: {0}")]
    InvalidModel(String),

    #[error("simulation plan is invalid: {0}")]
    InvalidPlan(String),

    #[error("dataset error: {0}")]
    Dataset(String),
}
