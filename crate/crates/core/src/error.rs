use thiserror::Error;

use crate::Rational;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain of {m} points exceeds the enumeration cap of {cap}")]
    DomainTooLarge { m: usize, cap: usize },
    #[error("graph has {vertices} vertices, above the brute-force cap of {cap}")]
    GraphTooLarge { vertices: usize, cap: usize },
    #[error("instance too large: {0}")]
    InstanceTooLarge(String),
    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("no group-realizable concept is consistent with the sample")]
    InconsistentSample,
    #[error("no valid augmenting matching found at value {value} of {target}")]
    NoAugmentingMatching { value: Rational, target: usize },
    #[error("mixture size k = {k} is outside 1..={max}")]
    KOutOfRange { k: i64, max: usize },
    #[error("epsilon out of range: {0}")]
    EpsilonOutOfRange(String),
    #[error("exact enumeration needs {required} samples, over the budget of {budget}")]
    BudgetExceeded { required: u128, budget: u128 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
