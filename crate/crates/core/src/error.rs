use thiserror::Error;

use crate::exposure::Label;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("design masses sum to {sum}, expected 1")]
    MassSum { sum: String },
    #[error("support vector {vector:?} appears more than once")]
    DuplicateSupport { vector: Vec<u32> },
    #[error("assignment vector has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("support mass for {vector:?} must be strictly positive, got {mass}")]
    NonPositiveMass { vector: Vec<u32>, mass: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("enumeration requires {required} points but the cap is {cap}")]
    CapExceeded { required: String, cap: u64 },
    #[error("exposure undefined for assignment {vector:?}")]
    ExposureUndefined { vector: Vec<u32> },
    #[error("outcome undefined for assignment {vector:?}")]
    OutsideDomain { vector: Vec<u32> },
    #[error("unknown corpus instance '{0}'")]
    UnknownCorpus(String),
    #[error("unknown rule '{0}'")]
    UnknownRule(String),
    #[error("placeholder only applies to survey schedules")]
    NotSurvey,
    #[error("positivity fails for exposure {label}: units {units:?} have zero probability")]
    Positivity { label: Label, units: Vec<usize> },
    #[error("trimmed population is empty")]
    EmptyTrim,
    #[error(
        "{pairs} unit pairs have zero joint exposure probability; use the conservative estimator"
    )]
    ZeroJointProbability { pairs: usize },
    #[error("NURVA fails (unit {unit}); the exact variance is undefined")]
    NurvaViolated { unit: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("variance must be non-negative, got {0}")]
    NegativeVariance(f64),
    #[error("a design space is required for this check")]
    MissingDesignSpace,
    #[error("generator failed at N = {n}: {reason}")]
    Generator { n: usize, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
