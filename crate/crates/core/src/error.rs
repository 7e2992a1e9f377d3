use thiserror::Error;

/// Ways a candidate sequence can fail [`MonotoneSequence`](crate::MonotoneSequence) validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceViolation {
    /// Entry is zero, negative or not finite.
    NonPositive,
    /// Entry is not strictly below its predecessor.
    NonMonotone,
    /// The gap starting at this index exceeds the previous gap.
    GapsIncreasing,
    /// Fewer entries than required.
    TooShort,
}

impl std::fmt::Display for SequenceViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SequenceViolation::NonPositive => "non-positive entry",
            SequenceViolation::NonMonotone => "not strictly decreasing",
            SequenceViolation::GapsIncreasing => "gaps increasing",
            SequenceViolation::TooShort => "too short",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("sequence rejected at index {index}: {violation}")]
    InvalidSequence {
        index: usize,
        violation: SequenceViolation,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("delta {delta} too large: 2*delta must be below the first gap {first_gap}")]
    DeltaTooLarge { delta: f64, first_gap: f64 },

    #[error("delta {delta} too small for a sequence of {len} terms (critical index {index}); extend the sequence or raise delta_min")]
    DeltaTooSmall {
        delta: f64,
        len: usize,
        index: usize,
    },

    #[error(
        "grid of {cells} cells exceeds the cell budget {cap}; raise delta_min or enable tiling"
    )]
    CellBudgetExceeded { cells: u64, cap: u64 },

    #[error("degenerate segment: {0}")]
    DegenerateSegment(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("non-positive measure {measure} at delta {delta}")]
    NonPositiveMeasure { delta: f64, measure: f64 },

    #[error(
        "chord tolerance {tolerance} too coarse for delta_min {delta_min} (need <= delta_min/32)"
    )]
    SamplingTooCoarse { tolerance: f64, delta_min: f64 },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("spiral needs {needed} turns but at most {allowed} were allowed")]
    InsufficientTurns { needed: f64, allowed: u64 },

    #[error("x = {x} outside the map domain: {reason}")]
    OutOfDomain { x: f64, reason: String },

    #[error("map does not contract toward 0: {0}")]
    NonContracting(String),

    #[error("two-cycle rejected: {0}")]
    InvalidCycle(String),

    #[error("contradictory map: {0}")]
    Contradictory(String),

    #[error("value {value} lies within the near-integer guard of {integer}")]
    NearIntegerAmbiguity { value: f64, integer: i64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
