//! Strictly decreasing positive sequences with non-increasing gaps.
//!
//! These are the points where a trajectory family crosses a transversal,
//! ordered away from the limit point. Validation is exact: no tolerance is
//! applied to the monotonicity of values or of gaps.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result, SequenceViolation};

/// Shortest sequence accepted by the type.
pub const MIN_LEN: usize = 2;

/// Shortest sequence the dimension estimators work with.
pub const MIN_ESTIMATION_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSequence {
    values: Vec<f64>,
    origin: String,
}

impl MonotoneSequence {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Distance between entries `n` and `n + 1` (0-based).
    pub fn gap(&self, n: usize) -> f64 {
        self.values[n] - self.values[n + 1]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Drops the first `k` terms. Removing a prefix keeps every invariant.
    pub fn skip(&self, k: usize) -> Result<MonotoneSequence> {
        if self.len() < k + MIN_LEN {
            return Err(Error::InvalidSequence {
                index: self.len().saturating_sub(k),
                violation: SequenceViolation::TooShort,
            });
        }
        Ok(MonotoneSequence {
            values: self.values[k..].to_vec(),
            origin: format!("{} (from term {})", self.origin, k + 1),
        })
    }

    /// Every entry multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<MonotoneSequence> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(invalid("factor", "must be positive and finite"));
        }
        let values: Vec<f64> = self.values.iter().map(|v| v * factor).collect();
        validate_sequence(&values, format!("{} scaled by {factor}", self.origin))
    }
}

/// First index at which `values` breaks a sequence invariant, if any.
///
/// For a gap violation the reported index is the start of the offending gap,
/// so `values[..=index]` is still valid. For the other violations the entry
/// at `index` itself is bad.
pub fn first_violation(values: &[f64]) -> Option<(usize, SequenceViolation)> {
    let mut prev_gap = f64::INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if !(v > 0.0 && v.is_finite()) {
            return Some((i, SequenceViolation::NonPositive));
        }
        if i > 0 {
            let gap = values[i - 1] - v;
            if gap <= 0.0 {
                return Some((i, SequenceViolation::NonMonotone));
            }
            if gap > prev_gap {
                return Some((i - 1, SequenceViolation::GapsIncreasing));
            }
            prev_gap = gap;
        }
    }
    if values.len() < MIN_LEN {
        return Some((values.len(), SequenceViolation::TooShort));
    }
    None
}

/// Accepts `values` only if every invariant holds.
pub fn validate_sequence(values: &[f64], origin: impl Into<String>) -> Result<MonotoneSequence> {
    match first_violation(values) {
        Some((index, violation)) => Err(Error::InvalidSequence { index, violation }),
        None => Ok(MonotoneSequence {
            values: values.to_vec(),
            origin: origin.into(),
        }),
    }
}

/// Outcome of [`clean_sequence`].
#[derive(Debug, Clone, PartialEq)]
pub struct Cleaned {
    pub sequence: MonotoneSequence,
    /// Number of trailing terms dropped.
    pub dropped: usize,
}

/// Truncates `values` before the first violating term.
///
/// Meant for sequences produced numerically (orbits, crossings) whose tails
/// lose monotonicity to rounding. Fails if fewer than [`MIN_LEN`] terms survive.
pub fn clean_sequence(values: &[f64], origin: impl Into<String>) -> Result<Cleaned> {
    let keep = match first_violation(values) {
        None => values.len(),
        Some((i, SequenceViolation::GapsIncreasing)) => i + 1,
        Some((i, SequenceViolation::TooShort)) => i,
        Some((i, _)) => i,
    };
    let sequence = validate_sequence(&values[..keep], origin)?;
    Ok(Cleaned {
        sequence,
        dropped: values.len() - keep,
    })
}

/// `values[n] = (n + 1)^(-a)` for `n < count`.
pub fn power_sequence(a: f64, count: usize) -> Result<MonotoneSequence> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid("a", format!("must be positive, got {a}")));
    }
    if count < MIN_LEN {
        return Err(invalid(
            "N",
            format!("need at least {MIN_LEN} terms, got {count}"),
        ));
    }
    let values: Vec<f64> = (1..=count).map(|n| (n as f64).powf(-a)).collect();
    validate_sequence(&values, format!("power n^-{a}, N={count}"))
}

/// `values[n] = ratio^(n + 1)` for `n < count`. Fails if the tail underflows.
pub fn geometric_sequence(ratio: f64, count: usize) -> Result<MonotoneSequence> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(invalid("ratio", format!("must lie in (0, 1), got {ratio}")));
    }
    if count < MIN_LEN {
        return Err(invalid(
            "N",
            format!("need at least {MIN_LEN} terms, got {count}"),
        ));
    }
    let values: Vec<f64> = (1..=count as i32).map(|n| ratio.powi(n)).collect();
    let cleaned = clean_sequence(&values, format!("geometric {ratio}^n, N={count}"))?;
    if cleaned.dropped > 0 {
        return Err(Error::InvalidSequence {
            index: count - cleaned.dropped,
            violation: SequenceViolation::NonPositive,
        });
    }
    Ok(cleaned.sequence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn power_sequence_small() {
        let s = power_sequence(1.0, 4).unwrap();
        let expect = [1.0, 0.5, 1.0 / 3.0, 0.25];
        for (a, b) in s.values().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn power_sequence_rejects_bad_input() {
        assert!(power_sequence(0.0, 100).is_err());
        assert!(power_sequence(-1.0, 100).is_err());
        assert!(power_sequence(1.0, 1).is_err());
    }

    #[test]
    fn accepts_halving() {
        assert!(validate_sequence(&[1.0, 0.5, 0.25], "t").is_ok());
    }

    #[test]
    fn rejects_increasing_gap_at_index_1() {
        let err = validate_sequence(&[1.0, 0.9, 0.5], "t").unwrap_err();
        assert_eq!(
            err,
            Error::InvalidSequence {
                index: 1,
                violation: SequenceViolation::GapsIncreasing
            }
        );
    }

    #[test]
    fn rejects_non_monotone_and_non_positive() {
        assert!(matches!(
            validate_sequence(&[1.0, 1.0, 0.5], "t"),
            Err(Error::InvalidSequence {
                index: 1,
                violation: SequenceViolation::NonMonotone
            })
        ));
        assert!(matches!(
            validate_sequence(&[1.0, 0.5, 0.0], "t"),
            Err(Error::InvalidSequence {
                index: 2,
                violation: SequenceViolation::NonPositive
            })
        ));
        assert!(matches!(
            validate_sequence(&[1.0], "t"),
            Err(Error::InvalidSequence {
                violation: SequenceViolation::TooShort,
                ..
            })
        ));
    }

    #[test]
    fn orbit_of_parabolic_map_is_accepted() {
        // Enumerate the orbit of x -> x - x^2 and check gaps directly.
        let mut x = 0.5;
        let mut values = Vec::new();
        for _ in 0..100 {
            values.push(x);
            x -= x * x;
        }
        let gaps: Vec<f64> = values.windows(2).map(|w| w[0] - w[1]).collect();
        assert!(gaps.windows(2).all(|g| g[1] <= g[0]));
        assert!(validate_sequence(&values, "orbit").is_ok());
    }

    #[test]
    fn cleaning_truncates_before_violation() {
        let values = [1.0, 0.5, 0.25, 0.125, 0.1, 0.0];
        let c = clean_sequence(&values, "t").unwrap();
        assert_eq!(c.sequence.values(), &[1.0, 0.5, 0.25, 0.125, 0.1]);
        assert_eq!(c.dropped, 1);

        let values = [1.0, 0.5, 0.4, 0.2];
        let c = clean_sequence(&values, "t").unwrap();
        assert_eq!(c.sequence.values(), &[1.0, 0.5, 0.4]);
    }

    #[test]
    fn geometric_matches_formula() {
        let s = geometric_sequence(0.5, 20).unwrap();
        assert_eq!(s.values()[0], 0.5);
        assert_eq!(s.values()[9], 2f64.powi(-10));
    }

    proptest! {
        #[test]
        fn power_sequences_validate(a in 0.1f64..5.0, n in 16usize..4000) {
            let s = power_sequence(a, n);
            prop_assert!(s.is_ok());
        }

        #[test]
        fn validation_is_idempotent(a in 0.1f64..5.0, n in 16usize..500) {
            let s = power_sequence(a, n).unwrap();
            let again = validate_sequence(s.values(), s.origin()).unwrap();
            prop_assert_eq!(s, again);
        }
    }
}
