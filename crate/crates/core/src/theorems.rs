//! Closed-form dimension and cyclicity formulas.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::retmaps::{
    classify_record, first_return, orbit_dim_oracle, Classification, CycleSide, TwoCycleSpec,
};

/// Pre-floor values this close to an integer are taken as that integer.
pub const NEAR_INTEGER_GUARD: f64 = 1e-9;

/// Spiral dimensions at or above `2 - SINGULAR_MARGIN` are rejected.
pub const SINGULAR_MARGIN: f64 = 1e-6;

/// `floor(v)`, snapping to the nearest integer within [`NEAR_INTEGER_GUARD`].
pub fn guarded_floor(v: f64) -> i64 {
    let n = v.round();
    if (v - n).abs() <= NEAR_INTEGER_GUARD {
        n as i64
    } else {
        v.floor() as i64
    }
}

/// Whether `v` falls inside the near-integer guard.
pub fn near_integer(v: f64) -> bool {
    (v - v.round()).abs() <= NEAR_INTEGER_GUARD
}

fn check_unit(name: &'static str, d: f64) -> Result<()> {
    if !(0.0..1.0).contains(&d) {
        return Err(invalid(name, format!("must lie in [0, 1), got {d}")));
    }
    Ok(())
}

/// `1 + dim(y_n)` for the trajectories through `(y_n)` at a saddle or
/// semi-hyperbolic corner.
pub fn predict_corner_dim(seq_dim: f64) -> Result<f64> {
    check_unit("seq_dim", seq_dim)?;
    Ok(1.0 + seq_dim)
}

/// `1 + max` over the corners of a polycycle.
pub fn predict_polycycle_dim(dims: &[f64]) -> Result<f64> {
    if dims.is_empty() {
        return Err(invalid("dims", "need at least one corner"));
    }
    for &d in dims {
        check_unit("dims", d)?;
    }
    Ok(1.0 + dims.iter().copied().fold(0.0, f64::max))
}

/// Spiral dimension near a saddle loop of codimension `k`:
/// `2 - 2/k` for even `k`, `2 - 2/(k+1)` for odd `k`.
pub fn saddle_loop_dim(codim: u32) -> Result<f64> {
    if codim < 1 {
        return Err(invalid("codim", "must be at least 1"));
    }
    let k = if codim.is_multiple_of(2) {
        codim
    } else {
        codim + 1
    };
    Ok(2.0 - 2.0 / k as f64)
}

/// Orbit dimension of the return map of a codimension-`k` saddle loop.
pub fn saddle_loop_orbit_dim(codim: u32) -> Result<f64> {
    Ok(saddle_loop_dim(codim)? - 1.0)
}

/// Upper bound on the cyclicity of a 2-cycle with `r1·r2 = 1`, `r2 = 1/r1`.
///
/// `2 + k1 + ⌊(k1-1)/r1⌋` when `k1 - 1 < r1(k2 - 1)`, otherwise
/// `2 + k2 + ⌊(k2-1)/r2⌋` when `k2 - 1 < r2(k1 - 1)`. `k2 = None` is `∞`.
pub fn mourtada_epsilon(r1: f64, k1: u32, k2: Option<u32>) -> Result<i64> {
    if !(r1 > 0.0 && r1.is_finite()) {
        return Err(invalid("r1", format!("must be positive, got {r1}")));
    }
    if k1 < 2 || k2.is_some_and(|k| k < 2) {
        return Err(invalid("k", "orders must be at least 2"));
    }
    let r2 = 1.0 / r1;
    let e1 = (k1 - 1) as f64;
    let e2 = k2.map_or(f64::INFINITY, |k| (k - 1) as f64);
    let first = e1 < r1 * e2;
    let second = e2 < r2 * e1;
    let (k, q) = match (first, second) {
        (true, false) => (k1 as i64, e1 / r1),
        (false, true) => (k2.unwrap() as i64, e2 / r2),
        _ => {
            return Err(Error::InvalidCycle(format!(
                "exactly one of k1-1 < r1(k2-1) and k2-1 < r2(k1-1) must hold (got {first} and {second})"
            )))
        }
    };
    Ok(2 + k + guarded_floor(q))
}

/// `⌊3 + (1 + r)(d - 1)/(2 - d)⌋` for spiral dimension `d ∈ [1, 2)` and
/// ratio `r ∈ (0, 1]`.
pub fn cyclicity_bound(d: f64, r: f64) -> Result<i64> {
    if !(1.0..2.0 - SINGULAR_MARGIN).contains(&d) {
        return Err(invalid(
            "d",
            format!("must lie in [1, 2 - {SINGULAR_MARGIN}), got {d}"),
        ));
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(invalid("r", format!("must lie in (0, 1], got {r}")));
    }
    Ok(guarded_floor(3.0 + (1.0 + r) * (d - 1.0) / (2.0 - d)))
}

/// Ratio recovered from the orbit dimensions of the two return maps:
/// `min{(d1-1)/(d2-1), (d2-1)/(d1-1)}`.
///
/// With `d_i = 1 - 1/γ_i` this equals `min{γ1/γ2, γ2/γ1}`. The flag is set
/// when `d1 = d2`.
pub fn recover_r(d1: f64, d2: f64) -> Result<(f64, bool)> {
    for (name, d) in [("d1", d1), ("d2", d2)] {
        if !(d > 0.0 && d < 1.0) {
            return Err(invalid(name, format!("must lie in (0, 1), got {d}")));
        }
    }
    if d1 == d2 {
        return Ok((1.0, true));
    }
    let (a, b) = (d1 - 1.0, d2 - 1.0);
    Ok(((a / b).min(b / a), false))
}

/// Ratio of the leading correction exponents `γ_i - 1` of the two return
/// maps, as `min` of the quotient and its inverse. For `r1·r2 = 1` this is
/// `min{r1, r2}`.
pub fn correction_ratio(d1: f64, d2: f64) -> Result<f64> {
    for (name, d) in [("d1", d1), ("d2", d2)] {
        if !(d > 0.0 && d < 1.0) {
            return Err(invalid(name, format!("must lie in (0, 1), got {d}")));
        }
    }
    let e = |d: f64| 1.0 / (1.0 - d) - 1.0;
    let (a, b) = (e(d1), e(d2));
    Ok((a / b).min(b / a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProofCase {
    /// Hyperbolic return maps: cyclicity at most 3.
    Hyperbolic,
    /// `r1 > 1`: `d = 2 - 1/k1`.
    RatioAboveOne,
    /// `r1 < 1`: `d = 2 - 1/(1 + r2(k1 - 1))`.
    RatioBelowOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub class1: Classification,
    pub class2: Classification,
    pub d1: f64,
    pub d2: f64,
    /// `1 + max(d1, d2)`.
    pub spiral_dim: f64,
    pub case: ProofCase,
    /// `recover_r(d1, d2)` as stated; absent in the hyperbolic case.
    pub r_recovered: Option<f64>,
    /// Ratio actually fed to the bound, from [`correction_ratio`].
    pub r: Option<f64>,
    pub bound: i64,
    pub epsilon: Option<i64>,
}

fn stage<T>(tag: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidCycle(m) => Error::InvalidCycle(format!("{tag}: {m}")),
        Error::Contradictory(m) => Error::Contradictory(format!("{tag}: {m}")),
        Error::Integration(m) => Error::Integration(format!("{tag}: {m}")),
        other => other,
    })
}

/// Runs both cyclicity formulas on a 2-cycle and checks they agree.
pub fn consistency_report(spec: &TwoCycleSpec) -> Result<ConsistencyReport> {
    let p1 = stage("first return 1", first_return(spec, CycleSide::One))?;
    let p2 = stage("first return 2", first_return(spec, CycleSide::Two))?;
    let class1 = stage("classify 1", classify_record(&p1.record))?;
    let class2 = stage("classify 2", classify_record(&p2.record))?;
    let d1 = stage("oracle 1", orbit_dim_oracle(&class1))?;
    let d2 = stage("oracle 2", orbit_dim_oracle(&class2))?;
    let spiral_dim = 1.0 + d1.max(d2);
    let tangent = |c: &Classification| {
        matches!(
            c,
            Classification::Tangent { .. } | Classification::TangentLog { .. }
        )
    };
    if !(tangent(&class1) && tangent(&class2)) {
        return Ok(ConsistencyReport {
            class1,
            class2,
            d1,
            d2,
            spiral_dim,
            case: ProofCase::Hyperbolic,
            r_recovered: None,
            r: None,
            bound: 3,
            epsilon: None,
        });
    }
    let case = if spec.r1 > 1.0 {
        ProofCase::RatioAboveOne
    } else {
        ProofCase::RatioBelowOne
    };
    let (r_recovered, _) = stage("recover r", recover_r(d1, d2))?;
    let r = stage("correction ratio", correction_ratio(d1, d2))?;
    let bound = stage("cyclicity bound", cyclicity_bound(spiral_dim, r))?;
    let epsilon = match (spec.k1, spec.k2) {
        (Some(k1), k2) => stage("epsilon", mourtada_epsilon(spec.r1, k1, k2))?,
        (None, Some(k2)) => stage("epsilon", mourtada_epsilon(spec.r2, k2, None))?,
        (None, None) => return Err(Error::InvalidCycle("epsilon: k1 = k2 = infinity".into())),
    };
    if bound != epsilon {
        return Err(Error::Contradictory(format!(
            "cyclicity bound {bound} differs from epsilon {epsilon} (d = {spiral_dim}, r = {r})"
        )));
    }
    Ok(ConsistencyReport {
        class1,
        class2,
        d1,
        d2,
        spiral_dim,
        case,
        r_recovered: Some(r_recovered),
        r: Some(r),
        bound,
        epsilon: Some(epsilon),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn corner_and_polycycle() {
        assert_eq!(predict_corner_dim(0.5).unwrap(), 1.5);
        assert_eq!(predict_corner_dim(0.0).unwrap(), 1.0);
        assert!((predict_corner_dim(2.0 / 3.0).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert!(predict_corner_dim(1.0).is_err());
        assert_eq!(predict_polycycle_dim(&[0.5, 1.0 / 3.0]).unwrap(), 1.5);
        assert_eq!(predict_polycycle_dim(&[1.0 / 3.0, 0.5]).unwrap(), 1.5);
        assert_eq!(predict_polycycle_dim(&[0.0]).unwrap(), 1.0);
        assert!(predict_polycycle_dim(&[]).is_err());
    }

    #[test]
    fn saddle_loops() {
        assert_eq!(saddle_loop_dim(1).unwrap(), 1.0);
        assert_eq!(saddle_loop_dim(2).unwrap(), 1.0);
        assert_eq!(saddle_loop_dim(3).unwrap(), 1.5);
        assert_eq!(saddle_loop_dim(4).unwrap(), 1.5);
        assert_eq!(saddle_loop_dim(6).unwrap(), 2.0 - 2.0 / 6.0);
        assert!(saddle_loop_dim(0).is_err());
        for j in 1..=10 {
            assert_eq!(
                saddle_loop_dim(2 * j - 1).unwrap(),
                saddle_loop_dim(2 * j).unwrap()
            );
        }
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(mourtada_epsilon(SQRT2, 3, Some(3)).unwrap(), 6);
        assert_eq!(mourtada_epsilon(SQRT2, 2, Some(3)).unwrap(), 4);
        assert!(matches!(
            mourtada_epsilon(1.0, 3, Some(3)),
            Err(Error::InvalidCycle(_))
        ));
    }

    #[test]
    fn bound_examples() {
        assert_eq!(cyclicity_bound(1.0, 0.3).unwrap(), 3);
        assert_eq!(cyclicity_bound(5.0 / 3.0, 1.0 / SQRT2).unwrap(), 6);
        assert_eq!(cyclicity_bound(1.5, 0.5).unwrap(), 4);
        assert!(cyclicity_bound(2.0 - 1e-7, 0.5).is_err());
        assert!(cyclicity_bound(1.5, 0.0).is_err());
        // 3 + 2·(0.5/0.5)·... lands on an integer: guard keeps it there
        assert_eq!(cyclicity_bound(1.5, 1.0).unwrap(), 5);
    }

    #[test]
    fn recover_examples() {
        let (r, flag) = recover_r(2.0 / 3.0, 0.75).unwrap();
        assert!((r - 0.75).abs() < 1e-12 && !flag);
        assert_eq!(recover_r(0.5, 0.5).unwrap(), (1.0, true));
        assert!(recover_r(0.0, 0.5).is_err());
    }

    fn c2(r1: f64, k1: u32, k2: Option<u32>) -> TwoCycleSpec {
        TwoCycleSpec {
            r1,
            r2: 1.0 / r1,
            beta12: 1.3,
            beta21: 1.3f64.powf(-1.0 / r1),
            alpha1: -0.7,
            alpha2: if k2.is_some() { -0.4 } else { 0.0 },
            k1: Some(k1),
            k2,
            resonant: false,
        }
    }

    #[test]
    fn report_hyperbolic() {
        let spec = TwoCycleSpec {
            beta21: 0.5,
            ..c2(SQRT2, 3, Some(3))
        };
        let rep = consistency_report(&spec).unwrap();
        assert_eq!(rep.case, ProofCase::Hyperbolic);
        assert_eq!(rep.spiral_dim, 1.0);
        assert_eq!(rep.bound, 3);
    }

    #[test]
    fn report_ratio_above_one() {
        let rep = consistency_report(&c2(SQRT2, 3, Some(3))).unwrap();
        assert_eq!(rep.case, ProofCase::RatioAboveOne);
        assert!((rep.spiral_dim - (2.0 - 1.0 / 3.0)).abs() < 1e-12);
        assert_eq!((rep.bound, rep.epsilon), (6, Some(6)));
    }

    #[test]
    fn report_ratio_below_one() {
        let rep = consistency_report(&c2(1.0 / SQRT2, 3, None)).unwrap();
        assert_eq!(rep.case, ProofCase::RatioBelowOne);
        assert!((rep.spiral_dim - (2.0 - 1.0 / (1.0 + SQRT2 * 2.0))).abs() < 1e-12);
        assert_eq!((rep.bound, rep.epsilon), (7, Some(7)));
        assert!((rep.r.unwrap() - 1.0 / SQRT2).abs() < 1e-12);
        // The literal ratio min{γ1/γ2, γ2/γ1} would give 8 here.
        assert_eq!(
            cyclicity_bound(rep.spiral_dim, rep.r_recovered.unwrap()).unwrap(),
            8
        );
    }

    proptest! {
        #[test]
        fn recover_r_matches_gammas(g1 in 1.1f64..20.0, g2 in 1.1f64..20.0) {
            prop_assume!((g1 - g2).abs() > 1e-6);
            let (r, _) = recover_r(1.0 - 1.0 / g1, 1.0 - 1.0 / g2).unwrap();
            prop_assert!((r - (g1 / g2).min(g2 / g1)).abs() < 1e-12);
            prop_assert_eq!(recover_r(1.0 - 1.0 / g1, 1.0 - 1.0 / g2).unwrap(), recover_r(1.0 - 1.0 / g2, 1.0 - 1.0 / g1).unwrap());
        }

        #[test]
        fn bound_is_monotone(d in 1.0f64..1.99, e in 0.0f64..0.009, r in 0.01f64..1.0, s in 0.0f64..0.5) {
            let b = cyclicity_bound(d, r).unwrap();
            prop_assert!(b >= 3);
            prop_assert!(cyclicity_bound(d + e, r).unwrap() >= b);
            prop_assert!(cyclicity_bound(d, (r + s).min(1.0)).unwrap() >= b);
        }

        #[test]
        fn saddle_loop_range(k in 1u32..1000) {
            let d = saddle_loop_dim(k).unwrap();
            prop_assert!((1.0..2.0).contains(&d));
        }

        #[test]
        fn bound_equals_epsilon(log_r in 0.05f64..5f64.ln(), below in proptest::bool::ANY, k1 in 2u32..=6) {
            let r1 = if below { (-log_r).exp() } else { log_r.exp() };
            prop_assume!(!near_integer(((k1 - 1) as f64) / r1));
            let rep = consistency_report(&c2(r1, k1, None)).unwrap();
            prop_assert_eq!(Some(rep.bound), rep.epsilon);
        }
    }
}
