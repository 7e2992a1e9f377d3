//! Minkowski dimension estimates from δ-neighborhood measurements.
//!
//! For a set in `R^N` the pointwise proxy at scale δ is `N - ln|G_δ| / ln δ`.
//! The reported dimension is the least-squares version of the same quantity:
//! `N` minus the slope of `ln|G_δ|` against `ln δ` over a geometric ladder.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{TrajectoryBundle, TrajectorySegment};
use crate::neighborhood::{
    measure_1d_exact, measure_2d_grid_with, GridOptions, NeighborhoodMeasurement,
};
use crate::sequence::{MonotoneSequence, MIN_ESTIMATION_LEN};

/// Fewest samples [`estimate_dimension`] accepts.
pub const MIN_SAMPLES: usize = 8;

/// Upper and lower proxies further apart than this are flagged.
pub const SPREAD_FLAG: f64 = 0.1;

/// Geometric sequence of scales, largest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaLadder {
    pub delta_min: f64,
    pub delta_max: f64,
    values: Vec<f64>,
}

impl DeltaLadder {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ratio(&self) -> f64 {
        (self.delta_min / self.delta_max).powf(1.0 / (self.values.len() - 1) as f64)
    }

    /// 24 points over `[1e-6, 1e-2]`, used for sequences.
    pub fn default_1d() -> Self {
        make_ladder(1e-6, 1e-2, 24).expect("valid constant ladder")
    }

    /// 12 points over `[1e-3, 10^-1.5]`, used for planar sets.
    pub fn default_2d() -> Self {
        make_ladder(1e-3, 10f64.powf(-1.5), 12).expect("valid constant ladder")
    }
}

/// Geometric ladder from `delta_max` down to `delta_min` with `count` points.
///
/// Estimation needs at least [`MIN_SAMPLES`] points; shorter ladders are
/// allowed here for inspection.
pub fn make_ladder(delta_min: f64, delta_max: f64, count: usize) -> Result<DeltaLadder> {
    if !(delta_min > 0.0 && delta_min.is_finite() && delta_max.is_finite()) {
        return Err(invalid(
            "delta_min",
            format!("must be positive, got {delta_min}"),
        ));
    }
    if delta_min >= delta_max {
        return Err(invalid(
            "delta_max",
            format!("must exceed delta_min ({delta_max} <= {delta_min})"),
        ));
    }
    if count < 2 {
        return Err(invalid(
            "count",
            format!("need at least 2 points, got {count}"),
        ));
    }
    let (a, b) = (delta_max.ln(), delta_min.ln());
    let step = (b - a) / (count - 1) as f64;
    let mut values: Vec<f64> = (0..count).map(|i| (a + step * i as f64).exp()).collect();
    values[0] = delta_max;
    values[count - 1] = delta_min;
    Ok(DeltaLadder {
        delta_min,
        delta_max,
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    /// Ambient dimension minus the fitted log-log slope.
    pub fit: f64,
    pub upper: f64,
    pub lower: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub ambient_dim: u8,
    /// `upper - lower` exceeds [`SPREAD_FLAG`]; the limit may not be settled.
    pub spread_flag: bool,
}

/// `N - ln|G_δ| / ln δ` for one measurement.
pub fn pointwise_dimension(sample: &NeighborhoodMeasurement, ambient: u8) -> f64 {
    ambient as f64 - sample.measure.ln() / sample.delta.ln()
}

/// Least-squares dimension over `samples`.
///
/// `upper`/`lower` are the extreme pointwise proxies over the smaller-δ half
/// of the samples, widened to include `fit`.
pub fn estimate_dimension(
    samples: &[NeighborhoodMeasurement],
    ambient: u8,
) -> Result<DimensionEstimate> {
    if ambient != 1 && ambient != 2 {
        return Err(invalid("ambient", format!("must be 1 or 2, got {ambient}")));
    }
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    for s in samples {
        if !(s.measure > 0.0 && s.measure.is_finite()) {
            return Err(Error::NonPositiveMeasure {
                delta: s.delta,
                measure: s.measure,
            });
        }
        if !(s.delta > 0.0 && s.delta < 1.0) {
            return Err(invalid(
                "delta",
                format!("samples need delta in (0, 1), got {}", s.delta),
            ));
        }
    }
    let mut deltas: Vec<f64> = samples.iter().map(|s| s.delta).collect();
    deltas.sort_by(f64::total_cmp);
    if deltas.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("samples", "deltas must be distinct"));
    }

    let xs: Vec<f64> = samples.iter().map(|s| s.delta.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.measure.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let fit = ambient as f64 - slope;

    let mut by_delta: Vec<&NeighborhoodMeasurement> = samples.iter().collect();
    by_delta.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let half = &by_delta[..samples.len().div_ceil(2)];
    let (mut lower, mut upper) = (fit, fit);
    for s in half {
        let p = pointwise_dimension(s, ambient);
        lower = lower.min(p);
        upper = upper.max(p);
    }

    Ok(DimensionEstimate {
        fit,
        upper,
        lower,
        r_squared,
        window: (deltas[0], deltas[deltas.len() - 1]),
        ambient_dim: ambient,
        spread_flag: upper - lower > SPREAD_FLAG,
    })
}

/// Exact 1D measurements of `seq` over the ladder.
pub fn sequence_samples(
    seq: &MonotoneSequence,
    ladder: &DeltaLadder,
) -> Result<Vec<NeighborhoodMeasurement>> {
    if seq.len() < MIN_ESTIMATION_LEN {
        return Err(invalid(
            "sequence",
            format!(
                "need at least {MIN_ESTIMATION_LEN} terms, got {}",
                seq.len()
            ),
        ));
    }
    ladder
        .values()
        .iter()
        .map(|&d| measure_1d_exact(seq, d))
        .collect()
}

pub fn sequence_dimension(
    seq: &MonotoneSequence,
    ladder: &DeltaLadder,
) -> Result<DimensionEstimate> {
    estimate_dimension(&sequence_samples(seq, ladder)?, 1)
}

/// Tiled grid measurements of a set of polylines over the ladder.
///
/// Every polyline must have been sampled with chord error at most `δ_min/32`.
pub fn curve_samples(
    segments: &[TrajectorySegment],
    ladder: &DeltaLadder,
    cell_cap: u64,
) -> Result<Vec<NeighborhoodMeasurement>> {
    let tolerance = segments
        .iter()
        .map(|s| s.chord_tolerance)
        .fold(0.0, f64::max);
    if tolerance > ladder.delta_min / 32.0 {
        return Err(Error::SamplingTooCoarse {
            tolerance,
            delta_min: ladder.delta_min,
        });
    }
    let options = GridOptions::tiled(cell_cap);
    ladder
        .values()
        .iter()
        .map(|&d| measure_2d_grid_with(segments, d, &options))
        .collect()
}

pub fn curve_dimension(
    segments: &[TrajectorySegment],
    ladder: &DeltaLadder,
    cell_cap: u64,
) -> Result<DimensionEstimate> {
    estimate_dimension(&curve_samples(segments, ladder, cell_cap)?, 2)
}

pub fn bundle_dimension(
    bundle: &TrajectoryBundle,
    ladder: &DeltaLadder,
    cell_cap: u64,
) -> Result<DimensionEstimate> {
    curve_dimension(&bundle.segments, ladder, cell_cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighborhood::{Diagnostics, Method};
    use crate::sequence::{geometric_sequence, power_sequence, validate_sequence};
    use proptest::prelude::*;

    fn synthetic(ladder: &DeltaLadder, f: impl Fn(f64) -> f64) -> Vec<NeighborhoodMeasurement> {
        ladder
            .values()
            .iter()
            .map(|&d| NeighborhoodMeasurement {
                delta: d,
                measure: f(d),
                method: Method::Exact1d,
                diagnostics: Diagnostics::CriticalIndex(0),
            })
            .collect()
    }

    #[test]
    fn ladder_decades() {
        let l = make_ladder(1e-4, 1e-1, 4).unwrap();
        for (a, b) in l.values().iter().zip([1e-1, 1e-2, 1e-3, 1e-4]) {
            assert!((a / b - 1.0).abs() < 1e-12);
        }
        let l = make_ladder(1e-6, 1e-2, 9).unwrap();
        assert!((l.ratio() - 10f64.powf(-0.5)).abs() < 1e-12);
        for w in l.values().windows(2) {
            assert!((w[1] / w[0] / l.ratio() - 1.0).abs() < 1e-12);
        }
        assert!(make_ladder(0.1, 0.1, 8).is_err());
        assert!(make_ladder(0.2, 0.1, 8).is_err());
    }

    #[test]
    fn exact_power_laws() {
        let l = DeltaLadder::default_1d();
        let e = estimate_dimension(&synthetic(&l, |d| d.powf(0.5)), 1).unwrap();
        assert!((e.fit - 0.5).abs() < 1e-9);
        let e = estimate_dimension(&synthetic(&l, |d| 3.0 * d.powf(0.25)), 1).unwrap();
        assert!((e.fit - 0.75).abs() < 1e-9);
        assert!((e.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_errors() {
        let l = make_ladder(1e-3, 1e-1, 7).unwrap();
        assert!(matches!(
            estimate_dimension(&synthetic(&l, |d| d), 1),
            Err(Error::TooFewSamples { .. })
        ));
        let l = DeltaLadder::default_1d();
        assert!(matches!(
            estimate_dimension(&synthetic(&l, |_| 0.0), 1),
            Err(Error::NonPositiveMeasure { .. })
        ));
    }

    #[test]
    fn harmonic_sequence_half() {
        let seq = power_sequence(1.0, 1_000_000).unwrap();
        let l = make_ladder(1e-6, 1e-2, 24).unwrap();
        let e = sequence_dimension(&seq, &l).unwrap();
        assert!((e.fit - 0.5).abs() < 0.03, "{e:?}");
    }

    #[test]
    fn geometric_sequence_small() {
        let seq = geometric_sequence(0.5, 64).unwrap();
        let e = sequence_dimension(&seq, &DeltaLadder::default_1d()).unwrap();
        // log-corrected: measure ~ 2δ·log2(1/δ)
        assert!(e.fit < 0.15, "{e:?}");
    }

    #[test]
    fn cubic_tangency_orbit() {
        let mut x = 0.5;
        let mut values = Vec::new();
        for _ in 0..100_000 {
            values.push(x);
            x -= x * x * x;
        }
        let seq = validate_sequence(&values, "x - x^3").unwrap();
        let e = sequence_dimension(&seq, &DeltaLadder::default_1d()).unwrap();
        assert!((e.fit - 2.0 / 3.0).abs() < 0.05, "{e:?}");
    }

    #[test]
    fn finite_stability_and_monotonicity() {
        let l = make_ladder(1e-6, 1e-3, 16).unwrap();
        let a = power_sequence(1.0, 200_000).unwrap();
        let b = power_sequence(2.0, 200_000).unwrap().scaled(0.5).unwrap();
        let da = sequence_dimension(&a, &l).unwrap().fit;
        let db = sequence_dimension(&b, &l).unwrap().fit;
        // Union of the two orbits; gaps of the merged set are not monotone,
        // so measure it with the brute-force union.
        let mut merged: Vec<f64> = a.values().iter().chain(b.values()).copied().collect();
        merged.sort_by(|x, y| y.total_cmp(x));
        merged.dedup();
        let samples: Vec<_> = l
            .values()
            .iter()
            .map(|&d| brute_union(&merged, d))
            .collect();
        let du = estimate_dimension(&samples, 1).unwrap().fit;
        assert!((du - da.max(db)).abs() < 0.05, "{da} {db} {du}");
        assert!(da <= du + 0.03);
    }

    fn brute_union(points: &[f64], delta: f64) -> NeighborhoodMeasurement {
        let mut total = 0.0;
        let mut top = points[0];
        let mut bottom = points[0];
        for &c in points[1..].iter().chain(std::iter::once(&0.0)) {
            if bottom - c < 2.0 * delta {
                bottom = c;
            } else {
                total += top - bottom + 2.0 * delta;
                top = c;
                bottom = c;
            }
        }
        total += top - bottom + 2.0 * delta;
        NeighborhoodMeasurement {
            delta,
            measure: total,
            method: Method::Brute1d,
            diagnostics: Diagnostics::Components(0),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn fit_is_scale_invariant(c in 0.01f64..100.0, p in 0.1f64..0.9) {
            let l = DeltaLadder::default_1d();
            let base = estimate_dimension(&synthetic(&l, |d| d.powf(p) * (1.0 + d)), 1).unwrap();
            let scaled = estimate_dimension(&synthetic(&l, |d| c * d.powf(p) * (1.0 + d)), 1).unwrap();
            prop_assert!((base.fit - scaled.fit).abs() < 1e-9);
            prop_assert!(base.lower <= base.fit && base.fit <= base.upper);
        }

        #[test]
        fn bi_lipschitz_rescaling(lambda in 0.5f64..3.0, a in 0.5f64..2.0) {
            let l = DeltaLadder::default_1d();
            let seq = power_sequence(a, 400_000).unwrap();
            let base = sequence_dimension(&seq, &l).unwrap().fit;
            let scaled = sequence_dimension(&seq.scaled(lambda).unwrap(), &l).unwrap().fit;
            prop_assert!((base - scaled).abs() < 0.02, "{} {}", base, scaled);
        }
    }
}
