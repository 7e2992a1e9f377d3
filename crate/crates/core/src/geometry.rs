//! Planar polylines and trajectory bundles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::MonotoneSequence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Distance from `p` to the chord `a`-`b`.
pub(crate) fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.dist(Point::new(a.x + t * dx, a.y + t * dy))
}

/// A polyline with at least two points and no repeated consecutive points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySegment {
    points: Vec<Point>,
    /// Index of the entry point this segment was started from.
    pub source: usize,
    /// Chord tolerance used when sampling the underlying curve.
    pub chord_tolerance: f64,
    /// Set when some coordinate had to be clamped to the smallest normal float.
    pub clamped: bool,
}

impl TrajectorySegment {
    pub fn new(points: Vec<Point>, source: usize, chord_tolerance: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::DegenerateSegment(format!(
                "segment {source} has {} point(s)",
                points.len()
            )));
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[0].x.is_finite()
                && w[0].y.is_finite()
                && w[1].x.is_finite()
                && w[1].y.is_finite())
            {
                return Err(Error::DegenerateSegment(format!(
                    "segment {source} has a non-finite point near index {i}"
                )));
            }
            if w[0] == w[1] {
                return Err(Error::DegenerateSegment(format!(
                    "segment {source} repeats point {i}"
                )));
            }
        }
        Ok(TrajectorySegment {
            points,
            source,
            chord_tolerance,
            clamped: false,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn start(&self) -> Point {
        self.points[0]
    }

    pub fn end(&self) -> Point {
        self.points[self.points.len() - 1]
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].dist(w[1])).sum()
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points[1..] {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }
}

/// Trajectories between the entry transversal `{x = 1}` and the exit
/// transversal `{y = 1}` of a corner in normal-form coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBundle {
    pub segments: Vec<TrajectorySegment>,
    pub entry: MonotoneSequence,
    /// Exit crossings; may be shorter than `entry` when the tail was clamped.
    pub exit: MonotoneSequence,
    /// Entries dropped from the exit sequence by clamping or cleaning.
    pub exit_dropped: usize,
}

/// Endpoint tolerance of the bundle invariant.
pub const ENDPOINT_TOLERANCE: f64 = 1e-9;

impl TrajectoryBundle {
    pub fn new(
        segments: Vec<TrajectorySegment>,
        entry: MonotoneSequence,
        exit: MonotoneSequence,
        exit_dropped: usize,
    ) -> Result<Self> {
        if segments.len() != entry.len() {
            return Err(Error::DegenerateSegment(format!(
                "{} segments for {} entry points",
                segments.len(),
                entry.len()
            )));
        }
        for (n, seg) in segments.iter().enumerate() {
            let s = seg.start();
            if (s.x - 1.0).abs() > ENDPOINT_TOLERANCE
                || (s.y - entry.values()[n]).abs() > ENDPOINT_TOLERANCE
            {
                return Err(Error::DegenerateSegment(format!(
                    "segment {n} starts at ({}, {}) instead of (1, {})",
                    s.x,
                    s.y,
                    entry.values()[n]
                )));
            }
            if let Some(&x_exit) = exit.values().get(n) {
                let e = seg.end();
                if (e.y - 1.0).abs() > ENDPOINT_TOLERANCE
                    || (e.x - x_exit).abs() > ENDPOINT_TOLERANCE
                {
                    return Err(Error::DegenerateSegment(format!(
                        "segment {n} ends at ({}, {}) instead of ({x_exit}, 1)",
                        e.x, e.y
                    )));
                }
            }
            if seg
                .points()
                .iter()
                .any(|p| !(p.x > 0.0 && p.x <= 1.0 && p.y > 0.0 && p.y <= 1.0))
            {
                return Err(Error::DegenerateSegment(format!(
                    "segment {n} leaves the unit box"
                )));
            }
        }
        Ok(TrajectoryBundle {
            segments,
            entry,
            exit,
            exit_dropped,
        })
    }

    /// Largest chord tolerance among the segments.
    pub fn chord_tolerance(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.chord_tolerance)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_repeated_points() {
        let p = Point::new(0.5, 0.5);
        assert!(TrajectorySegment::new(vec![p, p], 0, 1e-6).is_err());
        assert!(TrajectorySegment::new(vec![p], 0, 1e-6).is_err());
    }

    #[test]
    fn distance_to_chord() {
        let a = Point::new(0.0, 0.0);
        let b = Point::new(1.0, 0.0);
        assert_eq!(point_segment_distance(Point::new(0.5, 0.3), a, b), 0.3);
        assert_eq!(point_segment_distance(Point::new(2.0, 0.0), a, b), 1.0);
    }
}
