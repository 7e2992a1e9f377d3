//! Trajectories of the model systems.
//!
//! Corners use the normal forms `x' = -x, y' = αy + h(x, y)` (hyperbolic
//! saddle) and `x' = -x, y' = αy^m + h(x, y)` (semi-hyperbolic point) in the
//! chart where the entry transversal is `{x = 1}` and the exit is `{y = 1}`.
//! Unperturbed trajectories are sampled from their closed forms; perturbed
//! ones are integrated. Spirals use `r' = -r^(2k+1)` (weak focus) and
//! `r' = -(r - a)^m` (limit cycle), both with `φ' = 1`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{point_segment_distance, Point, TrajectoryBundle, TrajectorySegment};
use crate::sequence::{clean_sequence, validate_sequence, MonotoneSequence};

/// `coeff · x^x_pow · y^y_pow`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub x_pow: u32,
    pub y_pow: u32,
}

impl Term {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.coeff * x.powi(self.x_pow as i32) * y.powi(self.y_pow as i32)
    }
}

fn eval_terms(terms: &[Term], x: f64, y: f64) -> f64 {
    terms.iter().map(|t| t.eval(x, y)).sum()
}

fn check_coeffs(terms: &[Term]) -> Result<()> {
    if terms.iter().any(|t| !t.coeff.is_finite()) {
        return Err(invalid("perturbation", "coefficients must be finite"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleSpec {
    pub alpha: f64,
    #[serde(default)]
    pub perturbation: Vec<Term>,
}

impl SaddleSpec {
    pub fn new(alpha: f64, perturbation: Vec<Term>) -> Result<Self> {
        let spec = SaddleSpec {
            alpha,
            perturbation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn linear(alpha: f64) -> Result<Self> {
        Self::new(alpha, Vec::new())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid(
                "alpha",
                format!("saddle needs 0 < alpha <= 1, got {}", self.alpha),
            ));
        }
        check_coeffs(&self.perturbation)?;
        if let Some(t) = self
            .perturbation
            .iter()
            .find(|t| t.x_pow < 1 || t.y_pow < 2)
        {
            return Err(invalid(
                "perturbation",
                format!("term x^{} y^{} is not divisible by x*y^2", t.x_pow, t.y_pow),
            ));
        }
        Ok(())
    }

    /// Hyperbolicity ratio `1/α`.
    pub fn ratio(&self) -> f64 {
        1.0 / self.alpha
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiHypSpec {
    pub alpha: f64,
    pub m: u32,
    #[serde(default)]
    pub perturbation: Vec<Term>,
}

impl SemiHypSpec {
    pub fn new(alpha: f64, m: u32, perturbation: Vec<Term>) -> Result<Self> {
        let spec = SemiHypSpec {
            alpha,
            m,
            perturbation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid(
                "alpha",
                format!("must be positive, got {}", self.alpha),
            ));
        }
        if self.m < 2 {
            return Err(invalid(
                "m",
                format!("semi-hyperbolic point needs m >= 2, got {}", self.m),
            ));
        }
        check_coeffs(&self.perturbation)?;
        let order = 2 * self.m - 1;
        if let Some(t) = self.perturbation.iter().find(|t| t.y_pow < order) {
            return Err(invalid(
                "perturbation",
                format!("term x^{} y^{} has y-order below {order}", t.x_pow, t.y_pow),
            ));
        }
        Ok(())
    }
}

/// A corner in normal form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CornerSpec {
    Saddle(SaddleSpec),
    SemiHyperbolic(SemiHypSpec),
}

impl CornerSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            CornerSpec::Saddle(s) => s.validate(),
            CornerSpec::SemiHyperbolic(s) => s.validate(),
        }
    }

    fn perturbation(&self) -> &[Term] {
        match self {
            CornerSpec::Saddle(s) => &s.perturbation,
            CornerSpec::SemiHyperbolic(s) => &s.perturbation,
        }
    }

    fn velocity(&self, p: Point) -> Point {
        let y_dot = match self {
            CornerSpec::Saddle(s) => s.alpha * p.y,
            CornerSpec::SemiHyperbolic(s) => s.alpha * p.y.powi(s.m as i32),
        } + eval_terms(self.perturbation(), p.x, p.y);
        Point::new(-p.x, y_dot)
    }
}

const MAX_DEPTH: u32 = 40;

/// Samples `f` on `[t0, t1]`, starting from `base` equal steps and bisecting
/// any step whose midpoint lies farther than `tol` from the chord.
fn sample_curve(f: impl Fn(f64) -> Point, t0: f64, t1: f64, base: usize, tol: f64) -> Vec<Point> {
    let mut out = vec![f(t0)];
    let dt = (t1 - t0) / base as f64;
    let mut stack: Vec<(f64, Point, f64, Point, u32)> = Vec::new();
    let mut a = out[0];
    for i in 0..base {
        let ta = t0 + dt * i as f64;
        let tb = if i + 1 == base {
            t1
        } else {
            t0 + dt * (i + 1) as f64
        };
        let b = f(tb);
        stack.push((ta, a, tb, b, 0));
        while let Some((ta, pa, tb, pb, depth)) = stack.pop() {
            let tm = 0.5 * (ta + tb);
            let pm = f(tm);
            if depth < MAX_DEPTH && point_segment_distance(pm, pa, pb) > tol {
                stack.push((tm, pm, tb, pb, depth + 1));
                stack.push((ta, pa, tm, pm, depth + 1));
            } else if pb != *out.last().unwrap() {
                out.push(pb);
            }
        }
        a = b;
    }
    out
}

fn check_entry(y0: f64) -> Result<()> {
    if !(y0 > 0.0 && y0 < 1.0) {
        return Err(invalid("y0", format!("must lie in (0, 1), got {y0}")));
    }
    Ok(())
}

fn check_tolerance(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(invalid("tolerance", format!("must be positive, got {tol}")));
    }
    Ok(())
}

/// Base subdivision of the `ln y` interval for corner trajectories.
const GRAPH_BASE_STEPS: usize = 16;

/// Trajectory of the linear saddle through `(1, y0)`: `x(y) = (y0/y)^(1/α)`.
pub fn saddle_trajectory(spec: &SaddleSpec, y0: f64, tol: f64) -> Result<TrajectorySegment> {
    spec.validate()?;
    if !spec.perturbation.is_empty() {
        return Err(invalid(
            "perturbation",
            "closed form needs the linear saddle; use integrate_trajectory",
        ));
    }
    check_entry(y0)?;
    check_tolerance(tol)?;
    let inv = 1.0 / spec.alpha;
    let points = sample_curve(
        |s| {
            let y = if s == 0.0 { 1.0 } else { s.exp() };
            let y = if s == y0.ln() { y0 } else { y };
            Point::new((y0 / y).powf(inv), y)
        },
        y0.ln(),
        0.0,
        GRAPH_BASE_STEPS,
        tol,
    );
    TrajectorySegment::new(points, 0, tol)
}

/// `x(y) = exp((y^(1-m) - y0^(1-m)) / (α(m-1)))`, clamped to the smallest
/// positive normal float. The second value reports whether clamping happened.
pub fn semihyp_x(spec: &SemiHypSpec, y0: f64, y: f64) -> (f64, bool) {
    let e = 1.0 - spec.m as f64;
    let arg = (y.powf(e) - y0.powf(e)) / (spec.alpha * (spec.m as f64 - 1.0));
    let x = arg.exp();
    if x < f64::MIN_POSITIVE {
        (f64::MIN_POSITIVE, true)
    } else {
        (x.min(1.0), false)
    }
}

/// Trajectory of `x' = -x, y' = αy^m` through `(1, y0)`.
pub fn semihyp_trajectory(spec: &SemiHypSpec, y0: f64, tol: f64) -> Result<TrajectorySegment> {
    spec.validate()?;
    if !spec.perturbation.is_empty() {
        return Err(invalid(
            "perturbation",
            "closed form needs the unperturbed field; use integrate_trajectory",
        ));
    }
    check_entry(y0)?;
    check_tolerance(tol)?;
    let ln_y0 = y0.ln();
    let mut points = sample_curve(
        |s| {
            let y = if s == 0.0 {
                1.0
            } else if s == ln_y0 {
                y0
            } else {
                s.exp()
            };
            Point::new(semihyp_x(spec, y0, y).0, y)
        },
        ln_y0,
        0.0,
        GRAPH_BASE_STEPS,
        tol,
    );
    points[0].x = 1.0;
    let clamped = semihyp_x(spec, y0, 1.0).1;
    // Clamped stretches are vertical; keep only their end points.
    if clamped {
        let floor = f64::MIN_POSITIVE;
        let mut kept: Vec<Point> = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            let interior = p.x == floor
                && i + 1 < points.len()
                && points[i + 1].x == floor
                && i > 0
                && points[i - 1].x == floor;
            if !interior {
                kept.push(*p);
            }
        }
        points = kept;
    }
    let mut seg = TrajectorySegment::new(points, 0, tol)?;
    seg.clamped = clamped;
    Ok(seg)
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince step: the fifth-order result and the error estimate.
fn dp_step(field: &CornerSpec, p: Point, h: f64) -> (Point, f64) {
    debug_assert_eq!(C[0], 0.0);
    let mut k = [Point::new(0.0, 0.0); 7];
    for i in 0..7 {
        let mut q = p;
        for (j, kj) in k.iter().enumerate().take(i) {
            q.x += h * A[i][j] * kj.x;
            q.y += h * A[i][j] * kj.y;
        }
        k[i] = field.velocity(q);
    }
    let mut hi = p;
    let (mut ex, mut ey) = (0.0, 0.0);
    for i in 0..7 {
        hi.x += h * B5[i] * k[i].x;
        hi.y += h * B5[i] * k[i].y;
        ex += h * (B5[i] - B4[i]) * k[i].x;
        ey += h * (B5[i] - B4[i]) * k[i].y;
    }
    (hi, ex.hypot(ey))
}

/// Local error allowed per unit arc length.
pub const LOCAL_TOLERANCE: f64 = 1e-10;
/// Accuracy in `y` of the located exit crossing.
pub const CROSSING_TOLERANCE: f64 = 1e-12;
const MAX_STEPS: usize = 2_000_000;

fn hermite(p0: Point, f0: Point, p1: Point, f1: Point, h: f64, s: f64) -> Point {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    Point::new(
        h00 * p0.x + h10 * h * f0.x + h01 * p1.x + h11 * h * f1.x,
        h00 * p0.y + h10 * h * f0.y + h01 * p1.y + h11 * h * f1.y,
    )
}

fn in_box(p: Point) -> bool {
    p.x > 0.0 && p.x <= 1.0 + 1e-12 && p.y > 0.0
}

/// Integrates `field` from `start` until it crosses `{y = 1}`.
///
/// Steps are accepted when the error estimate is at most
/// [`LOCAL_TOLERANCE`] times the step's arc length. Between accepted steps
/// the cubic Hermite interpolant is sampled to chord tolerance `tol`.
pub fn integrate_trajectory(
    field: &CornerSpec,
    start: Point,
    tol: f64,
) -> Result<TrajectorySegment> {
    field.validate()?;
    check_tolerance(tol)?;
    if start.y == 1.0 {
        return Err(Error::DegenerateSegment(
            "start lies on the exit transversal; zero-length trajectory".into(),
        ));
    }
    if !(start.x > 0.0 && start.x <= 1.0 && start.y > 0.0 && start.y < 1.0) {
        return Err(invalid(
            "start",
            format!("({}, {}) outside (0,1]x(0,1)", start.x, start.y),
        ));
    }
    let mut points = vec![start];
    let mut p = start;
    let mut h = 1e-3;
    for _ in 0..MAX_STEPS {
        let (q, err) = dp_step(field, p, h);
        let arc = p.dist(q);
        let allowed = LOCAL_TOLERANCE * arc.max(1e-6);
        if err > allowed || !q.x.is_finite() || !q.y.is_finite() {
            let factor = if err > 0.0 && err.is_finite() {
                (0.9 * (allowed / err).powf(0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= factor;
            if h < 1e-14 {
                return Err(Error::Integration(format!(
                    "step size underflow near ({}, {})",
                    p.x, p.y
                )));
            }
            continue;
        }
        let (end, h_used, done) = if q.y >= 1.0 {
            let (mut lo, mut hi) = (0.0, 1.0);
            let mut best = q;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let (r, _) = dp_step(field, p, mid * h);
                best = r;
                if (r.y - 1.0).abs() <= CROSSING_TOLERANCE {
                    hi = mid;
                    break;
                }
                if r.y < 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            if (best.y - 1.0).abs() > CROSSING_TOLERANCE {
                best = dp_step(field, p, hi * h).0;
            }
            (Point::new(best.x, 1.0), hi * h, true)
        } else {
            (q, h, false)
        };
        if !in_box(end) {
            return Err(Error::Integration(format!(
                "trajectory left the unit box at ({}, {}) before reaching y = 1",
                end.x, end.y
            )));
        }
        densify(field, p, end, h_used, tol, &mut points);
        if done {
            let mut seg = TrajectorySegment::new(points, 0, tol)?;
            seg.clamped = false;
            return Ok(seg);
        }
        p = end;
        if err > 0.0 {
            h *= (0.9 * (allowed / err).powf(0.2)).clamp(0.2, 5.0);
        } else {
            h *= 5.0;
        }
    }
    Err(Error::Integration(format!(
        "no crossing of y = 1 within {MAX_STEPS} steps"
    )))
}

fn densify(field: &CornerSpec, p0: Point, p1: Point, h: f64, tol: f64, out: &mut Vec<Point>) {
    let f0 = field.velocity(p0);
    let f1 = field.velocity(p1);
    let interp = |s: f64| {
        if s == 1.0 {
            p1
        } else {
            hermite(p0, f0, p1, f1, h, s)
        }
    };
    let pts = sample_curve(interp, 0.0, 1.0, 1, tol);
    for q in pts.into_iter().skip(1) {
        if q != *out.last().unwrap() {
            out.push(q);
        }
    }
}

/// Trajectory through `(1, y0)` with the closed form when available.
pub fn corner_trajectory(spec: &CornerSpec, y0: f64, tol: f64) -> Result<TrajectorySegment> {
    match spec {
        CornerSpec::Saddle(s) if s.perturbation.is_empty() => saddle_trajectory(s, y0, tol),
        CornerSpec::SemiHyperbolic(s) if s.perturbation.is_empty() => {
            semihyp_trajectory(s, y0, tol)
        }
        _ => {
            check_entry(y0)?;
            integrate_trajectory(spec, Point::new(1.0, y0), tol)
        }
    }
}

/// One trajectory per entry point plus the cleaned exit sequence.
///
/// Exit crossings are cut at the first clamped trajectory, then cleaned.
pub fn build_bundle(
    spec: &CornerSpec,
    entry: &MonotoneSequence,
    tol: f64,
) -> Result<TrajectoryBundle> {
    spec.validate()?;
    if entry.is_empty() {
        return Err(invalid("sequence", "empty entry sequence"));
    }
    if entry.values()[0] >= 1.0 {
        return Err(invalid(
            "sequence",
            format!(
                "entry points must lie in (0, 1), first is {}",
                entry.values()[0]
            ),
        ));
    }
    let segments = build_segments(spec, entry.values(), tol)?;
    let clamp_at = segments
        .iter()
        .position(|s| s.clamped)
        .unwrap_or(segments.len());
    let exits: Vec<f64> = segments[..clamp_at].iter().map(|s| s.end().x).collect();
    let cleaned = clean_sequence(&exits, format!("exit of {}", entry.origin()))
        .map_err(|e| Error::Integration(format!("exit sequence rejected: {e}")))?;
    let dropped = entry.len() - cleaned.sequence.len();
    TrajectoryBundle::new(segments, entry.clone(), cleaned.sequence, dropped)
}

fn build_segments(spec: &CornerSpec, ys: &[f64], tol: f64) -> Result<Vec<TrajectorySegment>> {
    let threads = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(ys.len().max(1));
    let chunk = ys.len().div_ceil(threads);
    let results: Vec<Result<Vec<TrajectorySegment>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ys
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| {
                scope.spawn(move || {
                    part.iter()
                        .enumerate()
                        .map(|(i, &y)| {
                            let mut seg = corner_trajectory(spec, y, tol)?;
                            seg.source = c * chunk + i;
                            Ok(seg)
                        })
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("trajectory worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(ys.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Entry sequence `y_n = n^(-a)` for `n = 2..=count+1`, strictly inside `(0, 1)`.
pub fn entry_power_sequence(a: f64, count: usize) -> Result<MonotoneSequence> {
    crate::sequence::power_sequence(a, count + 1)?.skip(1)
}

/// Fewest base points per turn of a spiral.
pub const POINTS_PER_TURN: usize = 64;
/// Smallest allowed `turns` for spirals.
pub const MIN_TURNS: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusSpec {
    pub k: u32,
    pub r0: f64,
    /// Upper bound on the number of turns generated.
    pub turns: u64,
}

impl FocusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(invalid("k", "must be at least 1"));
        }
        if !(self.r0 > 0.0 && self.r0 < 1.0) {
            return Err(invalid(
                "r0",
                format!("must lie in (0, 1), got {}", self.r0),
            ));
        }
        if self.turns < MIN_TURNS {
            return Err(invalid(
                "turns",
                format!("need at least {MIN_TURNS}, got {}", self.turns),
            ));
        }
        Ok(())
    }

    /// `r(φ) = (r0^(-2k) + 2kφ)^(-1/(2k))`.
    pub fn radius(&self, phi: f64) -> f64 {
        let two_k = 2.0 * self.k as f64;
        (self.r0.powf(-two_k) + two_k * phi).powf(-1.0 / two_k)
    }

    /// Angle at which the radius reaches `r`.
    pub fn angle_at(&self, r: f64) -> f64 {
        let two_k = 2.0 * self.k as f64;
        (r.powf(-two_k) - self.r0.powf(-two_k)) / two_k
    }
}

/// The focus spiral is followed until its radius falls to this fraction of
/// `delta_min`, so the remaining disk is inside every neighborhood.
pub const FOCUS_STOP_FRACTION: f64 = 0.9;

/// Polyline of the weak-focus spiral, from `r0` down to radius
/// `FOCUS_STOP_FRACTION · delta_min`, with chord error at most `delta_min/32`.
pub fn focus_spiral(spec: &FocusSpec, delta_min: f64) -> Result<TrajectorySegment> {
    spec.validate()?;
    check_tolerance(delta_min)?;
    let target = FOCUS_STOP_FRACTION * delta_min;
    if target >= spec.r0 {
        return Err(invalid(
            "delta_min",
            format!("must be below r0 / {FOCUS_STOP_FRACTION}"),
        ));
    }
    let phi_end = spec.angle_at(target);
    let needed = phi_end / TAU;
    if needed > spec.turns as f64 {
        return Err(Error::InsufficientTurns {
            needed,
            allowed: spec.turns,
        });
    }
    polar_spiral(|phi| spec.radius(phi), phi_end, delta_min / 32.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Inside,
    Outside,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCycleSpec {
    pub a: f64,
    pub m: u32,
    pub side: Side,
    pub r0: f64,
    /// Upper bound on the number of turns generated.
    pub turns: u64,
}

impl LimitCycleSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(invalid(
                "a",
                format!("cycle radius must be positive, got {}", self.a),
            ));
        }
        if self.m < 1 {
            return Err(invalid("m", "multiplicity must be at least 1"));
        }
        let ok = match self.side {
            Side::Inside => self.r0 > 0.0 && self.r0 < self.a,
            Side::Outside => self.r0 > self.a && self.r0.is_finite(),
        };
        if !ok {
            return Err(invalid(
                "r0",
                format!(
                    "{} is not on the {:?} side of the cycle r = {}",
                    self.r0, self.side, self.a
                ),
            ));
        }
        if self.turns < MIN_TURNS {
            return Err(invalid(
                "turns",
                format!("need at least {MIN_TURNS}, got {}", self.turns),
            ));
        }
        Ok(())
    }

    /// Distance `|r - a|` after turning by `φ`.
    pub fn offset(&self, phi: f64) -> f64 {
        let u0 = (self.r0 - self.a).abs();
        if self.m == 1 {
            u0 * (-phi).exp()
        } else {
            let e = 1.0 - self.m as f64;
            (u0.powf(e) + (self.m as f64 - 1.0) * phi).powf(1.0 / e)
        }
    }

    pub fn radius(&self, phi: f64) -> f64 {
        match self.side {
            Side::Inside => self.a - self.offset(phi),
            Side::Outside => self.a + self.offset(phi),
        }
    }

    /// Angle at which `|r - a|` reaches `u`.
    pub fn angle_at(&self, u: f64) -> f64 {
        let u0 = (self.r0 - self.a).abs();
        if self.m == 1 {
            (u0 / u).ln()
        } else {
            let e = 1.0 - self.m as f64;
            (u.powf(e) - u0.powf(e)) / (self.m as f64 - 1.0)
        }
    }
}

/// Polyline of the spiral around the cycle, followed until `|r - a|` drops
/// below `delta_min / 10`, with chord error at most `delta_min/32`.
pub fn limit_cycle_spiral(spec: &LimitCycleSpec, delta_min: f64) -> Result<TrajectorySegment> {
    spec.validate()?;
    check_tolerance(delta_min)?;
    let target = delta_min / 10.0;
    if target >= (spec.r0 - spec.a).abs() {
        return Err(invalid(
            "delta_min",
            "r0 is already within delta_min/10 of the cycle",
        ));
    }
    let phi_end = spec.angle_at(target);
    let needed = phi_end / TAU;
    if needed > spec.turns as f64 {
        return Err(Error::InsufficientTurns {
            needed,
            allowed: spec.turns,
        });
    }
    polar_spiral(|phi| spec.radius(phi), phi_end, delta_min / 32.0)
}

fn polar_spiral(radius: impl Fn(f64) -> f64, phi_end: f64, tol: f64) -> Result<TrajectorySegment> {
    let base = ((phi_end / TAU) * POINTS_PER_TURN as f64)
        .ceil()
        .max(POINTS_PER_TURN as f64) as usize;
    let points = sample_curve(
        |phi| {
            let r = radius(phi);
            Point::new(r * phi.cos(), r * phi.sin())
        },
        0.0,
        phi_end,
        base,
        tol,
    );
    TrajectorySegment::new(points, 0, tol)
}

/// Crossings of the spiral with the positive x-axis, `r(2πn)` for `n < count`.
pub fn focus_crossings(spec: &FocusSpec, count: usize) -> Result<MonotoneSequence> {
    spec.validate()?;
    let values: Vec<f64> = (0..count).map(|n| spec.radius(TAU * n as f64)).collect();
    validate_sequence(&values, format!("focus k={} crossings", spec.k))
}

/// Offsets `|r(2πn) - a|` of the limit-cycle spiral for `n < count`.
pub fn limit_cycle_crossings(spec: &LimitCycleSpec, count: usize) -> Result<MonotoneSequence> {
    spec.validate()?;
    let values: Vec<f64> = (0..count).map(|n| spec.offset(TAU * n as f64)).collect();
    validate_sequence(&values, format!("limit cycle m={} offsets", spec.m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn max_chord_error(seg: &TrajectorySegment, f: impl Fn(Point) -> f64) -> f64 {
        seg.points().iter().map(|&p| f(p)).fold(0.0, f64::max)
    }

    #[test]
    fn saddle_closed_form() {
        let s = SaddleSpec::linear(0.5).unwrap();
        let seg = saddle_trajectory(&s, 0.25, 1e-6).unwrap();
        assert_eq!(seg.start(), Point::new(1.0, 0.25));
        assert!((seg.end().x - 0.0625).abs() < 1e-15);
        let p = seg
            .points()
            .iter()
            .min_by(|a, b| (a.y - 0.5).abs().total_cmp(&(b.y - 0.5).abs()))
            .unwrap();
        assert!((p.x - (0.25 / p.y).powi(2)).abs() < 1e-14);
        let s = SaddleSpec::linear(1.0).unwrap();
        let seg = saddle_trajectory(&s, 0.1, 1e-6).unwrap();
        assert!((seg.end().x - 0.1).abs() < 1e-15);
    }

    #[test]
    fn saddle_graph_property_and_chords() {
        let s = SaddleSpec::linear(0.5).unwrap();
        let tol = 1e-5;
        let seg = saddle_trajectory(&s, 0.01, tol).unwrap();
        for w in seg.points().windows(2) {
            assert!(w[1].y > w[0].y && w[1].x < w[0].x);
            // dense check of chord error on each piece
            for i in 1..16 {
                let y = w[0].y + (w[1].y - w[0].y) * i as f64 / 16.0;
                let q = Point::new((0.01 / y).powi(2), y);
                assert!(point_segment_distance(q, w[0], w[1]) < 2.0 * tol);
            }
        }
    }

    #[test]
    fn semihyp_closed_form() {
        let s = SemiHypSpec::new(1.0, 2, vec![]).unwrap();
        let seg = semihyp_trajectory(&s, 0.5, 1e-6).unwrap();
        assert!((seg.end().x - (-1f64).exp()).abs() < 1e-15);
        let seg = semihyp_trajectory(&s, 0.1, 1e-6).unwrap();
        assert!((seg.end().x - (-9f64).exp()).abs() < 1e-17);
        assert!(!seg.clamped);
        let seg = semihyp_trajectory(&s, 1e-3, 1e-6).unwrap();
        assert!(seg.clamped);
        assert_eq!(seg.end().x, f64::MIN_POSITIVE);
    }

    #[test]
    fn nucleus_integral_shrinks() {
        // ∫_{y0}^1 x(y) dy / y0 by composite Simpson in ln y
        let s = SemiHypSpec::new(1.0, 2, vec![]).unwrap();
        let ratio = |y0: f64| {
            let n = 20_000;
            let (a, b) = (y0.ln(), 0.0);
            let h = (b - a) / n as f64;
            let g = |t: f64| semihyp_x(&s, y0, t.exp()).0 * t.exp();
            let mut sum = g(a) + g(b);
            for i in 1..n {
                sum += g(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            sum * h / 3.0 / y0
        };
        let vals: Vec<f64> = [0.1, 0.05, 0.025, 0.0125]
            .iter()
            .map(|&y| ratio(y))
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
        assert!(vals[3] < 0.02);
    }

    #[test]
    fn perturbation_rules() {
        assert!(SaddleSpec::new(
            0.5,
            vec![Term {
                coeff: 0.1,
                x_pow: 1,
                y_pow: 2
            }]
        )
        .is_ok());
        assert!(SaddleSpec::new(
            0.5,
            vec![Term {
                coeff: 0.1,
                x_pow: 0,
                y_pow: 3
            }]
        )
        .is_err());
        assert!(SaddleSpec::new(
            0.5,
            vec![Term {
                coeff: 0.1,
                x_pow: 2,
                y_pow: 1
            }]
        )
        .is_err());
        assert!(SaddleSpec::linear(1.5).is_err());
        assert!(SemiHypSpec::new(
            1.0,
            2,
            vec![Term {
                coeff: 1.0,
                x_pow: 0,
                y_pow: 3
            }]
        )
        .is_ok());
        assert!(SemiHypSpec::new(
            1.0,
            2,
            vec![Term {
                coeff: 1.0,
                x_pow: 5,
                y_pow: 2
            }]
        )
        .is_err());
        assert!(SemiHypSpec::new(1.0, 1, vec![]).is_err());
    }

    #[test]
    fn integrator_start_on_exit_is_degenerate() {
        let f = CornerSpec::Saddle(SaddleSpec::linear(0.5).unwrap());
        assert!(matches!(
            integrate_trajectory(&f, Point::new(1.0, 1.0), 1e-6),
            Err(Error::DegenerateSegment(_))
        ));
    }

    #[test]
    fn integrator_matches_semihyp_closed_form() {
        let s = SemiHypSpec::new(1.0, 2, vec![]).unwrap();
        let seg = integrate_trajectory(
            &CornerSpec::SemiHyperbolic(s.clone()),
            Point::new(1.0, 0.2),
            1e-6,
        )
        .unwrap();
        let err = max_chord_error(&seg, |p| (p.x - semihyp_x(&s, 0.2, p.y).0).abs());
        assert!(err < 1e-8, "{err}");
        assert!((seg.end().x - (-4f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn perturbed_saddle_exit_is_comparable() {
        let f = CornerSpec::Saddle(
            SaddleSpec::new(
                0.5,
                vec![Term {
                    coeff: 0.1,
                    x_pow: 1,
                    y_pow: 2,
                }],
            )
            .unwrap(),
        );
        for y0 in [0.3, 0.1, 0.01] {
            let seg = integrate_trajectory(&f, Point::new(1.0, y0), 1e-6).unwrap();
            let ratio = seg.end().x / (y0 * y0);
            assert!(ratio > 0.5 && ratio < 2.0, "{ratio}");
            assert_eq!(seg.end().y, 1.0);
        }
    }

    #[test]
    fn bundle_exit_identity() {
        let spec = CornerSpec::Saddle(SaddleSpec::linear(0.5).unwrap());
        let entry = entry_power_sequence(1.0, 200).unwrap();
        let b = build_bundle(&spec, &entry, 1e-5).unwrap();
        assert_eq!(b.exit.len(), 200);
        for (y, x) in entry.values().iter().zip(b.exit.values()) {
            assert!((x - y * y).abs() < 1e-12);
        }
        assert_eq!(b.segments[17].source, 17);
    }

    #[test]
    fn semihyp_bundle_exit_clamps() {
        let spec = CornerSpec::SemiHyperbolic(SemiHypSpec::new(1.0, 2, vec![]).unwrap());
        let entry = entry_power_sequence(1.0, 1000).unwrap();
        let b = build_bundle(&spec, &entry, 1e-5).unwrap();
        assert!(b.exit_dropped > 0 && b.exit.len() < 1000);
        assert!(b.exit.values().iter().all(|&x| x >= f64::MIN_POSITIVE));
    }

    #[test]
    fn bundle_rejects_entry_at_one() {
        let spec = CornerSpec::Saddle(SaddleSpec::linear(0.5).unwrap());
        let entry = crate::sequence::power_sequence(1.0, 10).unwrap();
        assert!(build_bundle(&spec, &entry, 1e-5).is_err());
    }

    #[test]
    fn focus_radius_and_turn_budget() {
        let f = FocusSpec {
            k: 1,
            r0: 0.5,
            turns: 100,
        };
        assert!((f.radius(0.0) - 0.5).abs() < 1e-15);
        assert!((f.radius(f.angle_at(0.1)) - 0.1).abs() < 1e-12);
        assert!(matches!(
            focus_spiral(&f, 1e-3),
            Err(Error::InsufficientTurns { .. })
        ));
        let seg = focus_spiral(&f, 0.05).unwrap();
        let end = seg.end();
        assert!((end.x.hypot(end.y) - FOCUS_STOP_FRACTION * 0.05).abs() < 1e-12);
        assert!(seg.points().len() >= 64);
        assert!(FocusSpec {
            k: 1,
            r0: 0.5,
            turns: 99
        }
        .validate()
        .is_err());
    }

    #[test]
    fn limit_cycle_closed_form() {
        let c = LimitCycleSpec {
            a: 0.5,
            m: 2,
            side: Side::Outside,
            r0: 0.75,
            turns: 10_000,
        };
        // u' = -u^2 gives 1/u = 1/u0 + φ
        assert!((c.offset(6.0) - 1.0 / (4.0 + 6.0)).abs() < 1e-15);
        let c1 = LimitCycleSpec { m: 1, ..c.clone() };
        assert!((c1.offset(2.0) - 0.25 * (-2f64).exp()).abs() < 1e-15);
        let inside = LimitCycleSpec {
            side: Side::Inside,
            r0: 0.25,
            ..c.clone()
        };
        assert!((inside.radius(6.0) - (0.5 - 0.1)).abs() < 1e-15);
        assert!(LimitCycleSpec {
            side: Side::Inside,
            ..c.clone()
        }
        .validate()
        .is_err());
        let seg = limit_cycle_spiral(&c1, 1e-3).unwrap();
        let end = seg.end();
        assert!((end.x.hypot(end.y) - 0.5 - 1e-4).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn exit_identity(alpha in 0.2f64..=1.0, y0 in 1e-3f64..0.99) {
            let s = SaddleSpec::linear(alpha).unwrap();
            let seg = saddle_trajectory(&s, y0, 1e-5).unwrap();
            prop_assert!((seg.end().x - y0.powf(1.0 / alpha)).abs() < 1e-12);
            prop_assert_eq!(seg.end().y, 1.0);
        }

        #[test]
        fn integrator_matches_saddle_closed_form(alpha in 0.3f64..=1.0, y0 in 0.01f64..0.9) {
            let s = SaddleSpec::linear(alpha).unwrap();
            let seg = integrate_trajectory(&CornerSpec::Saddle(s), Point::new(1.0, y0), 1e-5).unwrap();
            let err = max_chord_error(&seg, |p| (p.x - (y0 / p.y).powf(1.0 / alpha)).abs());
            prop_assert!(err < 1e-8, "{}", err);
            prop_assert!((seg.end().x - y0.powf(1.0 / alpha)).abs() < 1e-8);
        }
    }
}
