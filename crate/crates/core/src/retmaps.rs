//! One-dimensional maps on a transversal: Dulac corner maps `x^r`, regular
//! transitions `βy(1 + αy^(k-1))`, first-return maps of 2-cycles and their
//! orbits.
//!
//! Expansions are tracked to first order: a map is `A·x^ρ·(1 + Σ c·x^e·L)`
//! where `L` is `1` or `-ln x`, and composition keeps every term that is
//! linear in the corrections. The leading correction, which is all the
//! dimension formulas need, is exact under this truncation.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sequence::{clean_sequence, MonotoneSequence, MIN_ESTIMATION_LEN};

/// Relative tolerance for "equals one" tests on multipliers and exponents.
pub const UNIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum MapSpec {
    /// `A·x^r`
    Power { a: f64, r: f64 },
    /// `λ·x`
    Linear { lambda: f64 },
    /// `x + C·x^k`
    Tangent { k: u32, c: f64 },
    /// `x + C·x^k·(-ln x)`
    TangentLog { k: u32, c: f64 },
    /// Applied first to last.
    Composite { maps: Vec<MapSpec> },
}

impl MapSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            MapSpec::Power { a, r } => {
                if !(*a > 0.0 && a.is_finite()) {
                    return Err(invalid("a", format!("power map needs A > 0, got {a}")));
                }
                if !(*r > 0.0 && r.is_finite()) {
                    return Err(invalid("r", format!("power map needs r > 0, got {r}")));
                }
            }
            MapSpec::Linear { lambda } => {
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return Err(invalid("lambda", format!("must be positive, got {lambda}")));
                }
            }
            MapSpec::Tangent { k, c } | MapSpec::TangentLog { k, c } => {
                if *k < 2 {
                    return Err(invalid(
                        "k",
                        format!("tangent order must be at least 2, got {k}"),
                    ));
                }
                if !(c.is_finite() && *c != 0.0) {
                    return Err(invalid("c", format!("must be finite and nonzero, got {c}")));
                }
            }
            MapSpec::Composite { maps } => {
                if maps.is_empty() {
                    return Err(invalid("maps", "composite must be nonempty"));
                }
                for m in maps {
                    m.validate()?;
                }
            }
        }
        Ok(())
    }

    fn has_corrections(&self) -> bool {
        match self {
            MapSpec::Power { .. } | MapSpec::Linear { .. } => false,
            MapSpec::Tangent { .. } | MapSpec::TangentLog { .. } => true,
            MapSpec::Composite { maps } => maps.iter().any(MapSpec::has_corrections),
        }
    }

    fn apply(&self, x: f64) -> Result<f64> {
        let y = match self {
            MapSpec::Power { a, r } => a * x.powf(*r),
            MapSpec::Linear { lambda } => lambda * x,
            MapSpec::Tangent { k, c } => x + c * x.powi(*k as i32),
            MapSpec::TangentLog { k, c } => x + c * x.powi(*k as i32) * (-x.ln()),
            MapSpec::Composite { maps } => {
                let mut v = x;
                for (i, m) in maps.iter().enumerate() {
                    v = m.apply(v)?;
                    if i + 1 < maps.len() && !(v > 0.0 && v < 1.0) {
                        return Err(Error::OutOfDomain {
                            x,
                            reason: format!(
                                "stage {} of the composite gives {v}, outside (0, 1)",
                                i + 1
                            ),
                        });
                    }
                }
                v
            }
        };
        Ok(y)
    }
}

/// Spacing of the monotonicity probe.
pub const PROBE_STEP: f64 = 1e-3;
/// Largest domain cap for maps with correction terms.
pub const PROBE_MAX: f64 = 0.5;

/// Right end of the domain on which the model is used.
///
/// Pure power and linear maps are monotone everywhere and get `+∞`. Maps
/// with correction terms are probed on a `1e-3` grid up to `0.5`; the cap is
/// the last probe point before the model stops increasing or leaves `(0, 1)`.
pub fn domain_max(spec: &MapSpec) -> Result<f64> {
    spec.validate()?;
    if !spec.has_corrections() {
        return Ok(f64::INFINITY);
    }
    let steps = (PROBE_MAX / PROBE_STEP).round() as usize;
    let mut prev: Option<f64> = None;
    let mut cap = 0.0;
    for i in 1..=steps {
        let x = i as f64 * PROBE_STEP;
        let y = match spec.apply(x) {
            Ok(y) if y > 0.0 && y < 1.0 => y,
            _ => break,
        };
        if prev.is_some_and(|p| y <= p) {
            break;
        }
        prev = Some(y);
        cap = x;
    }
    if cap == 0.0 {
        return Err(Error::OutOfDomain {
            x: PROBE_STEP,
            reason: "model is not increasing near 0".into(),
        });
    }
    Ok(cap)
}

pub fn eval_map(spec: &MapSpec, x: f64) -> Result<f64> {
    let cap = domain_max(spec)?;
    if !(x > 0.0 && x <= cap) {
        return Err(Error::OutOfDomain {
            x,
            reason: format!("domain is (0, {cap}]"),
        });
    }
    spec.apply(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub coeff: f64,
    pub exponent: f64,
    /// Carries a `-ln x` factor.
    pub log: bool,
}

/// `multiplier · x^exponent · (1 + Σ corrections)` to first order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRecord {
    pub multiplier: f64,
    pub exponent: f64,
    /// Sorted by increasing exponent, log terms first on ties; zero terms removed.
    pub corrections: Vec<Correction>,
    /// Some input map had a correction term.
    pub corrected_input: bool,
}

impl ExpansionRecord {
    fn identity() -> Self {
        ExpansionRecord {
            multiplier: 1.0,
            exponent: 1.0,
            corrections: Vec::new(),
            corrected_input: false,
        }
    }

    pub fn leading(&self) -> Option<Correction> {
        self.corrections.first().copied()
    }

    fn normalize(&mut self) {
        self.corrections
            .sort_by(|a, b| a.exponent.total_cmp(&b.exponent).then(b.log.cmp(&a.log)));
        let mut merged: Vec<Correction> = Vec::new();
        for c in self.corrections.drain(..) {
            match merged.last_mut() {
                Some(m)
                    if m.log == c.log
                        && (m.exponent - c.exponent).abs()
                            <= UNIT_TOLERANCE * m.exponent.max(1.0) =>
                {
                    m.coeff += c.coeff;
                }
                _ => merged.push(c),
            }
        }
        let scale = merged.iter().map(|c| c.coeff.abs()).fold(0.0, f64::max);
        merged.retain(|c| c.coeff.abs() > UNIT_TOLERANCE * scale.max(1.0));
        self.corrections = merged;
    }

    /// Record of `outer ∘ self`.
    fn then(&self, outer: &ExpansionRecord) -> ExpansionRecord {
        let (a1, r1) = (self.multiplier, self.exponent);
        let mut corrections: Vec<Correction> = self
            .corrections
            .iter()
            .map(|c| Correction {
                coeff: outer.exponent * c.coeff,
                ..*c
            })
            .collect();
        for c in &outer.corrections {
            // c·(A1 x^r1)^e·(-ln(A1 x^r1))^log
            let base = c.coeff * a1.powf(c.exponent);
            let exponent = r1 * c.exponent;
            if c.log {
                corrections.push(Correction {
                    coeff: base * r1,
                    exponent,
                    log: true,
                });
                corrections.push(Correction {
                    coeff: -base * a1.ln(),
                    exponent,
                    log: false,
                });
            } else {
                corrections.push(Correction {
                    coeff: base,
                    exponent,
                    log: false,
                });
            }
        }
        let mut out = ExpansionRecord {
            multiplier: outer.multiplier * a1.powf(outer.exponent),
            exponent: r1 * outer.exponent,
            corrections,
            corrected_input: self.corrected_input || outer.corrected_input,
        };
        out.normalize();
        out
    }
}

pub fn expansion(spec: &MapSpec) -> Result<ExpansionRecord> {
    spec.validate()?;
    Ok(expand(spec))
}

fn expand(spec: &MapSpec) -> ExpansionRecord {
    match spec {
        MapSpec::Power { a, r } => ExpansionRecord {
            multiplier: *a,
            exponent: *r,
            ..ExpansionRecord::identity()
        },
        MapSpec::Linear { lambda } => ExpansionRecord {
            multiplier: *lambda,
            ..ExpansionRecord::identity()
        },
        MapSpec::Tangent { k, c } | MapSpec::TangentLog { k, c } => ExpansionRecord {
            multiplier: 1.0,
            exponent: 1.0,
            corrections: vec![Correction {
                coeff: *c,
                exponent: (*k - 1) as f64,
                log: matches!(spec, MapSpec::TangentLog { .. }),
            }],
            corrected_input: true,
        },
        MapSpec::Composite { maps } => maps
            .iter()
            .fold(ExpansionRecord::identity(), |acc, m| acc.then(&expand(m))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum Classification {
    /// Leading exponent `r ≠ 1`.
    StronglyHyperbolic {
        r: f64,
    },
    /// Exponent 1, multiplier `λ ≠ 1`.
    Hyperbolic {
        multiplier: f64,
    },
    /// `x + C·x^order + …`; the order may be non-integer for compositions.
    Tangent {
        order: f64,
        coeff: f64,
    },
    /// `x + C·x^order·(-ln x) + …`
    TangentLog {
        order: f64,
        coeff: f64,
    },
    IdentityLike,
}

pub fn classify_record(record: &ExpansionRecord) -> Result<Classification> {
    if (record.exponent - 1.0).abs() > UNIT_TOLERANCE {
        return Ok(Classification::StronglyHyperbolic { r: record.exponent });
    }
    if (record.multiplier - 1.0).abs() > UNIT_TOLERANCE {
        return Ok(Classification::Hyperbolic {
            multiplier: record.multiplier,
        });
    }
    match record.leading() {
        Some(c) if c.log => Ok(Classification::TangentLog {
            order: 1.0 + c.exponent,
            coeff: c.coeff,
        }),
        Some(c) => Ok(Classification::Tangent {
            order: 1.0 + c.exponent,
            coeff: c.coeff,
        }),
        None if record.corrected_input => Err(Error::Contradictory(
            "multiplier is 1 and the correction terms cancel; the truncated model cannot decide the class".into(),
        )),
        None => Ok(Classification::IdentityLike),
    }
}

pub fn classify_map(spec: &MapSpec) -> Result<Classification> {
    classify_record(&expansion(spec)?)
}

/// Box dimension of an orbit accumulating at 0.
pub fn orbit_dim_oracle(class: &Classification) -> Result<f64> {
    match class {
        Classification::StronglyHyperbolic { .. } | Classification::Hyperbolic { .. } => Ok(0.0),
        Classification::Tangent { order, .. } | Classification::TangentLog { order, .. } => {
            Ok(1.0 - 1.0 / order)
        }
        Classification::IdentityLike => Err(invalid(
            "classification",
            "identity-like map has no accumulating orbit",
        )),
    }
}

/// Nearest tangency order for an orbit dimension `d`, `round(1/(1-d))`,
/// with a flag when `1/(1-d)` is more than 0.15 from it.
pub fn tangency_order_from_dim(d: f64) -> Result<(u32, bool)> {
    if !(0.0..1.0).contains(&d) {
        return Err(invalid(
            "d",
            format!("orbit dimension must lie in [0, 1), got {d}"),
        ));
    }
    let g = 1.0 / (1.0 - d);
    let k = g.round();
    Ok((k as u32, (g - k).abs() > 0.15))
}

/// Orbit `x_{n+1} = P(x_n)` starting at `x0`, tail-cleaned.
pub fn orbit(spec: &MapSpec, x0: f64, count: usize) -> Result<MonotoneSequence> {
    if count < MIN_ESTIMATION_LEN {
        return Err(invalid(
            "N",
            format!("need at least {MIN_ESTIMATION_LEN} terms, got {count}"),
        ));
    }
    let cap = domain_max(spec)?;
    if !(x0 > 0.0 && x0 <= cap) {
        return Err(Error::OutOfDomain {
            x: x0,
            reason: format!("orbit start outside (0, {cap}]"),
        });
    }
    let mut values = Vec::with_capacity(count);
    let mut x = x0;
    values.push(x);
    for n in 1..count {
        let next = spec.apply(x)?;
        if n <= 3 && next.partial_cmp(&x) != Some(std::cmp::Ordering::Less) {
            return Err(Error::NonContracting(format!(
                "iterate {n} is {next}, not below {x}"
            )));
        }
        if next <= 0.0 || next.is_nan() {
            break;
        }
        values.push(next);
        x = next;
    }
    Ok(clean_sequence(&values, format!("orbit of {spec:?} from {x0}"))?.sequence)
}

/// Model of a hyperbolic 2-cycle with saddles of ratios `r1`, `r2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoCycleSpec {
    pub r1: f64,
    pub r2: f64,
    pub beta12: f64,
    pub beta21: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// `None` stands for `k = ∞` (no correction).
    pub k1: Option<u32>,
    pub k2: Option<u32>,
    /// Caller's statement that `r1` is rational when `r1·r2 = 1`.
    #[serde(default)]
    pub resonant: bool,
}

fn k_minus_one(k: Option<u32>) -> f64 {
    k.map_or(f64::INFINITY, |k| (k - 1) as f64)
}

impl TwoCycleSpec {
    /// `r1·r2 = 1` to [`UNIT_TOLERANCE`].
    pub fn reciprocal_ratios(&self) -> bool {
        (self.r1 * self.r2 - 1.0).abs() <= UNIT_TOLERANCE
    }

    pub fn lambda1(&self) -> f64 {
        self.beta21 * self.beta12.powf(self.r2)
    }

    pub fn lambda2(&self) -> f64 {
        self.beta12 * self.beta21.powf(self.r1)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r1", self.r1),
            ("r2", self.r2),
            ("beta12", self.beta12),
            ("beta21", self.beta21),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        for (name, k, a) in [("k1", self.k1, self.alpha1), ("k2", self.k2, self.alpha2)] {
            if !a.is_finite() {
                return Err(invalid(name, "alpha must be finite"));
            }
            match k {
                None if a != 0.0 => {
                    return Err(invalid(name, "k = infinity requires alpha = 0"));
                }
                Some(k) if k < 2 => {
                    return Err(invalid(name, format!("must be at least 2, got {k}")));
                }
                _ => {}
            }
        }
        if self.reciprocal_ratios() {
            if self.resonant {
                return Err(Error::InvalidCycle(
                    "r1*r2 = 1 with r1 rational is a resonant cycle; not modelled".into(),
                ));
            }
            let trivial_multiplier = (self.lambda1() - 1.0).abs() <= UNIT_TOLERANCE;
            if trivial_multiplier && self.alpha1 == 0.0 && self.alpha2 == 0.0 {
                return Err(Error::InvalidCycle(
                    "multiplier 1 with alpha1 = alpha2 = 0: the first return map is the identity"
                        .into(),
                ));
            }
            let (e1, e2) = (k_minus_one(self.k1), k_minus_one(self.k2));
            let first = e1 < self.r1 * e2;
            let second = e2 < self.r2 * e1;
            if first == second {
                return Err(Error::InvalidCycle(format!(
                    "exactly one of the inequalities k1-1 < r1(k2-1), k2-1 < r2(k1-1) must hold (got {first} and {second})"
                )));
            }
        }
        Ok(())
    }

    fn transition(k: Option<u32>, alpha: f64, beta: f64) -> MapSpec {
        match k {
            Some(k) if alpha != 0.0 => MapSpec::Composite {
                maps: vec![
                    MapSpec::Tangent { k, c: alpha },
                    MapSpec::Linear { lambda: beta },
                ],
            },
            _ => MapSpec::Linear { lambda: beta },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CycleSide {
    One,
    Two,
}

/// First-return map on side `i` together with its expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstReturn {
    pub map: MapSpec,
    pub record: ExpansionRecord,
}

/// `P1 = R1∘D2∘R2∘D1` or `P2 = R2∘D1∘R1∘D2` with `D_i(x) = x^(r_i)` and
/// `R_i(y) = β·y·(1 + α_i·y^(k_i - 1))`.
pub fn first_return(spec: &TwoCycleSpec, side: CycleSide) -> Result<FirstReturn> {
    spec.validate()?;
    let d1 = MapSpec::Power { a: 1.0, r: spec.r1 };
    let d2 = MapSpec::Power { a: 1.0, r: spec.r2 };
    let r1 = TwoCycleSpec::transition(spec.k1, spec.alpha1, spec.beta21);
    let r2 = TwoCycleSpec::transition(spec.k2, spec.alpha2, spec.beta12);
    let maps = match side {
        CycleSide::One => vec![d1, r2, d2, r1],
        CycleSide::Two => vec![d2, r1, d1, r2],
    };
    let map = MapSpec::Composite { maps };
    let record = expansion(&map)?;
    Ok(FirstReturn { map, record })
}
