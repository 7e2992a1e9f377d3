//! Config-driven experiments: one scenario per config file, with sample
//! tables and a JSON result record as output.
//!
//! A config is a TOML document:
//!
//! ```toml
//! kind = "saddle-bundle"
//!
//! [params]
//! alpha = 0.5
//! entry = { a = 1.0, n = 2000 }
//!
//! [ladder]            # optional; defaults depend on the kind
//! delta_min = 1e-3
//! delta_max = 0.031622776601683794
//! count = 12
//!
//! [grid]              # optional
//! cell_cap = 64000000
//!
//! [outputs]           # optional
//! dir = "out"
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dimension::{
    curve_samples, estimate_dimension, make_ladder, pointwise_dimension, sequence_samples,
    DeltaLadder, DimensionEstimate,
};
use crate::error::Error;
use crate::flow::{
    build_bundle, entry_power_sequence, focus_crossings, focus_spiral, limit_cycle_spiral,
    CornerSpec, FocusSpec, LimitCycleSpec, SaddleSpec, SemiHypSpec, Side, Term,
};
use crate::neighborhood::{Diagnostics, Method, NeighborhoodMeasurement};
use crate::retmaps::{
    classify_map, orbit, orbit_dim_oracle, Classification, MapSpec, TwoCycleSpec,
};
use crate::sequence::{geometric_sequence, power_sequence};
use crate::theorems::{
    consistency_report, cyclicity_bound, mourtada_epsilon, saddle_loop_dim, saddle_loop_orbit_dim,
};

pub const DEFAULT_CELL_CAP: u64 = 64_000_000;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("config: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Pipeline {
        stage: &'static str,
        #[source]
        source: Error,
    },
    #[error("output {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl ScenarioError {
    /// 1 for validation errors, 2 for pipeline and output errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Config(_) => 1,
            ScenarioError::Pipeline { source, .. } => match source {
                Error::InvalidParameter { .. } | Error::InvalidCycle(_) => 1,
                _ => 2,
            },
            ScenarioError::Output { .. } => 2,
        }
    }
}

fn stage<T>(stage: &'static str, r: crate::Result<T>) -> Result<T, ScenarioError> {
    r.map_err(|source| ScenarioError::Pipeline { stage, source })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Sequence,
    SaddleBundle,
    SemihypBundle,
    FocusSpiral,
    LimitCycleSpiral,
    SaddleLoop,
    TwoCycle,
    Cyclicity,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::Sequence,
        Kind::SaddleBundle,
        Kind::SemihypBundle,
        Kind::FocusSpiral,
        Kind::LimitCycleSpiral,
        Kind::SaddleLoop,
        Kind::TwoCycle,
        Kind::Cyclicity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Sequence => "sequence",
            Kind::SaddleBundle => "saddle-bundle",
            Kind::SemihypBundle => "semihyp-bundle",
            Kind::FocusSpiral => "focus-spiral",
            Kind::LimitCycleSpiral => "limit-cycle-spiral",
            Kind::SaddleLoop => "saddle-loop",
            Kind::TwoCycle => "two-cycle",
            Kind::Cyclicity => "cyclicity",
        }
    }

    fn ambient(self) -> Option<u8> {
        match self {
            Kind::Sequence | Kind::SaddleLoop => Some(1),
            Kind::SaddleBundle
            | Kind::SemihypBundle
            | Kind::FocusSpiral
            | Kind::LimitCycleSpiral => Some(2),
            Kind::TwoCycle | Kind::Cyclicity => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    pub delta_min: f64,
    pub delta_max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_cell_cap")]
    pub cell_cap: u64,
}

fn default_cell_cap() -> u64 {
    DEFAULT_CELL_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    #[serde(default = "default_samples")]
    pub samples: String,
    #[serde(default = "default_plot")]
    pub plot: String,
    #[serde(default = "default_result")]
    pub result: String,
}

fn default_samples() -> String {
    "samples.csv".into()
}
fn default_plot() -> String {
    "plot.csv".into()
}
fn default_result() -> String {
    "result.json".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            samples: default_samples(),
            plot: default_plot(),
            result: default_result(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: Kind,
    #[serde(default)]
    pub params: toml::Table,
    pub ladder: Option<LadderConfig>,
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub outputs: OutputConfig,
    /// Overrides applied while loading, in order.
    #[serde(skip)]
    pub overrides: Vec<(String, String)>,
    #[serde(skip)]
    pub source: Option<PathBuf>,
}

/// Term counts may be written as `1000000` or `1e6`.
fn count<'de, D: serde::Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
    use serde::de::Error as _;
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Float(f64),
    }
    match Raw::deserialize(d)? {
        Raw::Int(i) if i >= 0 => Ok(i as usize),
        Raw::Float(f) if f >= 0.0 && f.fract() == 0.0 && f < 1e15 => Ok(f as usize),
        Raw::Int(i) => Err(D::Error::custom(format!(
            "expected a non-negative count, got {i}"
        ))),
        Raw::Float(f) => Err(D::Error::custom(format!("expected a whole count, got {f}"))),
    }
}

fn deserialize_params<T: serde::de::DeserializeOwned>(
    table: toml::Table,
) -> Result<T, ScenarioError> {
    serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            ScenarioError::Config(format!("params: {}", e.inner()))
        } else {
            ScenarioError::Config(format!("params.{path}: {}", e.inner()))
        }
    })
}

/// Parses `key=value`; the value is read as a TOML value, or as a bare
/// string when it does not parse.
pub fn parse_override(s: &str) -> Result<(String, toml::Value), ScenarioError> {
    let (key, raw) = s.split_once('=').ok_or_else(|| {
        ScenarioError::Config(format!("override `{s}` is not of the form key=value"))
    })?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ScenarioError::Config(format!(
            "override `{s}` has an empty key segment"
        )));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

fn set_path(root: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ScenarioError> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut table = root;
    for (i, part) in parts[..parts.len() - 1].iter().enumerate() {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| {
            ScenarioError::Config(format!(
                "override `{key}`: `{}` is not a table",
                parts[..=i].join(".")
            ))
        })?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl ScenarioConfig {
    /// Parses a TOML document and applies `overrides` on top.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, ScenarioError> {
        let mut root: toml::Table =
            toml::from_str(text).map_err(|e| ScenarioError::Config(e.to_string()))?;
        let mut applied = Vec::new();
        for o in overrides {
            let (key, value) = parse_override(o)?;
            let raw = o.split_once('=').map_or("", |(_, v)| v.trim());
            applied.push((key.clone(), raw.to_string()));
            set_path(&mut root, &key, value)?;
        }
        let mut config: ScenarioConfig = serde_path_to_error::deserialize(toml::Value::Table(root))
            .map_err(|e| ScenarioError::Config(format!("{}: {}", e.path(), e.inner())))?;
        config.overrides = applied;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ScenarioError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text, overrides)?;
        config.source = Some(path.to_path_buf());
        Ok(config)
    }

    fn params<T: serde::de::DeserializeOwned>(&self) -> Result<T, ScenarioError> {
        deserialize_params(self.params.clone())
    }

    fn sequence_params(&self) -> Result<SequenceParams, ScenarioError> {
        let mut table = self.params.clone();
        let family = match table.remove("family") {
            Some(toml::Value::String(f)) => f,
            Some(other) => {
                return Err(ScenarioError::Config(format!(
                    "params.family: expected a string, got {other}"
                )))
            }
            None => {
                return Err(ScenarioError::Config(
                    "params.family: missing (power, geometric or orbit)".into(),
                ))
            }
        };
        match family.as_str() {
            "power" => deserialize_params(table).map(SequenceParams::Power),
            "geometric" => deserialize_params(table).map(SequenceParams::Geometric),
            "orbit" => deserialize_params(table).map(SequenceParams::Orbit),
            f => Err(ScenarioError::Config(format!(
                "params.family: unknown family `{f}` (power, geometric or orbit)"
            ))),
        }
    }

    /// Checks the kind-specific keys and the ladder without running anything.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        match self.kind {
            Kind::Sequence => self.sequence_params().map(|_| ()),
            Kind::SaddleBundle => self.params::<SaddleParams>().map(|_| ()),
            Kind::SemihypBundle => self.params::<SemihypParams>().map(|_| ()),
            Kind::FocusSpiral => self.params::<FocusParams>().map(|_| ()),
            Kind::LimitCycleSpiral => self.params::<LimitCycleParams>().map(|_| ()),
            Kind::SaddleLoop => self.params::<SaddleLoopParams>().map(|_| ()),
            Kind::TwoCycle => self.params::<TwoCycleSpec>().map(|_| ()),
            Kind::Cyclicity => self.params::<CyclicityParams>().map(|_| ()),
        }?;
        if let Some(l) = self.ladder {
            make_ladder(l.delta_min, l.delta_max, l.count)
                .map_err(|e| ScenarioError::Config(format!("ladder: {e}")))?;
        }
        Ok(())
    }

    pub fn ladder(&self) -> Result<DeltaLadder, ScenarioError> {
        match (self.ladder, self.kind.ambient()) {
            (Some(l), _) => stage("ladder", make_ladder(l.delta_min, l.delta_max, l.count)),
            (None, Some(2)) => Ok(DeltaLadder::default_2d()),
            (None, _) => Ok(DeltaLadder::default_1d()),
        }
    }

    pub fn cell_cap(&self) -> u64 {
        self.grid.map_or(DEFAULT_CELL_CAP, |g| g.cell_cap)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.outputs
            .dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerParams {
    a: f64,
    #[serde(alias = "N", deserialize_with = "count")]
    n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometricParams {
    ratio: f64,
    #[serde(alias = "N", deserialize_with = "count")]
    n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct OrbitParams {
    map: MapSpec,
    x0: f64,
    #[serde(alias = "N", deserialize_with = "count")]
    n: usize,
}

/// Selected by the `family` key.
#[derive(Debug, Clone)]
enum SequenceParams {
    Power(PowerParams),
    Geometric(GeometricParams),
    Orbit(OrbitParams),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryParams {
    #[serde(default = "one")]
    a: f64,
    #[serde(default = "default_entry_n", alias = "N", deserialize_with = "count")]
    n: usize,
}

fn one() -> f64 {
    1.0
}
fn default_entry_n() -> usize {
    2000
}

impl Default for EntryParams {
    fn default() -> Self {
        EntryParams {
            a: 1.0,
            n: default_entry_n(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SaddleParams {
    alpha: f64,
    #[serde(default)]
    perturbation: Vec<Term>,
    #[serde(default)]
    entry: EntryParams,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SemihypParams {
    alpha: f64,
    m: u32,
    #[serde(default)]
    perturbation: Vec<Term>,
    #[serde(default)]
    entry: EntryParams,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FocusParams {
    k: u32,
    r0: f64,
    turns: u64,
    /// Length of the transversal crossing sequence used for the naive value.
    #[serde(default = "default_crossings")]
    crossings: usize,
}

fn default_crossings() -> usize {
    100_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct LimitCycleParams {
    a: f64,
    m: u32,
    side: Side,
    r0: f64,
    turns: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SaddleLoopParams {
    codim: u32,
    #[serde(default = "half")]
    x0: f64,
    #[serde(default = "default_loop_n", alias = "N", deserialize_with = "count")]
    n: usize,
    /// Coefficient of the leading correction for codimension ≥ 3.
    #[serde(default = "minus_one")]
    c: f64,
    /// Dulac exponent for codimension 1.
    #[serde(default = "default_loop_r")]
    r: f64,
    /// Multiplier for codimension 2.
    #[serde(default = "half")]
    lambda: f64,
}

fn half() -> f64 {
    0.5
}
fn minus_one() -> f64 {
    -1.0
}
fn default_loop_n() -> usize {
    200_000
}
fn default_loop_r() -> f64 {
    1.2
}

/// Model return map of a saddle loop of the given codimension.
pub fn saddle_loop_map(codim: u32, c: f64, r: f64, lambda: f64) -> Result<MapSpec, Error> {
    let spec = match codim {
        0 => return Err(crate::error::invalid("codim", "must be at least 1")),
        1 => MapSpec::Power { a: 1.0, r },
        2 => MapSpec::Linear { lambda },
        k if k % 2 == 0 => MapSpec::Tangent { k: k / 2, c },
        k => MapSpec::TangentLog {
            k: k.div_ceil(2),
            c,
        },
    };
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CyclicityParams {
    d: f64,
    r: f64,
    r1: Option<f64>,
    k1: Option<u32>,
    k2: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prediction {
    Integer(i64),
    Real(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: Option<PathBuf>,
    pub overrides: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub kind: Kind,
    pub estimate: Option<DimensionEstimate>,
    pub prediction: Option<Prediction>,
    /// `|estimate.fit - prediction|` when both are real.
    pub abs_error: Option<f64>,
    pub warnings: Vec<String>,
    pub timing_seconds: f64,
    pub details: serde_json::Value,
    pub provenance: Provenance,
}

/// Record plus the measurements behind its estimate.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub record: ResultRecord,
    pub samples: Vec<NeighborhoodMeasurement>,
}

struct Partial {
    samples: Vec<NeighborhoodMeasurement>,
    prediction: Option<Prediction>,
    warnings: Vec<String>,
    details: serde_json::Value,
}

fn spread_warning(e: &DimensionEstimate, warnings: &mut Vec<String>) {
    if e.spread_flag {
        warnings.push(format!(
            "pointwise proxies spread over [{:.4}, {:.4}]; limit may not be settled",
            e.lower, e.upper
        ));
    }
}

/// Runs the pipeline in memory without writing anything.
pub fn execute(config: &ScenarioConfig) -> Result<Outcome, ScenarioError> {
    config.validate()?;
    let started = Instant::now();
    info!("running {} scenario", config.kind.name());
    let partial = match config.kind {
        Kind::Sequence => run_sequence(config)?,
        Kind::SaddleBundle | Kind::SemihypBundle => run_bundle(config)?,
        Kind::FocusSpiral => run_focus(config)?,
        Kind::LimitCycleSpiral => run_limit_cycle(config)?,
        Kind::SaddleLoop => run_saddle_loop(config)?,
        Kind::TwoCycle => run_two_cycle(config)?,
        Kind::Cyclicity => run_cyclicity(config)?,
    };
    let mut warnings = partial.warnings;
    let estimate = match config.kind.ambient() {
        Some(ambient) => {
            let e = stage("estimate", estimate_dimension(&partial.samples, ambient))?;
            spread_warning(&e, &mut warnings);
            Some(e)
        }
        None => None,
    };
    let abs_error = match (&estimate, partial.prediction) {
        (Some(e), Some(Prediction::Real(p))) => Some((e.fit - p).abs()),
        _ => None,
    };
    let record = ResultRecord {
        kind: config.kind,
        estimate,
        prediction: partial.prediction,
        abs_error,
        warnings,
        timing_seconds: started.elapsed().as_secs_f64(),
        details: partial.details,
        provenance: Provenance {
            config: config.source.clone(),
            overrides: config.overrides.iter().cloned().collect(),
        },
    };
    Ok(Outcome {
        record,
        samples: partial.samples,
    })
}

fn run_sequence(config: &ScenarioConfig) -> Result<Partial, ScenarioError> {
    let params = config.sequence_params()?;
    let ladder = config.ladder()?;
    let mut warnings = Vec::new();
    let (seq, prediction) = match &params {
        SequenceParams::Power(PowerParams { a, n }) => {
            (stage("sequence", power_sequence(*a, *n))?, 1.0 / (1.0 + a))
        }
        SequenceParams::Geometric(GeometricParams { ratio, n }) => {
            warnings.push(
                "log-corrected regime: geometric sequences converge like 1/ln(1/delta)".into(),
            );
            (stage("sequence", geometric_sequence(*ratio, *n))?, 0.0)
        }
        SequenceParams::Orbit(OrbitParams { map, x0, n }) => {
            let class = stage("classify", classify_map(map))?;
            let p = stage("oracle", orbit_dim_oracle(&class))?;
            (stage("orbit", orbit(map, *x0, *n))?, p)
        }
    };
    let samples = stage("measure", sequence_samples(&seq, &ladder))?;
    Ok(Partial {
        samples,
        prediction: Some(Prediction::Real(prediction)),
        warnings,
        details: json!({ "terms": seq.len(), "origin": seq.origin() }),
    })
}

fn run_bundle(config: &ScenarioConfig) -> Result<Partial, ScenarioError> {
    let ladder = config.ladder()?;
    let mut warnings = Vec::new();
    let (spec, entry) = if config.kind == Kind::SaddleBundle {
        let p: SaddleParams = config.params()?;
        if p.alpha == 1.0 {
            warnings.push("log-corrected regime: alpha = 1 adds a y·ln(1/y) nucleus term".into());
        }
        (
            CornerSpec::Saddle(stage("spec", SaddleSpec::new(p.alpha, p.perturbation))?),
            p.entry,
        )
    } else {
        let p: SemihypParams = config.params()?;
        (
            CornerSpec::SemiHyperbolic(stage(
                "spec",
                SemiHypSpec::new(p.alpha, p.m, p.perturbation),
            )?),
            p.entry,
        )
    };
    let seq = stage("entry", entry_power_sequence(entry.a, entry.n))?;
    let seq_dim = 1.0 / (1.0 + entry.a);
    info!("building {} trajectories", seq.len());
    let bundle = stage("bundle", build_bundle(&spec, &seq, ladder.delta_min / 32.0))?;
    if bundle.exit_dropped > 0 {
        warnings.push(format!(
            "exit sequence truncated: {} of {} crossings clamped or cleaned",
            bundle.exit_dropped,
            seq.len()
        ));
    }
    info!("measuring neighborhoods on {} scales", ladder.len());
    let samples = stage(
        "measure",
        curve_samples(&bundle.segments, &ladder, config.cell_cap()),
    )?;
    let points: usize = bundle.segments.iter().map(|s| s.points().len()).sum();
    Ok(Partial {
        samples,
        prediction: Some(Prediction::Real(1.0 + seq_dim)),
        warnings,
        details: json!({
            "entry_dim": seq_dim,
            "trajectories": bundle.segments.len(),
            "points": points,
            "exit_terms": bundle.exit.len(),
        }),
    })
}

fn run_focus(config: &ScenarioConfig) -> Result<Partial, ScenarioError> {
    let p: FocusParams = config.params()?;
    let ladder = config.ladder()?;
    let spec = FocusSpec {
        k: p.k,
        r0: p.r0,
        turns: p.turns,
    };
    let spiral = stage("spiral", focus_spiral(&spec, ladder.delta_min))?;
    let samples = stage(
        "measure",
        curve_samples(std::slice::from_ref(&spiral), &ladder, config.cell_cap()),
    )?;
    let k = p.k as f64;
    let crossings = stage("crossings", focus_crossings(&spec, p.crossings))?;
    let transversal = stage(
        "transversal",
        crate::dimension::sequence_dimension(&crossings, &DeltaLadder::default_1d()),
    )?;
    Ok(Partial {
        samples,
        prediction: Some(Prediction::Real(4.0 * k / (2.0 * k + 1.0))),
        warnings: Vec::new(),
        details: json!({
            "points": spiral.points().len(),
            "transversal_dim_estimate": transversal.fit,
            "transversal_dim": 2.0 * k / (2.0 * k + 1.0),
            "naive_corner_value": 1.0 + 2.0 * k / (2.0 * k + 1.0),
            "naive_corner_estimate": 1.0 + transversal.fit,
        }),
    })
}

fn run_limit_cycle(config: &ScenarioConfig) -> Result<Partial, ScenarioError> {
    let p: LimitCycleParams = config.params()?;
    let ladder = config.ladder()?;
    let spec = LimitCycleSpec {
        a: p.a,
        m: p.m,
        side: p.side,
        r0: p.r0,
        turns: p.turns,
    };
    let spiral = stage("spiral", limit_cycle_spiral(&spec, ladder.delta_min))?;
    let samples = stage(
        "measure",
        curve_samples(std::slice::from_ref(&spiral), &ladder, config.cell_cap()),
    )?;
    Ok(Partial {
        samples,
        prediction: Some(Prediction::Real(2.0 - 1.0 / p.m as f64)),
        warnings: Vec::new(),
        details: json!({ "points": spiral.points().len() }),
    })
}

fn run_saddle_loop(config: &ScenarioConfig) -> Result<Partial, ScenarioError> {
    let p: SaddleLoopParams = config.params()?;
    let ladder = config.ladder()?;
    let map = stage("map", saddle_loop_map(p.codim, p.c, p.r, p.lambda))?;
    let class = stage("classify", classify_map(&map))?;
    let oracle = stage("oracle", orbit_dim_oracle(&class))?;
    let expected = stage("formula", saddle_loop_orbit_dim(p.codim))?;
    let mut warnings = Vec::new();
    if (oracle - expected).abs() > 1e-12 {
        warnings.push(format!(
            "map oracle {oracle} differs from the codimension formula {expected}"
        ));
    }
    if matches!(
        class,
        Classification::TangentLog { .. }
            | Classification::Hyperbolic { .. }
            | Classification::StronglyHyperbolic { .. }
    ) {
        warnings.push("log-corrected regime: convergence in delta is logarithmic".into());
    }
    let seq = stage("orbit", orbit(&map, p.x0, p.n))?;
    let samples = stage("measure", sequence_samples(&seq, &ladder))?;
    Ok(Partial {
        samples,
        prediction: Some(Prediction::Real(oracle)),
        warnings,
        details: json!({
            "map": map,
            "classification": class,
            "orbit_terms": seq.len(),
            "spiral_prediction": stage("formula", saddle_loop_dim(p.codim))?,
        }),
    })
}

fn run_two_cycle(config: &ScenarioConfig) -> Result<Partial, ScenarioError> {
    let spec: TwoCycleSpec = config.params()?;
    let report = stage("consistency", consistency_report(&spec))?;
    let mut warnings = Vec::new();
    if let (Some(r), Some(lit)) = (report.r, report.r_recovered) {
        if (r - lit).abs() > 1e-12 {
            warnings.push(format!(
                "ratio from correction exponents ({r}) differs from min(d1-1)/(d2-1) ({lit}); the former is used"
            ));
        }
    }
    Ok(Partial {
        samples: Vec::new(),
        prediction: Some(Prediction::Integer(report.bound)),
        warnings,
        details: serde_json::to_value(&report).expect("report serializes"),
    })
}

fn run_cyclicity(config: &ScenarioConfig) -> Result<Partial, ScenarioError> {
    let p: CyclicityParams = config.params()?;
    let bound = stage("cyclicity bound", cyclicity_bound(p.d, p.r))?;
    let mut warnings = Vec::new();
    let epsilon = match (p.r1, p.k1) {
        (Some(r1), Some(k1)) => {
            let e = stage("epsilon", mourtada_epsilon(r1, k1, p.k2))?;
            if e != bound {
                warnings.push(format!("epsilon {e} differs from the bound {bound}"));
            }
            Some(e)
        }
        _ => None,
    };
    Ok(Partial {
        samples: Vec::new(),
        prediction: Some(Prediction::Integer(bound)),
        warnings,
        details: json!({ "d": p.d, "r": p.r, "epsilon": epsilon }),
    })
}

fn sorted_descending(samples: &[NeighborhoodMeasurement]) -> Vec<&NeighborhoodMeasurement> {
    let mut rows: Vec<&NeighborhoodMeasurement> = samples.iter().collect();
    rows.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    rows
}

/// Sample table: header `delta,measure`, 17 significant digits, LF line
/// ends, rows by descending δ.
pub fn format_samples(samples: &[NeighborhoodMeasurement]) -> Result<String, Error> {
    if samples.is_empty() {
        return Err(crate::error::invalid("samples", "nothing to emit"));
    }
    let mut out = String::from("delta,measure\n");
    for s in sorted_descending(samples) {
        writeln!(out, "{:.16e},{:.16e}", s.delta, s.measure).expect("write to String");
    }
    Ok(out)
}

/// Sample table plus the pointwise dimension `N - ln m / ln δ`.
pub fn format_plot(samples: &[NeighborhoodMeasurement], ambient: u8) -> Result<String, Error> {
    if samples.is_empty() {
        return Err(crate::error::invalid("samples", "nothing to emit"));
    }
    let mut out = String::from("delta,measure,pointwise_dim\n");
    for s in sorted_descending(samples) {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e}",
            s.delta,
            s.measure,
            pointwise_dimension(s, ambient)
        )
        .expect("write to String");
    }
    Ok(out)
}

/// Writes `contents` to a sibling temporary file and renames it into place.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), ScenarioError> {
    let fail = |message: String| ScenarioError::Output {
        path: path.to_path_buf(),
        message,
    };
    let name = path
        .file_name()
        .ok_or_else(|| fail("no file name".into()))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(fail(e.to_string()));
    }
    Ok(())
}

/// Writes the sample table.
pub fn emit_samples(samples: &[NeighborhoodMeasurement], path: &Path) -> Result<(), ScenarioError> {
    let text = stage("emit", format_samples(samples))?;
    write_atomic(path, text.as_bytes())
}

/// Reads a sample table written by [`emit_samples`].
pub fn read_samples(path: &Path) -> Result<Vec<NeighborhoodMeasurement>, ScenarioError> {
    let fail = |message: String| ScenarioError::Output {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.starts_with("delta,measure") => {}
        _ => return Err(fail("missing `delta,measure` header".into())),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let mut cols = line.split(',');
            let mut num = |name: &str| -> Result<f64, ScenarioError> {
                cols.next()
                    .ok_or_else(|| fail(format!("line {}: missing {name}", i + 2)))?
                    .parse::<f64>()
                    .map_err(|e| fail(format!("line {}: {name}: {e}", i + 2)))
            };
            let delta = num("delta")?;
            let measure = num("measure")?;
            Ok(NeighborhoodMeasurement {
                delta,
                measure,
                method: Method::Grid2d,
                diagnostics: Diagnostics::Components(0),
            })
        })
        .collect()
}

/// Runs the scenario and writes its outputs. On failure nothing is left behind.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ResultRecord, ScenarioError> {
    let outcome = execute(config)?;
    let dir = config.output_dir();
    fs::create_dir_all(&dir).map_err(|e| ScenarioError::Output {
        path: dir.clone(),
        message: e.to_string(),
    })?;
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    if let Some(ambient) = config.kind.ambient() {
        let samples = stage("emit", format_samples(&outcome.samples))?;
        let plot = stage("emit", format_plot(&outcome.samples, ambient))?;
        files.push((dir.join(&config.outputs.samples), samples.into_bytes()));
        files.push((dir.join(&config.outputs.plot), plot.into_bytes()));
    }
    let mut json = serde_json::to_string_pretty(&outcome.record).expect("record serializes");
    json.push('\n');
    files.push((dir.join(&config.outputs.result), json.into_bytes()));

    let mut written: Vec<&Path> = Vec::new();
    for (path, bytes) in &files {
        if let Err(e) = write_atomic(path, bytes) {
            for p in written {
                let _ = fs::remove_file(p);
            }
            return Err(e);
        }
        written.push(path);
    }
    info!("wrote {} files to {}", files.len(), dir.display());
    Ok(outcome.record)
}
