//! C ABI for `spiraldim`.
//!
//! Every fallible call returns an [`SdStatus`]; results go through out
//! pointers. On failure, [`sd_last_error`] gives a message for the calling
//! thread. Handles are opaque and must be released with their `_free`
//! function. Strings returned by the library are released with
//! [`sd_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use spiraldim::dimension::{make_ladder, sequence_dimension, DeltaLadder, DimensionEstimate};
use spiraldim::neighborhood::measure_1d_exact;
use spiraldim::scenario::{run_scenario, ScenarioConfig, ScenarioError};
use spiraldim::sequence::{
    geometric_sequence, power_sequence, validate_sequence, MonotoneSequence,
};
use spiraldim::theorems::{cyclicity_bound, mourtada_epsilon, saddle_loop_dim};
use spiraldim::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidSequence = 3,
    InvalidParameter = 4,
    DeltaTooLarge = 5,
    DeltaTooSmall = 6,
    CellBudgetExceeded = 7,
    TooFewSamples = 8,
    NonPositiveMeasure = 9,
    SamplingTooCoarse = 10,
    Integration = 11,
    InsufficientTurns = 12,
    OutOfDomain = 13,
    NonContracting = 14,
    InvalidCycle = 15,
    Contradictory = 16,
    NearIntegerAmbiguity = 17,
    DegenerateSegment = 18,
    Config = 19,
    Output = 20,
    Panic = 99,
}

impl From<&Error> for SdStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidSequence { .. } => SdStatus::InvalidSequence,
            Error::InvalidParameter { .. } => SdStatus::InvalidParameter,
            Error::DeltaTooLarge { .. } => SdStatus::DeltaTooLarge,
            Error::DeltaTooSmall { .. } => SdStatus::DeltaTooSmall,
            Error::CellBudgetExceeded { .. } => SdStatus::CellBudgetExceeded,
            Error::DegenerateSegment(_) => SdStatus::DegenerateSegment,
            Error::TooFewSamples { .. } => SdStatus::TooFewSamples,
            Error::NonPositiveMeasure { .. } => SdStatus::NonPositiveMeasure,
            Error::SamplingTooCoarse { .. } => SdStatus::SamplingTooCoarse,
            Error::Integration(_) => SdStatus::Integration,
            Error::InsufficientTurns { .. } => SdStatus::InsufficientTurns,
            Error::OutOfDomain { .. } => SdStatus::OutOfDomain,
            Error::NonContracting(_) => SdStatus::NonContracting,
            Error::InvalidCycle(_) => SdStatus::InvalidCycle,
            Error::Contradictory(_) => SdStatus::Contradictory,
            Error::NearIntegerAmbiguity { .. } => SdStatus::NearIntegerAmbiguity,
        }
    }
}

/// Opaque strictly decreasing positive sequence.
pub struct SdSequence(MonotoneSequence);

/// Opaque descending ladder of scales.
pub struct SdLadder(DeltaLadder);

/// Plain copy of a dimension estimate.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SdEstimate {
    pub fit: f64,
    pub lower: f64,
    pub upper: f64,
    pub r_squared: f64,
    pub spread_flag: bool,
}

impl From<&DimensionEstimate> for SdEstimate {
    fn from(e: &DimensionEstimate) -> Self {
        SdEstimate {
            fit: e.fit,
            lower: e.lower,
            upper: e.upper,
            r_squared: e.r_squared,
            spread_flag: e.spread_flag,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("NUL removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn fail(status: SdStatus, message: impl Into<String>) -> SdStatus {
    set_last_error(message.into());
    status
}

fn from_error(e: Error) -> SdStatus {
    let status = SdStatus::from(&e);
    fail(status, e.to_string())
}

/// Runs `f`, turning panics into [`SdStatus::Panic`].
fn guard(f: impl FnOnce() -> SdStatus) -> SdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(SdStatus::Panic, msg)
        }
    }
}

macro_rules! nonnull {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(SdStatus::NullPointer, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

/// Message for the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sd_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn store_sequence(r: spiraldim::Result<MonotoneSequence>, out: *mut *mut SdSequence) -> SdStatus {
    match r {
        Ok(seq) => {
            // SAFETY: callers check `out` for null first.
            unsafe { *out = Box::into_raw(Box::new(SdSequence(seq))) };
            SdStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Validates `len` values as a strictly decreasing positive sequence with
/// nonincreasing gaps.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_sequence_from_values(
    values: *const f64,
    len: usize,
    out: *mut *mut SdSequence,
) -> SdStatus {
    guard(|| {
        nonnull!(values, out);
        let slice = std::slice::from_raw_parts(values, len);
        store_sequence(validate_sequence(slice, "ffi"), out)
    })
}

/// `n^(-a)` for `n = 1..=count`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_sequence_power(
    a: f64,
    count: usize,
    out: *mut *mut SdSequence,
) -> SdStatus {
    guard(|| {
        nonnull!(out);
        store_sequence(power_sequence(a, count), out)
    })
}

/// `ratio^n` for `n = 1..=count`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_sequence_geometric(
    ratio: f64,
    count: usize,
    out: *mut *mut SdSequence,
) -> SdStatus {
    guard(|| {
        nonnull!(out);
        store_sequence(geometric_sequence(ratio, count), out)
    })
}

/// Number of terms; 0 for null.
///
/// # Safety
/// `seq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_sequence_len(seq: *const SdSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `seq` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sd_sequence_free(seq: *mut SdSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// Log-spaced scales from `delta_max` down to `delta_min`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_ladder_new(
    delta_min: f64,
    delta_max: f64,
    count: usize,
    out: *mut *mut SdLadder,
) -> SdStatus {
    guard(|| {
        nonnull!(out);
        match make_ladder(delta_min, delta_max, count) {
            Ok(l) => {
                *out = Box::into_raw(Box::new(SdLadder(l)));
                SdStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `ladder` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sd_ladder_free(ladder: *mut SdLadder) {
    if !ladder.is_null() {
        drop(Box::from_raw(ladder));
    }
}

/// Lebesgue measure of the δ-neighborhood of the sequence and 0.
///
/// # Safety
/// `seq` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_measure_1d(
    seq: *const SdSequence,
    delta: f64,
    out: *mut f64,
) -> SdStatus {
    guard(|| {
        nonnull!(seq, out);
        match measure_1d_exact(&(*seq).0, delta) {
            Ok(m) => {
                *out = m.measure;
                SdStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Box dimension of the sequence over the ladder.
///
/// # Safety
/// `seq` and `ladder` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_sequence_dimension(
    seq: *const SdSequence,
    ladder: *const SdLadder,
    out: *mut SdEstimate,
) -> SdStatus {
    guard(|| {
        nonnull!(seq, ladder, out);
        match sequence_dimension(&(*seq).0, &(*ladder).0) {
            Ok(e) => {
                *out = SdEstimate::from(&e);
                SdStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Spiral dimension near a saddle loop of the given codimension.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_saddle_loop_dim(codim: u32, out: *mut f64) -> SdStatus {
    guard(|| {
        nonnull!(out);
        match saddle_loop_dim(codim) {
            Ok(d) => {
                *out = d;
                SdStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Upper bound on the number of limit cycles born from a polycycle whose
/// spiral trajectories have dimension `d` and ratio `r`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_cyclicity_bound(d: f64, r: f64, out: *mut i64) -> SdStatus {
    guard(|| {
        nonnull!(out);
        match cyclicity_bound(d, r) {
            Ok(b) => {
                *out = b;
                SdStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Cyclicity of a two-saddle cycle from its hyperbolicity ratio and
/// tangency orders. `k2 = 0` means the second transition is hyperbolic.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_mourtada_epsilon(r1: f64, k1: u32, k2: u32, out: *mut i64) -> SdStatus {
    guard(|| {
        nonnull!(out);
        let k2 = (k2 != 0).then_some(k2);
        match mourtada_epsilon(r1, k1, k2) {
            Ok(e) => {
                *out = e;
                SdStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Runs a TOML scenario, writing its outputs to `out_dir` (or the config's
/// own `outputs.dir` when null). The result record is returned as JSON in
/// `*result_json`, to be freed with [`sd_string_free`].
///
/// # Safety
/// `config_toml` must be a NUL-terminated string, `out_dir` null or
/// NUL-terminated, and `result_json` writable.
#[no_mangle]
pub unsafe extern "C" fn sd_run_scenario(
    config_toml: *const c_char,
    out_dir: *const c_char,
    result_json: *mut *mut c_char,
) -> SdStatus {
    guard(|| {
        nonnull!(config_toml, result_json);
        let Ok(text) = CStr::from_ptr(config_toml).to_str() else {
            return fail(SdStatus::InvalidUtf8, "config is not UTF-8");
        };
        let mut config = match ScenarioConfig::from_toml(text, &[]) {
            Ok(c) => c,
            Err(e) => return scenario_error(e),
        };
        if !out_dir.is_null() {
            let Ok(dir) = CStr::from_ptr(out_dir).to_str() else {
                return fail(SdStatus::InvalidUtf8, "out_dir is not UTF-8");
            };
            config.outputs.dir = Some(dir.into());
        }
        match run_scenario(&config) {
            Ok(record) => {
                let json = serde_json::to_string(&record).expect("record serializes");
                *result_json = CString::new(json).expect("JSON has no NUL").into_raw();
                SdStatus::Ok
            }
            Err(e) => scenario_error(e),
        }
    })
}

fn scenario_error(e: ScenarioError) -> SdStatus {
    let status = match &e {
        ScenarioError::Config(_) => SdStatus::Config,
        ScenarioError::Pipeline { source, .. } => SdStatus::from(source),
        ScenarioError::Output { .. } => SdStatus::Output,
    };
    fail(status, e.to_string())
}
