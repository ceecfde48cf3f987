//! C ABI over the simulation library.
//!
//! Objects are opaque handles created by `se_*_new`/`se_*_run` and released
//! with the matching `se_*_free`. Every fallible call returns an
//! [`SeStatus`]; on failure `se_last_error` describes what went wrong on the
//! calling thread.
//!
//! Array outputs use one convention: the caller passes a buffer and its
//! length, and `written` receives the number of elements needed. Passing a
//! null buffer with length 0 queries the size. A buffer that is too small
//! yields `SE_STATUS_INVALID_ARGUMENT` and leaves the buffer untouched.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use syntax_emergence::competition::limit_prediction;
use syntax_emergence::config::{parse_config_str, Model, Scenario};
use syntax_emergence::engine::{derive_stream, LearningState, RandomSource};
use syntax_emergence::ensemble::{run_ensemble, EnsembleConfig, EnsembleResult};
use syntax_emergence::hearer::posterior;
use syntax_emergence::history::{LanguageModel, Verdict};
use syntax_emergence::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeStatus {
    Ok = 0,
    /// Invalid configuration, usage or input data.
    ConfigError = 1,
    /// The simulation or a computation failed.
    RuntimeError = 2,
    NullPointer = 3,
    InvalidArgument = 4,
}

/// A validated single-model scenario.
pub struct SeScenario {
    model: Model,
}

/// One language history in progress.
pub struct SeHistory {
    model: Model,
    source: RandomSource,
    k: u64,
}

pub struct SeEnsemble {
    result: EnsembleResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: SeStatus, message: impl Into<String>) -> SeStatus {
    set_error(message);
    status
}

fn from_error(e: Error) -> SeStatus {
    let status = if e.is_configuration() {
        SeStatus::ConfigError
    } else {
        SeStatus::RuntimeError
    };
    fail(status, e.to_string())
}

/// Runs `f`, converting a panic into `RuntimeError`.
fn guard(f: impl FnOnce() -> SeStatus) -> SeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(SeStatus::RuntimeError, "internal panic"),
    }
}

unsafe fn copy_out(values: &[f64], buf: *mut f64, len: usize, written: *mut usize) -> SeStatus {
    if written.is_null() {
        return fail(SeStatus::NullPointer, "written is null");
    }
    *written = values.len();
    if buf.is_null() && len == 0 {
        return SeStatus::Ok;
    }
    if buf.is_null() {
        return fail(SeStatus::NullPointer, "buffer is null");
    }
    if len < values.len() {
        return fail(
            SeStatus::InvalidArgument,
            format!("buffer holds {len} values, {} needed", values.len()),
        );
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    SeStatus::Ok
}

macro_rules! deref {
    ($p:expr, $name:literal) => {
        match $p.as_ref() {
            Some(v) => v,
            None => return fail(SeStatus::NullPointer, concat!($name, " is null")),
        }
    };
}

macro_rules! deref_mut {
    ($p:expr, $name:literal) => {
        match $p.as_mut() {
            Some(v) => v,
            None => return fail(SeStatus::NullPointer, concat!($name, " is null")),
        }
    };
}

/// The message for the last failed call on this thread, or null. Valid until
/// the next call on the same thread.
#[no_mangle]
pub extern "C" fn se_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn se_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Parses a scenario from a JSON configuration (the same format as the CLI).
/// Phased scenarios are rejected.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn se_scenario_from_json(json: *const c_char, out: *mut *mut SeScenario) -> SeStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(SeStatus::NullPointer, "json or out is null");
        }
        *out = ptr::null_mut();
        let Ok(text) = CStr::from_ptr(json).to_str() else {
            return fail(SeStatus::ConfigError, "configuration is not valid UTF-8");
        };
        match parse_config_str(text) {
            Ok(loaded) => match loaded.scenario {
                Scenario::Model(model) => {
                    *out = Box::into_raw(Box::new(SeScenario { model }));
                    SeStatus::Ok
                }
                Scenario::Phased(_) => fail(SeStatus::ConfigError, "phased scenarios are not supported here"),
            },
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `scenario` must come from `se_scenario_from_json` or be null.
#[no_mangle]
pub unsafe extern "C" fn se_scenario_free(scenario: *mut SeScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Number of probability cells the scenario's model exposes.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn se_scenario_cell_count(scenario: *const SeScenario, out: *mut usize) -> SeStatus {
    let s = deref!(scenario, "scenario");
    let out = deref_mut!(out, "out");
    *out = s.model.cell_labels().len();
    SeStatus::Ok
}

/// Starts a history on stream `stream` of `seed`; stream `h` reproduces
/// history `h` of an ensemble with the same seed.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn se_history_new(
    scenario: *const SeScenario,
    seed: u64,
    stream: u64,
    out: *mut *mut SeHistory,
) -> SeStatus {
    let s = deref!(scenario, "scenario");
    let out = deref_mut!(out, "out");
    *out = Box::into_raw(Box::new(SeHistory {
        model: s.model.clone(),
        source: derive_stream(seed, stream),
        k: 0,
    }));
    SeStatus::Ok
}

/// # Safety
/// `history` must come from `se_history_new` or be null.
#[no_mangle]
pub unsafe extern "C" fn se_history_free(history: *mut SeHistory) {
    if !history.is_null() {
        drop(Box::from_raw(history));
    }
}

/// Produces `n` more utterances.
///
/// # Safety
/// `history` must be valid.
#[no_mangle]
pub unsafe extern "C" fn se_history_step(history: *mut SeHistory, n: u64) -> SeStatus {
    let h = deref_mut!(history, "history");
    guard(|| {
        for _ in 0..n {
            h.k += 1;
            h.model.step(h.k, &mut h.source);
        }
        SeStatus::Ok
    })
}

/// Utterances produced so far.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn se_history_utterances(history: *const SeHistory, out: *mut u64) -> SeStatus {
    let h = deref!(history, "history");
    *deref_mut!(out, "out") = h.k;
    SeStatus::Ok
}

/// Current cell probabilities.
///
/// # Safety
/// `buf` must hold `len` doubles; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn se_history_probabilities(
    history: *const SeHistory,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> SeStatus {
    let h = deref!(history, "history");
    copy_out(&h.model.probabilities(), buf, len, written)
}

/// Current raw counts, in the model's own layout.
///
/// # Safety
/// `buf` must hold `len` doubles; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn se_history_counts(
    history: *const SeHistory,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> SeStatus {
    let h = deref!(history, "history");
    copy_out(&h.model.counts(), buf, len, written)
}

/// Runs `histories` histories of `utterances` each. `workers` = 0 uses one
/// worker per available core; results do not depend on it.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn se_ensemble_run(
    scenario: *const SeScenario,
    histories: usize,
    utterances: u64,
    seed: u64,
    workers: usize,
    epsilon: f64,
    out: *mut *mut SeEnsemble,
) -> SeStatus {
    let s = deref!(scenario, "scenario");
    let out = deref_mut!(out, "out");
    *out = ptr::null_mut();
    let workers = if workers == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        workers
    };
    let config = EnsembleConfig::new(histories, utterances, seed)
        .with_workers(workers)
        .with_epsilon(epsilon);
    guard(|| match run_ensemble(&s.model, &config) {
        Ok(result) => {
            *out = Box::into_raw(Box::new(SeEnsemble { result }));
            SeStatus::Ok
        }
        Err(e) => from_error(e),
    })
}

/// # Safety
/// `ensemble` must come from `se_ensemble_run` or be null.
#[no_mangle]
pub unsafe extern "C" fn se_ensemble_free(ensemble: *mut SeEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

/// Fraction of histories with a converged verdict.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn se_ensemble_converged_fraction(ensemble: *const SeEnsemble, out: *mut f64) -> SeStatus {
    let e = deref!(ensemble, "ensemble");
    *deref_mut!(out, "out") = e.result.converged_fraction();
    SeStatus::Ok
}

/// Per-history verdicts: the winning cell index, or -1 when unresolved.
///
/// # Safety
/// `buf` must hold `len` values; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn se_ensemble_verdicts(
    ensemble: *const SeEnsemble,
    buf: *mut i64,
    len: usize,
    written: *mut usize,
) -> SeStatus {
    let e = deref!(ensemble, "ensemble");
    let written = deref_mut!(written, "written");
    let verdicts: Vec<i64> = e
        .result
        .histories
        .iter()
        .map(|h| match h.verdict {
            Verdict::Converged(i) => i as i64,
            Verdict::Unresolved => -1,
        })
        .collect();
    *written = verdicts.len();
    if buf.is_null() && len == 0 {
        return SeStatus::Ok;
    }
    if buf.is_null() {
        return fail(SeStatus::NullPointer, "buffer is null");
    }
    if len < verdicts.len() {
        return fail(SeStatus::InvalidArgument, format!("buffer holds {len} values, {} needed", verdicts.len()));
    }
    ptr::copy_nonoverlapping(verdicts.as_ptr(), buf, verdicts.len());
    SeStatus::Ok
}

/// Ensemble mean of each cell at the final checkpoint.
///
/// # Safety
/// `buf` must hold `len` doubles; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn se_ensemble_final_mean(
    ensemble: *const SeEnsemble,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> SeStatus {
    let e = deref!(ensemble, "ensemble");
    let mean = e.result.aggregate.mean.last().cloned().unwrap_or_default();
    copy_out(&mean, buf, len, written)
}

/// The full ensemble result as JSON, NUL-terminated. `written` receives the
/// size in bytes including the terminator.
///
/// # Safety
/// `buf` must hold `len` bytes; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn se_ensemble_json(
    ensemble: *const SeEnsemble,
    buf: *mut c_char,
    len: usize,
    written: *mut usize,
) -> SeStatus {
    let e = deref!(ensemble, "ensemble");
    let written = deref_mut!(written, "written");
    let text = match serde_json::to_string(&e.result) {
        Ok(t) => t,
        Err(err) => return fail(SeStatus::RuntimeError, err.to_string()),
    };
    *written = text.len() + 1;
    if buf.is_null() && len == 0 {
        return SeStatus::Ok;
    }
    if buf.is_null() {
        return fail(SeStatus::NullPointer, "buffer is null");
    }
    if len < text.len() + 1 {
        return fail(SeStatus::InvalidArgument, format!("buffer holds {len} bytes, {} needed", text.len() + 1));
    }
    ptr::copy_nonoverlapping(text.as_ptr().cast(), buf, text.len());
    *buf.add(text.len()) = 0;
    SeStatus::Ok
}

/// c_i / (Σc + α).
///
/// # Safety
/// `counts` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn se_hre_probability(
    counts: *const f64,
    len: usize,
    alpha: f64,
    index: usize,
    out: *mut f64,
) -> SeStatus {
    if counts.is_null() || out.is_null() {
        return fail(SeStatus::NullPointer, "counts or out is null");
    }
    let counts = std::slice::from_raw_parts(counts, len).to_vec();
    let state = match LearningState::new(counts, alpha) {
        Ok(s) => s,
        Err(e) => return from_error(e),
    };
    match state.hre_probability(index) {
        Ok(p) => {
            *out = p;
            SeStatus::Ok
        }
        Err(e) => fail(SeStatus::InvalidArgument, e.to_string()),
    }
}

/// Bayes posterior over messages from per-message weights and priors.
///
/// # Safety
/// `weights`, `priors` and `out` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn se_posterior(
    weights: *const f64,
    priors: *const f64,
    len: usize,
    out: *mut f64,
) -> SeStatus {
    if weights.is_null() || priors.is_null() || out.is_null() {
        return fail(SeStatus::NullPointer, "weights, priors or out is null");
    }
    let w = std::slice::from_raw_parts(weights, len);
    let p = std::slice::from_raw_parts(priors, len);
    match posterior(w, p) {
        Ok(post) => {
            ptr::copy_nonoverlapping(post.as_ptr(), out, len);
            SeStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Long-run P(f^u | m_obj) and P(m_subj | f^u) for subject probability `p`.
///
/// # Safety
/// Output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn se_limit_prediction(p: f64, speaker_unmarked_given_obj: *mut f64, hearer_subj_given_unmarked: *mut f64) -> SeStatus {
    if speaker_unmarked_given_obj.is_null() || hearer_subj_given_unmarked.is_null() {
        return fail(SeStatus::NullPointer, "output pointer is null");
    }
    match limit_prediction(p) {
        Ok(lim) => {
            *speaker_unmarked_given_obj = lim.speaker_unmarked_given_obj;
            *hearer_subj_given_unmarked = lim.hearer_subj_given_unmarked;
            SeStatus::Ok
        }
        Err(e) => fail(SeStatus::InvalidArgument, e.to_string()),
    }
}
