//! C ABI for the lvconsensus toolkit.
//!
//! Conventions, in the order a binding author needs them:
//!
//! * Every fallible function returns an [`LvStatus`] and writes its result
//!   through an out pointer. `LV_STATUS_OK` is zero.
//! * `LvSpec` and `LvExact` are opaque handles. Create them with the
//!   constructors here, release them with the matching `_free`; the frees
//!   accept null.
//! * On failure a thread-local message is set; [`lv_last_error`] returns it.
//!   The pointer stays valid until the next failing call on the same thread.
//! * Every entry point catches panics and turns them into `LV_STATUS_PANIC`
//!   instead of unwinding across the boundary.
//! * Randomized routines take a `seed`; equal seeds give bit-equal results
//!   regardless of platform or thread count.
//!
//! The build script writes the matching header to `include/lvconsensus.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use lvconsensus::exact::{exact_rho, ExactGrid, ExactOptions};
use lvconsensus::experiments::{estimate_rho, Estimate};
use lvconsensus::model::{Config, Mode, ModelSpec};
use lvconsensus::rng::TrialStream;
use lvconsensus::simulate::{default_max_steps, run_to_consensus, Outcome, TrajectoryStats};
use lvconsensus::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LvStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Text could not be parsed as a model spec.
    ParseError = 3,
    /// An argument was outside its valid range (bad rate, count, grid size,
    /// zero trials, or a probe outside the solved grid).
    DomainError = 4,
    /// The iterative solver did not reach its tolerance.
    NoConvergence = 5,
    /// An internal panic was caught at the boundary.
    Panic = 6,
}

/// How a single run ended; mirrors the core outcome.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LvOutcome {
    /// Species 0 (initial majority) is the sole survivor.
    MajorityWon = 0,
    /// Species 1 is the sole survivor.
    MinorityWon = 1,
    BothExtinct = 2,
    /// Step cap hit before consensus.
    Censored = 3,
}

/// Accounting of a single run to consensus.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LvRunStats {
    pub steps: u64,
    pub outcome: LvOutcome,
    /// Steps split by event family: individual + competitive = steps.
    pub individual: u64,
    pub competitive: u64,
    /// Individual events that shrank the leader's margin while both species
    /// were alive.
    pub bad_noncomp: u64,
    /// Gap loss totals (initial lead minus final lead, telescoped), split by
    /// family.
    pub f_total: i64,
    pub f_individual: i64,
    pub f_competitive: i64,
    /// A state strictly before consensus had equal counts.
    pub hit_tie: bool,
    /// Peak population over the run.
    pub max_total: u64,
}

/// Monte Carlo estimate over many runs. Counts satisfy
/// `wins + losses + both_extinct + censored = trials`; means and frequencies
/// are over the completed (non-censored) trials and are NaN when every trial
/// was censored.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LvEstimate {
    pub trials: u64,
    pub wins: u64,
    pub losses: u64,
    pub both_extinct: u64,
    pub censored: u64,
    /// `(wins + both_extinct / 2) / (trials - censored)`.
    pub rho_hat: f64,
    /// 99% score interval around `rho_hat`.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Mean and standard error of the consensus event count.
    pub mean_t: f64,
    pub se_t: f64,
    /// Individual events per trial.
    pub mean_i: f64,
    pub se_i: f64,
    /// Competitive events per trial.
    pub mean_k: f64,
    pub se_k: f64,
    /// Bad individual events per trial.
    pub mean_j: f64,
    pub se_j: f64,
    /// Gap loss per trial.
    pub mean_f: f64,
    pub se_f: f64,
    /// Peak population per trial.
    pub mean_max_total: f64,
    pub se_max_total: f64,
    /// Fraction of completed trials that passed through a tie.
    pub hit_tie_freq: f64,
}

/// Opaque parsed model. One per configuration; cheap to copy on the Rust
/// side, so handles are independent.
pub struct LvSpec {
    spec: ModelSpec,
}

/// Opaque solved grid of exact win probabilities (and optionally mean
/// consensus times) over `{0..xmax}^2`.
pub struct LvExact {
    grid: ExactGrid,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("interior nulls were replaced");
    });
}

fn status_of(err: &Error) -> LvStatus {
    match err {
        Error::SpecParse(_) => LvStatus::ParseError,
        Error::NoConvergence { .. } | Error::OdeNoConvergence { .. } => LvStatus::NoConvergence,
        _ => LvStatus::DomainError,
    }
}

fn fail(err: &Error) -> LvStatus {
    set_error(&err.to_string());
    status_of(err)
}

/// Runs `body` with a panic fence; panics become `LV_STATUS_PANIC`.
fn guarded<F: FnOnce() -> LvStatus>(body: F) -> LvStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic with a non-string payload".to_string());
            set_error(&format!("internal panic: {message}"));
            LvStatus::Panic
        }
    }
}

macro_rules! require_nonnull {
    ($ptr:expr, $name:literal) => {
        if $ptr.is_null() {
            set_error(concat!($name, " must not be null"));
            return LvStatus::NullArgument;
        }
    };
}

/// Version of this library as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Static human-readable name for a status code.
#[no_mangle]
pub extern "C" fn lv_status_str(status: LvStatus) -> *const c_char {
    let text: &'static str = match status {
        LvStatus::Ok => "ok\0",
        LvStatus::NullArgument => "null argument\0",
        LvStatus::InvalidUtf8 => "invalid utf-8\0",
        LvStatus::ParseError => "parse error\0",
        LvStatus::DomainError => "argument out of range\0",
        LvStatus::NoConvergence => "solver did not converge\0",
        LvStatus::Panic => "internal panic\0",
    };
    text.as_ptr() as *const c_char
}

/// Message of the most recent failure on this thread, or an empty string.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lv_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parses spec text (`key=value` pairs separated by commas or newlines, `#`
/// comments allowed) into a new handle.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lv_spec_parse(text: *const c_char, out: *mut *mut LvSpec) -> LvStatus {
    guarded(|| {
        require_nonnull!(text, "text");
        require_nonnull!(out, "out");
        let text = match CStr::from_ptr(text).to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("spec text is not valid utf-8");
                return LvStatus::InvalidUtf8;
            }
        };
        match ModelSpec::parse(text) {
            Ok(spec) => {
                *out = Box::into_raw(Box::new(LvSpec { spec }));
                LvStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Builds a spec from raw rates. `self_destructive` selects whether both
/// members of a competitive pair die (true) or only the opponent (false).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lv_spec_new(
    alpha0: f64,
    alpha1: f64,
    beta: f64,
    delta: f64,
    gamma0: f64,
    gamma1: f64,
    self_destructive: bool,
    out: *mut *mut LvSpec,
) -> LvStatus {
    guarded(|| {
        require_nonnull!(out, "out");
        let mode = if self_destructive {
            Mode::SelfDestructive
        } else {
            Mode::NonSelfDestructive
        };
        let spec = ModelSpec {
            alpha0,
            alpha1,
            beta,
            delta,
            gamma0,
            gamma1,
            mode,
        };
        match spec.validated() {
            Ok(spec) => {
                *out = Box::into_raw(Box::new(LvSpec { spec }));
                LvStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Renders the spec in the same inline form `lv_spec_parse` accepts. The
/// string is owned by the caller; release it with `lv_string_free`.
///
/// # Safety
/// `spec` must be a live handle from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lv_spec_inline(spec: *const LvSpec, out: *mut *mut c_char) -> LvStatus {
    guarded(|| {
        require_nonnull!(spec, "spec");
        require_nonnull!(out, "out");
        let text = (*spec).spec.to_inline();
        let owned = CString::new(text).expect("inline specs never contain NUL");
        *out = owned.into_raw();
        LvStatus::Ok
    })
}

/// Releases a string returned by this library. Accepts null.
///
/// # Safety
/// `s` must have come from this library and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn lv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Releases a spec handle. Accepts null.
///
/// # Safety
/// `spec` must have come from this library and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn lv_spec_free(spec: *mut LvSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

fn run_stats_out(stats: &TrajectoryStats) -> LvRunStats {
    LvRunStats {
        steps: stats.steps,
        outcome: match stats.outcome {
            Outcome::MajorityWon => LvOutcome::MajorityWon,
            Outcome::MinorityWon => LvOutcome::MinorityWon,
            Outcome::BothExtinct => LvOutcome::BothExtinct,
            Outcome::Censored => LvOutcome::Censored,
        },
        individual: stats.individual,
        competitive: stats.competitive,
        bad_noncomp: stats.bad_noncomp,
        f_total: stats.f_total,
        f_individual: stats.f_individual,
        f_competitive: stats.f_competitive,
        hit_tie: stats.hit_tie,
        max_total: stats.max_total,
    }
}

/// Runs one jump chain from `(x0, x1)` until consensus or `max_steps`
/// (0 means the default cap of `1000 (n + 1) + 1e6` events). Requires
/// `x0 >= x1`; species 0 is the initial majority by convention. The run uses
/// the random substream `(seed, cell 0, trial 0)`.
///
/// # Safety
/// `spec` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lv_run_to_consensus(
    spec: *const LvSpec,
    x0: u64,
    x1: u64,
    seed: u64,
    max_steps: u64,
    out: *mut LvRunStats,
) -> LvStatus {
    guarded(|| {
        require_nonnull!(spec, "spec");
        require_nonnull!(out, "out");
        let init = Config::new(x0, x1);
        let cap = if max_steps == 0 {
            default_max_steps(init.total())
        } else {
            max_steps
        };
        let mut stream = TrialStream::new(seed, 0, 0);
        match run_to_consensus(&(*spec).spec, init, &mut stream, cap) {
            Ok(stats) => {
                *out = run_stats_out(&stats);
                LvStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

fn estimate_out(est: &Estimate) -> LvEstimate {
    LvEstimate {
        trials: est.trials,
        wins: est.wins,
        losses: est.losses,
        both_extinct: est.both_extinct,
        censored: est.censored,
        rho_hat: est.rho_hat,
        ci_low: est.ci_low,
        ci_high: est.ci_high,
        mean_t: est.mean_t,
        se_t: est.se_t,
        mean_i: est.mean_i,
        se_i: est.se_i,
        mean_k: est.mean_k,
        se_k: est.se_k,
        mean_j: est.mean_j,
        se_j: est.se_j,
        mean_f: est.mean_f,
        se_f: est.se_f,
        mean_max_total: est.mean_max_total,
        se_max_total: est.se_max_total,
        hit_tie_freq: est.hit_tie_freq,
    }
}

/// Estimates the majority win probability from `(x0, x1)` over `trials`
/// independent jump-chain runs. The slots may be given in either order; the
/// estimate is always for the side that starts ahead. Equal seeds give
/// bit-equal estimates.
///
/// # Safety
/// `spec` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lv_estimate_rho(
    spec: *const LvSpec,
    x0: u64,
    x1: u64,
    trials: u64,
    seed: u64,
    out: *mut LvEstimate,
) -> LvStatus {
    guarded(|| {
        require_nonnull!(spec, "spec");
        require_nonnull!(out, "out");
        match estimate_rho(&(*spec).spec, Config::new(x0, x1), trials, seed) {
            Ok(est) => {
                *out = estimate_out(&est);
                LvStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Solves the exact win probabilities (and mean consensus times when
/// requested) on the truncated grid `{0..xmax}^2` with births suppressed at
/// the top faces. `xmax` must lie in `[2, 4096]`.
///
/// # Safety
/// `spec` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lv_exact_new(
    spec: *const LvSpec,
    xmax: u32,
    compute_mean_t: bool,
    out: *mut *mut LvExact,
) -> LvStatus {
    guarded(|| {
        require_nonnull!(spec, "spec");
        require_nonnull!(out, "out");
        let options = ExactOptions {
            compute_mean_t,
            truncation_check: false,
            ..ExactOptions::default()
        };
        match exact_rho(&(*spec).spec, xmax, &options) {
            Ok(grid) => {
                *out = Box::into_raw(Box::new(LvExact { grid }));
                LvStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Grid size of a solved handle (0 for null).
///
/// # Safety
/// `grid` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lv_exact_xmax(grid: *const LvExact) -> u32 {
    if grid.is_null() {
        0
    } else {
        (*grid).grid.xmax
    }
}

/// Probability that species 0 wins from `(a, b)`, with the fair-coin value
/// one half at `(0, 0)`.
///
/// # Safety
/// `grid` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lv_exact_rho(
    grid: *const LvExact,
    a: u32,
    b: u32,
    out: *mut f64,
) -> LvStatus {
    guarded(|| {
        require_nonnull!(grid, "grid");
        require_nonnull!(out, "out");
        let g = &(*grid).grid;
        if a > g.xmax || b > g.xmax {
            set_error("probe outside the solved grid");
            return LvStatus::DomainError;
        }
        *out = g.rho(a, b);
        LvStatus::Ok
    })
}

/// Expected number of events until consensus from `(a, b)`. Fails with
/// `LV_STATUS_DOMAIN_ERROR` when the grid was solved without mean times.
///
/// # Safety
/// `grid` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lv_exact_mean_t(
    grid: *const LvExact,
    a: u32,
    b: u32,
    out: *mut f64,
) -> LvStatus {
    guarded(|| {
        require_nonnull!(grid, "grid");
        require_nonnull!(out, "out");
        let g = &(*grid).grid;
        if a > g.xmax || b > g.xmax {
            set_error("probe outside the solved grid");
            return LvStatus::DomainError;
        }
        match g.mean_t(a, b) {
            Some(t) => {
                *out = t;
                LvStatus::Ok
            }
            None => {
                set_error("grid was solved without mean times");
                LvStatus::DomainError
            }
        }
    })
}

/// Releases a solved grid. Accepts null.
///
/// # Safety
/// `grid` must have come from this library and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn lv_exact_free(grid: *mut LvExact) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}
