//! C ABI over `qkr-core`.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `qkr_*_new`-style function and released by the matching `qkr_*_free`.
//! Fallible functions return a [`QkrStatus`]; on failure the message is
//! available from [`qkr_last_error`] until the next failing call on the same
//! thread. Output pointers are written only on success.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use num_complex::Complex64;
use qkr_core::experiments::{run_forward, run_reversal, ExperimentPlan, ReversalResult};
use qkr_core::io::{parse_plan, plan_to_toml, write_series};
use qkr_core::observables::{self, ObservableSeries};
use qkr_core::propagator::{EngineOptions, Propagator, PropagatorKind};
use qkr_core::schedule::{build_schedule, KickSchedule, Period, ScheduleMode};
use qkr_core::state::{InitialStateSpec, RotorState};
use qkr_core::{apply_perturbation, Error, ErrorCategory};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QkrStatus {
    Ok = 0,
    /// Bad argument or state outside a precondition.
    Invalid = 1,
    /// Malformed config or commensurate schedule.
    Config = 2,
    /// Leakage, norm drift, missing plateau.
    Numerical = 3,
    /// Scan grid did not bracket the threshold.
    Inconclusive = 4,
    Io = 5,
    NullPointer = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QkrPropagatorKind {
    Bessel = 0,
    Spectral = 1,
}

/// One recorded sample. `fidelity` is NaN when not recorded.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QkrSample {
    pub kick: u64,
    pub time: f64,
    pub n2: f64,
    pub entropy: f64,
    pub pr: f64,
    pub lmax: u64,
    pub norm_err: f64,
    pub fidelity: f64,
}

/// Scalar outcome of an echo run. `resume_kick` is -1 when no resume was
/// detected.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QkrReversalSummary {
    pub t_star: u64,
    pub epsilon: f64,
    pub resume_kick: i64,
    pub final_fidelity: f64,
    pub eps_th_at_break: f64,
    pub lmax_at_break: u64,
}

pub struct QkrPlan(ExperimentPlan);
pub struct QkrState(RotorState);
pub struct QkrSchedule(KickSchedule);
pub struct QkrPropagator(Propagator);
pub struct QkrSeries(ObservableSeries);
pub struct QkrReversal(ReversalResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(err: &Error) -> QkrStatus {
    match err.category() {
        ErrorCategory::Config => QkrStatus::Config,
        ErrorCategory::Numerical => QkrStatus::Numerical,
        ErrorCategory::Inconclusive => QkrStatus::Inconclusive,
        ErrorCategory::Invalid => QkrStatus::Invalid,
        ErrorCategory::Io => QkrStatus::Io,
    }
}

enum Fail {
    Core(Error),
    Null(&'static str),
    Invalid(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> QkrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QkrStatus::Ok,
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            QkrStatus::NullPointer
        }
        Ok(Err(Fail::Invalid(msg))) => {
            set_error(msg);
            QkrStatus::Invalid
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            QkrStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn get_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn str_arg<'a>(s: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Fail::Invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread (empty if none). The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn qkr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qkr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn qkr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---- plans ----

#[no_mangle]
pub unsafe extern "C" fn qkr_plan_default(out: *mut *mut QkrPlan) -> QkrStatus {
    guard(|| put(out, QkrPlan(ExperimentPlan::default())))
}

/// Parses a TOML config; omitted keys take their defaults.
#[no_mangle]
pub unsafe extern "C" fn qkr_plan_from_toml(text: *const c_char, out: *mut *mut QkrPlan) -> QkrStatus {
    guard(|| {
        let plan = parse_plan(str_arg(text, "text")?)?;
        put(out, QkrPlan(plan))
    })
}

/// Full plan echo; release with `qkr_string_free`.
#[no_mangle]
pub unsafe extern "C" fn qkr_plan_to_toml(plan: *const QkrPlan, out: *mut *mut c_char) -> QkrStatus {
    guard(|| {
        let plan = get(plan, "plan")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let s = CString::new(plan_to_toml(&plan.0)).map_err(|e| Fail::Invalid(e.to_string()))?;
        *out = s.into_raw();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qkr_plan_set_epsilon(plan: *mut QkrPlan, epsilon: f64) -> QkrStatus {
    guard(|| {
        let plan = get_mut(plan, "plan")?;
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Fail::Invalid(format!("epsilon must be >= 0, got {epsilon}")));
        }
        plan.0.epsilon = epsilon;
        Ok(())
    })
}

/// Sets the break time and raises `total_kicks` to `2 t_star` if needed.
#[no_mangle]
pub unsafe extern "C" fn qkr_plan_set_t_star(plan: *mut QkrPlan, t_star: u64) -> QkrStatus {
    guard(|| {
        let plan = get_mut(plan, "plan")?;
        if t_star == 0 {
            return Err(Fail::Invalid("t_star must be >= 1".into()));
        }
        plan.0.t_star = t_star;
        plan.0.total_kicks = plan.0.total_kicks.max(2 * t_star);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qkr_plan_free(plan: *mut QkrPlan) {
    free(plan)
}

// ---- states ----

#[no_mangle]
pub unsafe extern "C" fn qkr_state_new_eigenstate(
    half_width: usize,
    l0: i64,
    hbar: f64,
    out: *mut *mut QkrState,
) -> QkrStatus {
    guard(|| {
        let s = RotorState::new(&InitialStateSpec::MomentumEigenstate { l0 }, half_width, hbar)?;
        put(out, QkrState(s))
    })
}

#[no_mangle]
pub unsafe extern "C" fn qkr_state_new_gaussian(
    half_width: usize,
    center: i64,
    width: f64,
    hbar: f64,
    out: *mut *mut QkrState,
) -> QkrStatus {
    guard(|| {
        let spec = InitialStateSpec::GaussianPacket { center, width };
        put(out, QkrState(RotorState::new(&spec, half_width, hbar)?))
    })
}

/// Builds a state from `2L + 1` interleaved (re, im) pairs ordered from
/// `l = -L` to `l = L`, normalizing them.
#[no_mangle]
pub unsafe extern "C" fn qkr_state_from_amplitudes(
    re_im: *const f64,
    dim: usize,
    hbar: f64,
    out: *mut *mut QkrState,
) -> QkrStatus {
    guard(|| {
        if re_im.is_null() {
            return Err(Fail::Null("re_im"));
        }
        let raw = std::slice::from_raw_parts(re_im, 2 * dim);
        let amps = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        put(out, QkrState(RotorState::from_amplitudes(amps, hbar)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn qkr_state_clone(state: *const QkrState, out: *mut *mut QkrState) -> QkrStatus {
    guard(|| {
        let s = get(state, "state")?;
        put(out, QkrState(s.0.clone()))
    })
}

/// `2L + 1`, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn qkr_state_dim(state: *const QkrState) -> usize {
    state.as_ref().map_or(0, |s| s.0.dim())
}

/// Copies the amplitudes as interleaved (re, im) pairs into `buf`, which
/// must hold `2 * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn qkr_state_amplitudes(
    state: *const QkrState,
    buf: *mut f64,
    len: usize,
) -> QkrStatus {
    guard(|| {
        let s = get(state, "state")?;
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        if len < 2 * s.0.dim() {
            return Err(Fail::Invalid(format!(
                "buffer holds {len} doubles, need {}",
                2 * s.0.dim()
            )));
        }
        let out = std::slice::from_raw_parts_mut(buf, 2 * s.0.dim());
        for (pair, a) in out.chunks_exact_mut(2).zip(s.0.amplitudes().iter()) {
            pair[0] = a.re;
            pair[1] = a.im;
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qkr_state_norm(state: *const QkrState, out: *mut f64) -> QkrStatus {
    guard(|| {
        let s = get(state, "state")?;
        *get_mut(out, "out")? = s.0.norm();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qkr_state_n2(state: *const QkrState, out: *mut f64) -> QkrStatus {
    guard(|| {
        let s = get(state, "state")?;
        *get_mut(out, "out")? = observables::n2_expectation(&s.0);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qkr_state_lmax(state: *const QkrState, delta: f64, out: *mut u64) -> QkrStatus {
    guard(|| {
        let s = get(state, "state")?;
        *get_mut(out, "out")? = observables::lmax(&s.0, delta)?;
        Ok(())
    })
}

/// Applies the phase perturbation `a_l -> a_l exp(i epsilon l)` in place.
#[no_mangle]
pub unsafe extern "C" fn qkr_state_perturb(state: *mut QkrState, epsilon: f64) -> QkrStatus {
    guard(|| {
        let s = get_mut(state, "state")?;
        if !epsilon.is_finite() {
            return Err(Fail::Invalid("epsilon must be finite".into()));
        }
        s.0 = apply_perturbation(&s.0, epsilon);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qkr_state_fidelity(
    a: *const QkrState,
    b: *const QkrState,
    out: *mut f64,
) -> QkrStatus {
    guard(|| {
        let (a, b) = (get(a, "a")?, get(b, "b")?);
        *get_mut(out, "out")? = observables::fidelity(&a.0, &b.0)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qkr_state_free(state: *mut QkrState) {
    free(state)
}

// ---- schedules ----

#[no_mangle]
pub unsafe extern "C" fn qkr_schedule_new_periodic(
    period: f64,
    horizon: usize,
    out: *mut *mut QkrSchedule,
) -> QkrStatus {
    guard(|| {
        let mode = ScheduleMode::Periodic {
            period: Period::Value(period),
        };
        put(out, QkrSchedule(build_schedule(mode, horizon)?))
    })
}

/// Two-comb schedule. A non-positive or NaN `t2` selects the golden ratio.
#[no_mangle]
pub unsafe extern "C" fn qkr_schedule_new_quasiperiodic(
    t1: f64,
    t2: f64,
    horizon: usize,
    out: *mut *mut QkrSchedule,
) -> QkrStatus {
    guard(|| {
        let t2 = if t2 > 0.0 {
            Period::Value(t2)
        } else {
            Period::Golden
        };
        let mode = ScheduleMode::Quasiperiodic {
            t1: Period::Value(t1),
            t2,
        };
        put(out, QkrSchedule(build_schedule(mode, horizon)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn qkr_schedule_len(schedule: *const QkrSchedule) -> usize {
    schedule.as_ref().map_or(0, |s| s.0.len())
}

/// Copies the `len` inter-kick gaps into `buf`; `buf_len` must be at least
/// `qkr_schedule_len`.
#[no_mangle]
pub unsafe extern "C" fn qkr_schedule_gaps(
    schedule: *const QkrSchedule,
    buf: *mut f64,
    buf_len: usize,
) -> QkrStatus {
    guard(|| {
        let s = get(schedule, "schedule")?;
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        let gaps = s.0.gaps();
        if buf_len < gaps.len() {
            return Err(Fail::Invalid(format!(
                "buffer holds {buf_len} doubles, need {}",
                gaps.len()
            )));
        }
        std::slice::from_raw_parts_mut(buf, gaps.len()).copy_from_slice(&gaps);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qkr_schedule_free(schedule: *mut QkrSchedule) {
    free(schedule)
}

// ---- propagators ----

/// Engine with default tolerances and leakage budget.
#[no_mangle]
pub unsafe extern "C" fn qkr_propagator_new(
    kind: QkrPropagatorKind,
    kick_strength: f64,
    hbar: f64,
    half_width: usize,
    out: *mut *mut QkrPropagator,
) -> QkrStatus {
    guard(|| {
        let kind = match kind {
            QkrPropagatorKind::Bessel => PropagatorKind::Bessel,
            QkrPropagatorKind::Spectral => PropagatorKind::Spectral,
        };
        let p = Propagator::new(kind, kick_strength, hbar, half_width, EngineOptions::default())?;
        put(out, QkrPropagator(p))
    })
}

/// One step: free evolution over `dt`, then a kick.
#[no_mangle]
pub unsafe extern "C" fn qkr_propagator_forward(
    prop: *mut QkrPropagator,
    state: *mut QkrState,
    dt: f64,
) -> QkrStatus {
    guard(|| {
        let (p, s) = (get_mut(prop, "prop")?, get_mut(state, "state")?);
        p.0.forward(&mut s.0, dt)?;
        Ok(())
    })
}

/// Exact inverse of `qkr_propagator_forward` with the same `dt`.
#[no_mangle]
pub unsafe extern "C" fn qkr_propagator_adjoint(
    prop: *mut QkrPropagator,
    state: *mut QkrState,
    dt: f64,
) -> QkrStatus {
    guard(|| {
        let (p, s) = (get_mut(prop, "prop")?, get_mut(state, "state")?);
        p.0.adjoint(&mut s.0, dt)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qkr_propagator_free(prop: *mut QkrPropagator) {
    free(prop)
}

// ---- runs and series ----

#[no_mangle]
pub unsafe extern "C" fn qkr_run_forward(plan: *const QkrPlan, out: *mut *mut QkrSeries) -> QkrStatus {
    guard(|| {
        let plan = get(plan, "plan")?;
        put(out, QkrSeries(run_forward(&plan.0)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn qkr_series_len(series: *const QkrSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn qkr_series_get(
    series: *const QkrSeries,
    index: usize,
    out: *mut QkrSample,
) -> QkrStatus {
    guard(|| {
        let s = get(series, "series")?;
        let x =
            s.0.samples
                .get(index)
                .ok_or_else(|| Fail::Invalid(format!("index {index} out of range ({})", s.0.len())))?;
        *get_mut(out, "out")? = QkrSample {
            kick: x.kick,
            time: x.time,
            n2: x.n2,
            entropy: x.entropy,
            pr: x.pr,
            lmax: x.lmax,
            norm_err: x.norm_err,
            fidelity: x.fidelity.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qkr_series_write_csv(series: *const QkrSeries, path: *const c_char) -> QkrStatus {
    guard(|| {
        let s = get(series, "series")?;
        let path = Path::new(str_arg(path, "path")?);
        let f = std::fs::File::create(path).map_err(Error::from)?;
        write_series(&s.0, f)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qkr_series_free(series: *mut QkrSeries) {
    free(series)
}

/// Forward to `t_star`, perturb by `epsilon`, reverse.
#[no_mangle]
pub unsafe extern "C" fn qkr_run_reversal(plan: *const QkrPlan, out: *mut *mut QkrReversal) -> QkrStatus {
    guard(|| {
        let plan = get(plan, "plan")?;
        put(out, QkrReversal(run_reversal(&plan.0)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn qkr_reversal_summary(
    rev: *const QkrReversal,
    out: *mut QkrReversalSummary,
) -> QkrStatus {
    guard(|| {
        let r = &get(rev, "rev")?.0;
        *get_mut(out, "out")? = QkrReversalSummary {
            t_star: r.t_star,
            epsilon: r.epsilon,
            resume_kick: r.resume_kick.map_or(-1, |k| k as i64),
            final_fidelity: r.final_fidelity,
            eps_th_at_break: r.eps_th_at_break,
            lmax_at_break: r.lmax_at_break,
        };
        Ok(())
    })
}

/// Copy of the full echo series (forward leg then reversed leg).
#[no_mangle]
pub unsafe extern "C" fn qkr_reversal_series(rev: *const QkrReversal, out: *mut *mut QkrSeries) -> QkrStatus {
    guard(|| {
        let r = get(rev, "rev")?;
        put(out, QkrSeries(r.0.series.clone()))
    })
}

/// Copy of the unperturbed reversed leg.
#[no_mangle]
pub unsafe extern "C" fn qkr_reversal_baseline(
    rev: *const QkrReversal,
    out: *mut *mut QkrSeries,
) -> QkrStatus {
    guard(|| {
        let r = get(rev, "rev")?;
        put(out, QkrSeries(r.0.baseline.clone()))
    })
}

#[no_mangle]
pub unsafe extern "C" fn qkr_reversal_free(rev: *mut QkrReversal) {
    free(rev)
}
