//! C ABI over the `transcend` core.
//!
//! Programs live behind an opaque `TranscendProgram` handle. Every fallible
//! call returns a `TranscendStatus`; on failure the message is available from
//! `transcend_last_error` on the same thread until the next failing call.
//! Strings returned by the library must be released with
//! `transcend_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use transcend::certify::{self, FailureReason, ProofLimits};
use transcend::{evalcore, graph, ArithmeticMode, Error, ProgramGraph, TargetFunction};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TranscendStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    InvalidProgram = 4,
    Domain = 5,
    Numerical = 6,
    Io = 7,
    Panic = 8,
}

pub const TRANSCEND_TARGET_EXP2: i32 = 0;
pub const TRANSCEND_TARGET_LOG2: i32 = 1;
pub const TRANSCEND_TARGET_ERF: i32 = 2;
pub const TRANSCEND_TARGET_AIRY: i32 = 3;

pub const TRANSCEND_MODE_REAL64: i32 = 0;
pub const TRANSCEND_MODE_FLOAT32: i32 = 1;

pub const TRANSCEND_PROOF_PROVEN: i32 = 0;
pub const TRANSCEND_PROOF_BOUND_EXCEEDED: i32 = 1;
pub const TRANSCEND_PROOF_POSSIBLE_POLE: i32 = 2;
pub const TRANSCEND_PROOF_LIMITS: i32 = 3;

/// Opaque program handle.
pub struct TranscendProgram {
    graph: ProgramGraph,
}

/// Outcome of `transcend_prove_bound`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct TranscendProof {
    /// One of the `TRANSCEND_PROOF_*` constants.
    pub outcome: i32,
    pub subintervals: u64,
    pub max_depth: u32,
    /// Largest local bound over the proven leaves.
    pub max_eta: f64,
    /// Failing subinterval when `outcome` is not proven.
    pub witness_lo: f64,
    pub witness_hi: f64,
    pub witness_eta: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TranscendStatus {
    match e {
        Error::Parse { .. } => TranscendStatus::Parse,
        Error::Structural(_) | Error::DegenerateConstant(_) => TranscendStatus::InvalidProgram,
        Error::Domain { .. } => TranscendStatus::Domain,
        Error::Numerical(_) | Error::BenchIntegrity(_) => TranscendStatus::Numerical,
        Error::Io(_) => TranscendStatus::Io,
        _ => TranscendStatus::InvalidArgument,
    }
}

fn guard<F: FnOnce() -> Result<(), (TranscendStatus, String)>>(f: F) -> TranscendStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TranscendStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            TranscendStatus::Panic
        }
    }
}

type Fail = (TranscendStatus, String);

fn lift<T>(r: transcend::Result<T>) -> Result<T, Fail> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> Fail {
    (TranscendStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: &str) -> Fail {
    (TranscendStatus::InvalidArgument, msg.to_string())
}

unsafe fn program<'a>(p: *const TranscendProgram) -> Result<&'a TranscendProgram, Fail> {
    p.as_ref().ok_or_else(|| null("program"))
}

fn target_of(t: i32) -> Result<TargetFunction, Fail> {
    match t {
        TRANSCEND_TARGET_EXP2 => Ok(TargetFunction::Exp2),
        TRANSCEND_TARGET_LOG2 => Ok(TargetFunction::Log2),
        TRANSCEND_TARGET_ERF => Ok(TargetFunction::Erf),
        TRANSCEND_TARGET_AIRY => Ok(TargetFunction::AiryShifted),
        _ => Err(invalid("unknown target")),
    }
}

fn mode_of(m: i32) -> Result<ArithmeticMode, Fail> {
    match m {
        TRANSCEND_MODE_REAL64 => Ok(ArithmeticMode::Real64),
        TRANSCEND_MODE_FLOAT32 => Ok(ArithmeticMode::Float32),
        _ => Err(invalid("unknown mode")),
    }
}

/// Message of the last failing call on this thread, or NULL. Owned by the
/// library; valid until the next failing call.
#[no_mangle]
pub extern "C" fn transcend_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn transcend_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parses program text (`def f(x):` form or bare statements).
///
/// # Safety
/// `text` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn transcend_program_parse(text: *const c_char, out: *mut *mut TranscendProgram) -> TranscendStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let s = CStr::from_ptr(text).to_str().map_err(|_| invalid("text is not UTF-8"))?;
        let graph = lift(graph::parse(s))?;
        *out = Box::into_raw(Box::new(TranscendProgram { graph }));
        Ok(())
    })
}

/// Releases a program. NULL is ignored.
///
/// # Safety
/// `p` must come from `transcend_program_parse` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn transcend_program_free(p: *mut TranscendProgram) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of arithmetic operations, or 0 for NULL.
///
/// # Safety
/// `p` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn transcend_program_operations(p: *const TranscendProgram) -> usize {
    p.as_ref().map_or(0, |p| p.graph.count_operations())
}

/// Number of coefficients, or 0 for NULL.
///
/// # Safety
/// `p` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn transcend_program_coefficients(p: *const TranscendProgram) -> usize {
    p.as_ref().map_or(0, |p| p.graph.num_coeffs())
}

/// Canonical text of the program; free with `transcend_string_free`.
///
/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn transcend_program_serialize(p: *const TranscendProgram, out: *mut *mut c_char) -> TranscendStatus {
    guard(|| {
        let p = program(p)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = CString::new(graph::serialize(&p.graph)).map_err(|_| invalid("NUL in program text"))?;
        *out = s.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn transcend_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Evaluates the program at `n` inputs. Non-finite results propagate.
///
/// # Safety
/// `xs` and `out` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn transcend_program_eval(
    p: *const TranscendProgram,
    mode: i32,
    xs: *const f64,
    n: usize,
    out: *mut f64,
) -> TranscendStatus {
    guard(|| {
        let p = program(p)?;
        let mode = mode_of(mode)?;
        if n == 0 {
            return Ok(());
        }
        if xs.is_null() || out.is_null() {
            return Err(null("buffer"));
        }
        let xs = std::slice::from_raw_parts(xs, n);
        let out = std::slice::from_raw_parts_mut(out, n);
        for (o, &x) in out.iter_mut().zip(xs) {
            *o = p.graph.eval(x, mode);
        }
        Ok(())
    })
}

/// Maximum relative error (real mode) or ULP error (float mode) against
/// `target` on an evenly spaced grid of `points` inputs.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn transcend_max_error(
    p: *const TranscendProgram,
    target: i32,
    mode: i32,
    points: usize,
    out: *mut f64,
) -> TranscendStatus {
    guard(|| {
        let p = program(p)?;
        let (target, mode) = (target_of(target)?, mode_of(mode)?);
        if out.is_null() {
            return Err(null("out"));
        }
        let coeffs: Vec<f64> = p.graph.coeffs().iter().map(|&c| mode.bind(c)).collect();
        let r = lift(evalcore::max_error_on_grid(&p.graph, &coeffs, target, mode, points))?;
        *out = r.max_error;
        Ok(())
    })
}

/// Tries to prove |program/target - 1| <= epsilon on [lo, hi]. Passing NaN
/// for both ends selects the target's default domain; 0 for `order`,
/// `max_depth` or `max_leaves` selects the default. A completed attempt
/// returns `Ok` whatever its outcome; the outcome is in `out`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn transcend_prove_bound(
    p: *const TranscendProgram,
    target: i32,
    lo: f64,
    hi: f64,
    epsilon: f64,
    order: u32,
    max_depth: u32,
    max_leaves: u64,
    out: *mut TranscendProof,
) -> TranscendStatus {
    guard(|| {
        let p = program(p)?;
        let target = target_of(target)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let domain = if lo.is_nan() && hi.is_nan() {
            certify::default_domain(target)
        } else {
            (lo, hi)
        };
        let d = ProofLimits::default();
        let limits = ProofLimits {
            taylor_order: if order == 0 { d.taylor_order } else { order as usize },
            max_depth: if max_depth == 0 { d.max_depth } else { max_depth },
            max_leaves: if max_leaves == 0 { d.max_leaves } else { max_leaves },
            ..d
        };
        let g = &p.graph;
        let r = lift(certify::prove_bound(g, g.coeffs(), target, domain, epsilon, &limits))?;
        let mut proof = TranscendProof {
            outcome: TRANSCEND_PROOF_PROVEN,
            subintervals: r.subintervals_used,
            max_depth: r.max_depth,
            max_eta: r.max_eta,
            ..Default::default()
        };
        if let Some(f) = &r.failure {
            proof.outcome = match f.reason {
                FailureReason::BoundExceeded => TRANSCEND_PROOF_BOUND_EXCEEDED,
                FailureReason::PossiblePole => TRANSCEND_PROOF_POSSIBLE_POLE,
                FailureReason::Limits => TRANSCEND_PROOF_LIMITS,
            };
            proof.witness_lo = f.lo;
            proof.witness_hi = f.hi;
            proof.witness_eta = f.eta;
        }
        *out = proof;
        Ok(())
    })
}
