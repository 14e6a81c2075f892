//! C ABI over `patdens`.
//!
//! Every fallible function returns a [`PdStatus`]; on failure the message is
//! available from [`pd_last_error`] on the same thread. Words, limit shapes
//! and deck results are opaque handles released with their `_free` function.
//! Text results are copied into caller buffers: when `cap` is too small the
//! call returns `PD_STATUS_BUFFER_TOO_SMALL` and `*needed` holds the size
//! required, terminating NUL included.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use patdens::deckopt::{optimize_deck, DeckProblem, DeckResult, Mode};
use patdens::feasibility::{c_closed_form, c_numeric, AscentConfig};
use patdens::limitshape::{solve_limit_shape, DensityTargets, LimitConfig, LimitShape};
use patdens::measures::{measure_of_word, wasserstein};
use patdens::patterns::{count_pattern, density};
use patdens::{BinaryWord, Error};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdStatus {
    Ok = 0,
    InvalidArgument = 1,
    InfeasibleExponent = 2,
    NearBoundary = 3,
    NonConvergence = 4,
    Io = 5,
    NullPointer = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdDeckMode {
    Exhaustive = 0,
    Anneal = 1,
    Ascent = 2,
}

/// A binary word.
pub struct PdWord(BinaryWord);

/// A solved entropy-maximizing limit shape.
pub struct PdLimitShape(LimitShape);

/// Outcome of a deck optimization.
pub struct PdDeckResult {
    result: DeckResult,
    best: PdWord,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PdStatus {
    match e {
        Error::InvalidArgument(_) => PdStatus::InvalidArgument,
        Error::InfeasibleExponent(_) => PdStatus::InfeasibleExponent,
        Error::NearBoundary(_) => PdStatus::NearBoundary,
        Error::NonConvergence { .. } => PdStatus::NonConvergence,
        Error::Io(_) => PdStatus::Io,
    }
}

/// Failure inside the shim itself, before or after the library call.
struct Fail(PdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PdStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PdStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            PdStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(PdStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

/// Copies `s` plus a NUL into `buf`.
unsafe fn copy_out(s: &str, buf: *mut c_char, cap: usize, needed: *mut usize) -> Result<(), Fail> {
    let n = s.len() + 1;
    if !needed.is_null() {
        needed.write(n);
    }
    if cap < n {
        return Err(Fail(PdStatus::BufferTooSmall, format!("buffer holds {cap} bytes, {n} needed")));
    }
    if buf.is_null() {
        return Err(null("buf"));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
    buf.add(s.len()).write(0);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread; empty if none. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a string of `'0'`/`'1'` characters.
#[no_mangle]
pub unsafe extern "C" fn pd_word_new(bits: *const c_char, out: *mut *mut PdWord) -> PdStatus {
    guard(|| {
        let w: BinaryWord = text(bits, "bits")?.parse()?;
        put(out, Box::into_raw(Box::new(PdWord(w))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn pd_word_free(word: *mut PdWord) {
    if !word.is_null() {
        drop(Box::from_raw(word));
    }
}

/// Length of the word, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pd_word_len(word: *const PdWord) -> usize {
    word.as_ref().map_or(0, |w| w.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn pd_word_to_string(
    word: *const PdWord,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> PdStatus {
    guard(|| copy_out(&handle(word, "word")?.0.to_string(), buf, cap, needed))
}

/// Exact number of occurrences of `pattern` as a subsequence of `host`, as a
/// decimal string.
#[no_mangle]
pub unsafe extern "C" fn pd_count(
    pattern: *const PdWord,
    host: *const PdWord,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> PdStatus {
    guard(|| {
        let c = count_pattern(&handle(pattern, "pattern")?.0, &handle(host, "host")?.0)?;
        copy_out(&c.to_string(), buf, cap, needed)
    })
}

/// Count divided by the number of position subsets of the pattern's length.
#[no_mangle]
pub unsafe extern "C" fn pd_density(pattern: *const PdWord, host: *const PdWord, out: *mut f64) -> PdStatus {
    guard(|| {
        let d = density(&handle(pattern, "pattern")?.0, &handle(host, "host")?.0)?;
        put(out, d, "out")
    })
}

/// Wasserstein-1 distance between the measures of two words.
#[no_mangle]
pub unsafe extern "C" fn pd_wasserstein(a: *const PdWord, b: *const PdWord, out: *mut f64) -> PdStatus {
    guard(|| {
        let ma = measure_of_word(&handle(a, "a")?.0)?;
        let mb = measure_of_word(&handle(b, "b")?.0)?;
        put(out, wasserstein(&ma, &mb), "out")
    })
}

/// Tabulated constant `C` for `tau`; `PD_STATUS_INVALID_ARGUMENT` when none
/// is tabulated.
#[no_mangle]
pub unsafe extern "C" fn pd_c_closed_form(tau: *const PdWord, out: *mut f64) -> PdStatus {
    guard(|| {
        let tau = &handle(tau, "tau")?.0;
        match c_closed_form(tau)? {
            Some(c) => put(out, c, "out"),
            None => Err(Fail(PdStatus::InvalidArgument, format!("no closed form tabulated for {tau}"))),
        }
    })
}

/// Numeric constant `C` for `tau` by ascent on a grid of `grid` cells.
#[no_mangle]
pub unsafe extern "C" fn pd_c_numeric(tau: *const PdWord, grid: usize, out: *mut f64) -> PdStatus {
    guard(|| {
        let r = c_numeric(&handle(tau, "tau")?.0, grid, &AscentConfig::default())?;
        put(out, r.value, "out")
    })
}

/// Solves for the entropy-maximizing density; `targets` reads like
/// `"rho1=0.5,rho110=0.3333"`.
#[no_mangle]
pub unsafe extern "C" fn pd_limit_shape_solve(
    targets: *const c_char,
    grid: usize,
    out: *mut *mut PdLimitShape,
) -> PdStatus {
    guard(|| {
        let t = DensityTargets::parse(text(targets, "targets")?)?;
        let s = solve_limit_shape(&t, grid, &LimitConfig::default())?;
        put(out, Box::into_raw(Box::new(PdLimitShape(s))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn pd_limit_shape_free(shape: *mut PdLimitShape) {
    if !shape.is_null() {
        drop(Box::from_raw(shape));
    }
}

/// Entropy of the shape, NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pd_limit_shape_entropy(shape: *const PdLimitShape) -> f64 {
    shape.as_ref().map_or(f64::NAN, |s| s.0.entropy)
}

/// Value of the gridded density at `x` in `[0, 1]`, NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pd_limit_shape_value_at(shape: *const PdLimitShape, x: f64) -> f64 {
    shape.as_ref().map_or(f64::NAN, |s| s.0.f.value_at(x))
}

/// Exponent polynomial coefficients `a_0, ..., a_k`. `*needed` receives `k + 1`.
#[no_mangle]
pub unsafe extern "C" fn pd_limit_shape_coeffs(
    shape: *const PdLimitShape,
    buf: *mut f64,
    cap: usize,
    needed: *mut usize,
) -> PdStatus {
    guard(|| {
        let c = &handle(shape, "shape")?.0.p.coeffs;
        if !needed.is_null() {
            needed.write(c.len());
        }
        if cap < c.len() {
            return Err(Fail(PdStatus::BufferTooSmall, format!("buffer holds {cap} values, {} needed", c.len())));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(c.as_ptr(), buf, c.len());
        Ok(())
    })
}

/// Arranges `n` cards, `ones` of them 1, to maximize the density of
/// `pattern`. `initial` may be null.
#[no_mangle]
pub unsafe extern "C" fn pd_deck_optimize(
    n: usize,
    ones: usize,
    pattern: *const PdWord,
    mode: PdDeckMode,
    initial: *const PdWord,
    seed: u64,
    out: *mut *mut PdDeckResult,
) -> PdStatus {
    guard(|| {
        let mode = match mode {
            PdDeckMode::Exhaustive => Mode::Exhaustive,
            PdDeckMode::Anneal => Mode::Anneal,
            PdDeckMode::Ascent => Mode::Ascent,
        };
        let mut prob = DeckProblem::new(n, ones, handle(pattern, "pattern")?.0.clone(), mode)?;
        prob.initial = initial.as_ref().map(|w| w.0.clone());
        let result = optimize_deck(&prob, seed)?;
        let best = PdWord(result.best.clone());
        put(out, Box::into_raw(Box::new(PdDeckResult { result, best })), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn pd_deck_result_free(result: *mut PdDeckResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Best arrangement, borrowed from `result` and valid until it is freed.
#[no_mangle]
pub unsafe extern "C" fn pd_deck_result_best(result: *const PdDeckResult) -> *const PdWord {
    result.as_ref().map_or(ptr::null(), |r| &r.best as *const PdWord)
}

/// Density of the best arrangement, NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pd_deck_result_density(result: *const PdDeckResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.result.density)
}

/// Exact occurrence count of the best arrangement as a decimal string.
#[no_mangle]
pub unsafe extern "C" fn pd_deck_result_count(
    result: *const PdDeckResult,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> PdStatus {
    guard(|| copy_out(&handle(result, "result")?.result.count.to_string(), buf, cap, needed))
}
