//! C ABI for the ON-OFF privacy core: opaque matrix handles, status codes,
//! and flat double/byte outputs so other languages can bind without touching
//! Rust types. The header is generated into `include/onoff.h` at build time.
//!
//! Probabilities cross the boundary as doubles; exactness guarantees live in
//! the Rust core and its test suite, the FFI is a reporting surface.

use std::ffi::CStr;
use std::os::raw::{c_char, c_int};

use onoff_core::markov::{Source, TransitionMatrix, UContext};
use onoff_core::rational::to_f64;
use onoff_core::scheme::{
    encoder, optimal_inverse_rate, pi_floor, query_marginal, sample_query, PrivacyPattern,
    QuerySymbol,
};
use onoff_core::verifier::{uniform_initial, verify_cell};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnoffStatus {
    Ok = 0,
    NullPointer = 1,
    ParseError = 2,
    NotStochastic = 3,
    DegenerateContext = 4,
    ImpossibleContext = 5,
    InvalidArgument = 6,
    VerifyFailed = 7,
    InternalError = 8,
}

/// Source labels (source 1 = A, source 2 = B).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnoffSource {
    A = 0,
    B = 1,
}

impl From<OnoffSource> for Source {
    fn from(s: OnoffSource) -> Source {
        match s {
            OnoffSource::A => Source::A,
            OnoffSource::B => Source::B,
        }
    }
}

/// Opaque validated transition matrix handle.
pub struct OnoffMatrix(TransitionMatrix);

fn status_of(e: &onoff_core::Error) -> OnoffStatus {
    use onoff_core::Error::*;
    match e {
        NotStochastic(_) => OnoffStatus::NotStochastic,
        DegenerateContext { .. } => OnoffStatus::DegenerateContext,
        ImpossibleContext { .. } => OnoffStatus::ImpossibleContext,
        Parse(_) => OnoffStatus::ParseError,
        _ => OnoffStatus::InternalError,
    }
}

/// Parses `"3/4 1/4 1/4 3/4"` or `"alpha=1/4"` into a validated handle.
/// On success writes the handle to `out`; free it with `onoff_matrix_free`.
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn onoff_matrix_parse(
    text: *const c_char,
    out: *mut *mut OnoffMatrix,
) -> OnoffStatus {
    if text.is_null() || out.is_null() {
        return OnoffStatus::NullPointer;
    }
    let s = match CStr::from_ptr(text).to_str() {
        Ok(s) => s,
        Err(_) => return OnoffStatus::ParseError,
    };
    match TransitionMatrix::parse(s) {
        Ok(m) => {
            *out = Box::into_raw(Box::new(OnoffMatrix(m)));
            OnoffStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// # Safety
/// `m` must be a handle returned by `onoff_matrix_parse`, not yet freed.
/// Passing null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn onoff_matrix_free(m: *mut OnoffMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Pi-floor of both sources at the given gap.
///
/// # Safety
/// `m`, `pi_a`, `pi_b` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn onoff_pi_floor(
    m: *const OnoffMatrix,
    gap: usize,
    pi_a: *mut f64,
    pi_b: *mut f64,
) -> OnoffStatus {
    if m.is_null() || pi_a.is_null() || pi_b.is_null() {
        return OnoffStatus::NullPointer;
    }
    match pi_floor(&(*m).0, gap) {
        Ok(pf) => {
            *pi_a = to_f64(pf.pi(Source::A));
            *pi_b = to_f64(pf.pi(Source::B));
            OnoffStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Optimal expected downloads per step, 2 - pi(A) - pi(B).
///
/// # Safety
/// `m` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn onoff_inverse_rate(
    m: *const OnoffMatrix,
    gap: usize,
    out: *mut f64,
) -> OnoffStatus {
    if m.is_null() || out.is_null() {
        return OnoffStatus::NullPointer;
    }
    match optimal_inverse_rate(&(*m).0, gap) {
        Ok(r) => {
            *out = to_f64(&r);
            OnoffStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Encoder distribution over the query symbols {A}, {B}, {A,B} for request
/// `x` in context `(last_on, next)`. `probs` must hold 3 doubles.
///
/// # Safety
/// `m` and `probs` must be valid pointers; `probs` points to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn onoff_encoder_probs(
    m: *const OnoffMatrix,
    gap: usize,
    x: OnoffSource,
    last_on: OnoffSource,
    next: OnoffSource,
    probs: *mut f64,
) -> OnoffStatus {
    if m.is_null() || probs.is_null() {
        return OnoffStatus::NullPointer;
    }
    let u = UContext::new(last_on.into(), next.into());
    match encoder(&(*m).0, gap, x.into(), u) {
        Ok(d) => {
            for q in QuerySymbol::ALL {
                *probs.add(q.index()) = to_f64(d.prob(q));
            }
            OnoffStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Marginal query distribution at the given gap. `probs` must hold 3 doubles
/// in the order {A}, {B}, {A,B}.
///
/// # Safety
/// `m` and `probs` must be valid pointers; `probs` points to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn onoff_query_marginal(
    m: *const OnoffMatrix,
    gap: usize,
    probs: *mut f64,
) -> OnoffStatus {
    if m.is_null() || probs.is_null() {
        return OnoffStatus::NullPointer;
    }
    match query_marginal(&(*m).0, gap) {
        Ok(qm) => {
            for q in QuerySymbol::ALL {
                *probs.add(q.index()) = to_f64(&qm[q.index()]);
            }
            OnoffStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Draws a query with caller-supplied uniform randomness in [0, 1); writes
/// the query bitmask (bit0 = A, bit1 = B) to `mask_out`.
///
/// # Safety
/// `m` and `mask_out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn onoff_sample_query(
    m: *const OnoffMatrix,
    gap: usize,
    x: OnoffSource,
    last_on: OnoffSource,
    next: OnoffSource,
    draw: f64,
    mask_out: *mut u8,
) -> OnoffStatus {
    if m.is_null() || mask_out.is_null() {
        return OnoffStatus::NullPointer;
    }
    if !(0.0..1.0).contains(&draw) {
        return OnoffStatus::InvalidArgument;
    }
    let u = UContext::new(last_on.into(), next.into());
    match encoder(&(*m).0, gap, x.into(), u) {
        Ok(d) => {
            *mask_out = sample_query(&d, draw).mask();
            OnoffStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Runs the exact verification sweep for a pattern (comma-separated
/// `ON`/`OFF` tokens) at every t in 0..=t_max. Writes 1 to `passed` iff
/// every decodability, privacy and cost check holds exactly.
///
/// # Safety
/// `m`, `pattern`, `passed` must be valid pointers; `pattern` is a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn onoff_verify(
    m: *const OnoffMatrix,
    pattern: *const c_char,
    t_max: usize,
    passed: *mut c_int,
) -> OnoffStatus {
    if m.is_null() || pattern.is_null() || passed.is_null() {
        return OnoffStatus::NullPointer;
    }
    let s = match CStr::from_ptr(pattern).to_str() {
        Ok(s) => s,
        Err(_) => return OnoffStatus::ParseError,
    };
    let pat = match PrivacyPattern::parse(s) {
        Ok(p) => p,
        Err(e) => return status_of(&e),
    };
    for t in 0..=t_max {
        match verify_cell(&(*m).0, &pat, &uniform_initial(), t) {
            Ok(row) => {
                if !row.passed() {
                    *passed = 0;
                    return OnoffStatus::Ok;
                }
            }
            Err(e) => return status_of(&e),
        }
    }
    *passed = 1;
    OnoffStatus::Ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::ptr;

    unsafe fn parse(text: &str) -> *mut OnoffMatrix {
        let c = CString::new(text).unwrap();
        let mut out: *mut OnoffMatrix = ptr::null_mut();
        assert_eq!(onoff_matrix_parse(c.as_ptr(), &mut out), OnoffStatus::Ok);
        out
    }

    #[test]
    fn parse_rate_and_free() {
        unsafe {
            let m = parse("alpha=1/4");
            let mut rate = 0.0;
            assert_eq!(onoff_inverse_rate(m, 1, &mut rate), OnoffStatus::Ok);
            assert!((rate - 1.8).abs() < 1e-12);
            let (mut a, mut b) = (0.0, 0.0);
            assert_eq!(onoff_pi_floor(m, 1, &mut a, &mut b), OnoffStatus::Ok);
            assert!((a - 0.1).abs() < 1e-12 && (b - 0.1).abs() < 1e-12);
            onoff_matrix_free(m);
        }
    }

    #[test]
    fn parse_errors() {
        unsafe {
            let c = CString::new("1/2 1/3 1/4 3/4").unwrap();
            let mut out: *mut OnoffMatrix = ptr::null_mut();
            assert_eq!(
                onoff_matrix_parse(c.as_ptr(), &mut out),
                OnoffStatus::NotStochastic
            );
            assert_eq!(
                onoff_matrix_parse(ptr::null(), &mut out),
                OnoffStatus::NullPointer
            );
        }
    }

    #[test]
    fn encoder_and_marginal() {
        unsafe {
            let m = parse("alpha=1/4");
            let mut probs = [0.0f64; 3];
            assert_eq!(
                onoff_encoder_probs(m, 1, OnoffSource::A, OnoffSource::A, OnoffSource::A, probs.as_mut_ptr()),
                OnoffStatus::Ok
            );
            assert!((probs[0] - 1.0 / 9.0).abs() < 1e-12);
            assert_eq!(probs[1], 0.0);
            assert!((probs[2] - 8.0 / 9.0).abs() < 1e-12);
            assert_eq!(
                onoff_query_marginal(m, 1, probs.as_mut_ptr()),
                OnoffStatus::Ok
            );
            assert!((probs[0] - 0.1).abs() < 1e-12);
            // impossible context at gap 0
            assert_eq!(
                onoff_encoder_probs(m, 0, OnoffSource::B, OnoffSource::A, OnoffSource::B, probs.as_mut_ptr()),
                OnoffStatus::ImpossibleContext
            );
            onoff_matrix_free(m);
        }
    }

    #[test]
    fn sampling_masks() {
        unsafe {
            let m = parse("alpha=1/4");
            let mut mask = 0u8;
            assert_eq!(
                onoff_sample_query(m, 1, OnoffSource::A, OnoffSource::A, OnoffSource::A, 0.05, &mut mask),
                OnoffStatus::Ok
            );
            assert_eq!(mask, 0b01);
            assert_eq!(
                onoff_sample_query(m, 1, OnoffSource::A, OnoffSource::A, OnoffSource::A, 0.5, &mut mask),
                OnoffStatus::Ok
            );
            assert_eq!(mask, 0b11);
            assert_eq!(
                onoff_sample_query(m, 1, OnoffSource::A, OnoffSource::A, OnoffSource::A, 1.5, &mut mask),
                OnoffStatus::InvalidArgument
            );
            onoff_matrix_free(m);
        }
    }

    #[test]
    fn verify_via_ffi() {
        unsafe {
            let m = parse("alpha=1/3");
            let pat = CString::new("ON,OFF,ON").unwrap();
            let mut passed = -1;
            assert_eq!(onoff_verify(m, pat.as_ptr(), 2, &mut passed), OnoffStatus::Ok);
            assert_eq!(passed, 1);
            onoff_matrix_free(m);
        }
    }
}
