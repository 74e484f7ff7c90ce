//! C ABI over `ssf-core`.
//!
//! Instances and computed `η_n` are opaque heap handles owned by the
//! caller and released with the matching `*_free`.  Every fallible call
//! returns an [`SsfStatus`]; on failure a message is kept per thread and
//! can be read with [`ssf_last_error_message`].  Strings handed out by the
//! library are freed with [`ssf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use ssf_core::harness::{generate_instance, run_compute, ProblemInstance};
use ssf_core::ssf::{eta_n, SpectralShiftFunction};
use ssf_core::{CMatrix, HermitianOperator, SsfError};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    NotHermitian = 5,
    Numerical = 6,
    Consistency = 7,
    Io = 8,
    Panic = 9,
}

/// Opaque problem instance.
pub struct SsfInstance {
    inner: ProblemInstance,
}

/// Opaque spectral shift function.
pub struct SsfEta {
    inner: SpectralShiftFunction,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &SsfError) -> SsfStatus {
    match e {
        SsfError::Parse { .. } => SsfStatus::Parse,
        SsfError::NotHermitian { .. } | SsfError::NotHermitianInput { .. } => SsfStatus::NotHermitian,
        SsfError::Validation(_) | SsfError::InvalidArgument(_) | SsfError::DimensionMismatch { .. } => SsfStatus::Validation,
        SsfError::Consistency(_) => SsfStatus::Consistency,
        SsfError::Io(_) => SsfStatus::Io,
        _ => SsfStatus::Numerical,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (SsfStatus, String)>) -> SsfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SsfStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside ssf".into());
            SsfStatus::Panic
        }
    }
}

fn lib(e: SsfError) -> (SsfStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SsfStatus, String) {
    (SsfStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (SsfStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller passes a NUL-terminated string.
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| (SsfStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), (SsfStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    let c = CString::new(s).map_err(|_| (SsfStatus::Numerical, "string contains NUL".to_string()))?;
    // SAFETY: `out` checked non-null.
    unsafe { *out = c.into_raw() };
    Ok(())
}

unsafe fn matrix(dim: usize, re: *const f64, im: *const f64, what: &str) -> Result<CMatrix, (SsfStatus, String)> {
    if re.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller provides `dim * dim` doubles per non-null plane.
    let re = unsafe { std::slice::from_raw_parts(re, dim * dim) };
    let im = (!im.is_null()).then(|| unsafe { std::slice::from_raw_parts(im, dim * dim) });
    Ok(CMatrix::from_fn(dim, dim, |i, j| {
        Complex64::new(re[i * dim + j], im.map_or(0.0, |p| p[i * dim + j]))
    }))
}

/// Message of the last failed call on this thread, or NULL.  The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ssf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library.  NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ssf_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: produced by `CString::into_raw`.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Parses an instance document (same schema as the CLI).
///
/// # Safety
/// `json` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssf_instance_from_json(json: *const c_char, out: *mut *mut SsfInstance) -> SsfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = unsafe { read_str(json, "json") }?;
        let inner = ProblemInstance::from_json(text).map_err(lib)?;
        unsafe { *out = Box::into_raw(Box::new(SsfInstance { inner })) };
        Ok(())
    })
}

/// Builds an instance from row-major planes; either imaginary plane may be
/// NULL.  The function list is empty.
///
/// # Safety
/// Non-null planes must hold `dim * dim` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssf_instance_from_matrices(
    dim: usize,
    h_re: *const f64,
    h_im: *const f64,
    v_re: *const f64,
    v_im: *const f64,
    n: usize,
    out: *mut *mut SsfInstance,
) -> SsfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if dim == 0 {
            return Err((SsfStatus::Validation, "dim must be >= 1".into()));
        }
        let h = HermitianOperator::new(unsafe { matrix(dim, h_re, h_im, "h_re") }?).map_err(lib)?;
        let v = HermitianOperator::new(unsafe { matrix(dim, v_re, v_im, "v_re") }?).map_err(lib)?;
        let inner = ProblemInstance::new(h, v, n, Vec::new()).map_err(lib)?;
        unsafe { *out = Box::into_raw(Box::new(SsfInstance { inner })) };
        Ok(())
    })
}

/// Seeded random instance.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssf_instance_generate(
    dim: usize,
    spread: f64,
    schatten_budget: f64,
    n: usize,
    seed: u64,
    out: *mut *mut SsfInstance,
) -> SsfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = generate_instance(dim, spread, schatten_budget, n, seed).map_err(lib)?;
        unsafe { *out = Box::into_raw(Box::new(SsfInstance { inner })) };
        Ok(())
    })
}

/// Serializes an instance; free the result with [`ssf_string_free`].
///
/// # Safety
/// `inst` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssf_instance_to_json(inst: *const SsfInstance, out: *mut *mut c_char) -> SsfStatus {
    guard(|| {
        let inst = unsafe { inst.as_ref() }.ok_or_else(|| null("inst"))?;
        unsafe { write_string(out, inst.inner.to_json()) }
    })
}

/// Matrix dimension, 0 for NULL.
///
/// # Safety
/// `inst` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssf_instance_dim(inst: *const SsfInstance) -> usize {
    unsafe { inst.as_ref() }.map_or(0, |i| i.inner.dim())
}

/// # Safety
/// `inst` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ssf_instance_free(inst: *mut SsfInstance) {
    if !inst.is_null() {
        drop(unsafe { Box::from_raw(inst) });
    }
}

/// Full compute record as JSON; `all_pass` (nullable) receives 1 when every
/// check passed.
///
/// # Safety
/// `inst` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssf_compute_record_json(inst: *const SsfInstance, out: *mut *mut c_char, all_pass: *mut i32) -> SsfStatus {
    guard(|| {
        let inst = unsafe { inst.as_ref() }.ok_or_else(|| null("inst"))?;
        let record = run_compute(&inst.inner, false).map_err(lib)?;
        if !all_pass.is_null() {
            unsafe { *all_pass = i32::from(record.all_pass) };
        }
        unsafe { write_string(out, serde_json::to_string(&record).expect("record serializes")) }
    })
}

/// `η_n` for the instance; `n = 0` uses the instance order.
///
/// # Safety
/// `inst` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssf_eta_compute(inst: *const SsfInstance, n: usize, out: *mut *mut SsfEta) -> SsfStatus {
    guard(|| {
        let inst = unsafe { inst.as_ref() }.ok_or_else(|| null("inst"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let n = if n == 0 { inst.inner.n } else { n };
        let inner = eta_n(&inst.inner.h, &inst.inner.v, n).map_err(lib)?;
        unsafe { *out = Box::into_raw(Box::new(SsfEta { inner })) };
        Ok(())
    })
}

/// Order `n`, 0 for NULL.
///
/// # Safety
/// `eta` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssf_eta_order(eta: *const SsfEta) -> usize {
    unsafe { eta.as_ref() }.map_or(0, |e| e.inner.order)
}

/// Left limit `η_n(t-)`; `right != 0` gives `η_n(t+)`.
///
/// # Safety
/// `eta` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssf_eta_eval(eta: *const SsfEta, t: f64, right: i32, out: *mut f64) -> SsfStatus {
    guard(|| {
        let eta = unsafe { eta.as_ref() }.ok_or_else(|| null("eta"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = if right != 0 { eta.inner.eval_right(t) } else { eta.inner.eval(t) };
        Ok(())
    })
}

/// `∫ η_n` and `‖η_n‖_1`; either output may be NULL.
///
/// # Safety
/// `eta` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssf_eta_norms(eta: *const SsfEta, integral: *mut f64, l1_norm: *mut f64) -> SsfStatus {
    guard(|| {
        let eta = unsafe { eta.as_ref() }.ok_or_else(|| null("eta"))?;
        if let Some(i) = unsafe { integral.as_mut() } {
            *i = eta.inner.integral();
        }
        if let Some(l) = unsafe { l1_norm.as_mut() } {
            *l = eta.inner.l1_norm();
        }
        Ok(())
    })
}

/// Copies up to `cap` breakpoints into `buf` (which may be NULL when `cap`
/// is 0) and stores the total count in `count`.
///
/// # Safety
/// `buf` must hold `cap` doubles; `count` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssf_eta_breakpoints(eta: *const SsfEta, buf: *mut f64, cap: usize, count: *mut usize) -> SsfStatus {
    guard(|| {
        let eta = unsafe { eta.as_ref() }.ok_or_else(|| null("eta"))?;
        let count = unsafe { count.as_mut() }.ok_or_else(|| null("count"))?;
        let bps = eta.inner.eta.breakpoints();
        *count = bps.len();
        let k = cap.min(bps.len());
        if k > 0 {
            if buf.is_null() {
                return Err(null("buf"));
            }
            unsafe { ptr::copy_nonoverlapping(bps.as_ptr(), buf, k) };
        }
        Ok(())
    })
}

/// Breakpoints, per-interval coefficients and jumps as JSON.
///
/// # Safety
/// `eta` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssf_eta_to_json(eta: *const SsfEta, out: *mut *mut c_char) -> SsfStatus {
    guard(|| {
        let eta = unsafe { eta.as_ref() }.ok_or_else(|| null("eta"))?;
        unsafe { write_string(out, serde_json::to_string(&eta.inner).expect("eta serializes")) }
    })
}

/// # Safety
/// `eta` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ssf_eta_free(eta: *mut SsfEta) {
    if !eta.is_null() {
        drop(unsafe { Box::from_raw(eta) });
    }
}
