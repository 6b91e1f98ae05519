//! C ABI surface over the subquad library.
//!
//! Conventions: every fallible call returns an `SqStatus`; results travel
//! through out-pointers. Handles (`SqLoss`, `SqLyapunov`) are opaque and must
//! be released with the matching `_free` function. On any non-`Ok` status a
//! thread-local message is set and readable via `sq_last_error_message` until
//! the next call on the same thread. No call unwinds across the boundary.

// Raw pointers are null-checked before any dereference and invalid non-null
// pointers cannot be guarded against in any C interface, so the functions are
// deliberately not marked unsafe; the status-code contract covers the rest.
#![allow(clippy::not_unsafe_ptr_arg_deref)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use subquad::loss::{loss_deriv, loss_value, LossError, RobustLoss};
use subquad::lyapunov::{v_grad, v_hess_bound, v_value, LyapunovError, LyapunovSpec};
use subquad::stats::{loglog_slope, wasserstein1_1d, StatsError};

/// Result code for every fallible call in this interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument violated a documented precondition.
    InvalidArgument = 2,
    /// The requested quantity does not exist (e.g. a Huber derivative at the
    /// kink, or the Hessian of V_{k,p} at theta* for p in (0,2)).
    Undefined = 3,
    /// An intermediate exponential overflowed.
    Overflow = 4,
    /// An input sample was empty.
    EmptySample = 5,
    /// An unexpected internal failure; the message has details.
    Internal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn fail(status: SqStatus, msg: impl Into<String>) -> SqStatus {
    set_error(msg.into());
    status
}

/// Message for the most recent non-Ok status on this thread, or null when the
/// last call succeeded. The pointer stays valid until the next ffi call on
/// the same thread.
#[no_mangle]
pub extern "C" fn sq_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr())
    })
}

/// Crate version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn sq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Runs a constructor-like closure, translating panics (the library validates
/// arguments with assertions) into InvalidArgument.
fn guarded<T>(f: impl FnOnce() -> T) -> Result<T, SqStatus> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => Ok(v),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "argument validation failed".to_string());
            Err(fail(SqStatus::InvalidArgument, msg))
        }
    }
}

fn status_of_loss(err: &LossError) -> SqStatus {
    match err {
        LossError::NotDifferentiable { .. } => SqStatus::Undefined,
        _ => SqStatus::Internal,
    }
}

fn status_of_lyapunov(err: &LyapunovError) -> SqStatus {
    match err {
        LyapunovError::Undefined => SqStatus::Undefined,
        LyapunovError::Overflow { .. } => SqStatus::Overflow,
        _ => SqStatus::Internal,
    }
}

fn status_of_stats(err: &StatsError) -> SqStatus {
    match err {
        StatsError::EmptySample => SqStatus::EmptySample,
        _ => SqStatus::InvalidArgument,
    }
}

/// Opaque handle for a robust loss function.
pub struct SqLoss(RobustLoss);

/// Opaque handle for a piecewise Lyapunov function V_{k,p}.
pub struct SqLyapunov(LyapunovSpec);

unsafe fn write_out<T>(out: *mut T, value: T) -> SqStatus {
    if out.is_null() {
        return fail(SqStatus::NullPointer, "out pointer is null");
    }
    unsafe { *out = value };
    clear_error();
    SqStatus::Ok
}

fn new_loss(out: *mut *mut SqLoss, make: impl FnOnce() -> RobustLoss) -> SqStatus {
    if out.is_null() {
        return fail(SqStatus::NullPointer, "out pointer is null");
    }
    match guarded(make) {
        Ok(loss) => {
            unsafe { *out = Box::into_raw(Box::new(SqLoss(loss))) };
            clear_error();
            SqStatus::Ok
        }
        Err(status) => status,
    }
}

/// Huber loss with threshold `delta` (> 0).
#[no_mangle]
pub extern "C" fn sq_loss_new_huber(delta: f64, out: *mut *mut SqLoss) -> SqStatus {
    new_loss(out, || RobustLoss::huber(delta))
}

/// Pseudo-Huber loss with scale `delta` (> 0).
#[no_mangle]
pub extern "C" fn sq_loss_new_pseudo_huber(delta: f64, out: *mut *mut SqLoss) -> SqStatus {
    new_loss(out, || RobustLoss::pseudo_huber(delta))
}

/// log-cosh loss.
#[no_mangle]
pub extern "C" fn sq_loss_new_log_cosh(out: *mut *mut SqLoss) -> SqStatus {
    new_loss(out, RobustLoss::log_cosh)
}

/// Generalized Charbonnier loss, `alpha` in [1,2), `c` > 0.
#[no_mangle]
pub extern "C" fn sq_loss_new_gen_charbonnier(
    alpha: f64,
    c: f64,
    out: *mut *mut SqLoss,
) -> SqStatus {
    new_loss(out, || RobustLoss::gen_charbonnier(alpha, c))
}

/// Barron loss, `alpha` in [1,2), `c` > 0.
#[no_mangle]
pub extern "C" fn sq_loss_new_barron(alpha: f64, c: f64, out: *mut *mut SqLoss) -> SqStatus {
    new_loss(out, || RobustLoss::barron(alpha, c))
}

/// Releases a loss handle; a null handle is a no-op.
#[no_mangle]
pub extern "C" fn sq_loss_free(loss: *mut SqLoss) {
    if !loss.is_null() {
        drop(unsafe { Box::from_raw(loss) });
    }
}

/// l(t).
#[no_mangle]
pub extern "C" fn sq_loss_value(loss: *const SqLoss, t: f64, out: *mut f64) -> SqStatus {
    if loss.is_null() {
        return fail(SqStatus::NullPointer, "loss handle is null");
    }
    let value = loss_value(unsafe { &(*loss).0 }, t);
    unsafe { write_out(out, value) }
}

/// Derivative of order 1, 2 or 3 at t. Undefined at a Huber kink.
#[no_mangle]
pub extern "C" fn sq_loss_deriv(
    loss: *const SqLoss,
    t: f64,
    order: u32,
    out: *mut f64,
) -> SqStatus {
    if loss.is_null() {
        return fail(SqStatus::NullPointer, "loss handle is null");
    }
    if !(1..=3).contains(&order) {
        return fail(SqStatus::InvalidArgument, "order must be 1, 2 or 3");
    }
    match loss_deriv(unsafe { &(*loss).0 }, t, order) {
        Ok(v) => unsafe { write_out(out, v) },
        Err(e) => {
            let status = status_of_loss(&e);
            fail(status, e.to_string())
        }
    }
}

/// Builds V_{k,p} with tail exponent `k` in [1,2), window `delta` > 0, power
/// `p` >= 0 and center `theta_star` of length `dim` >= 1.
#[no_mangle]
pub extern "C" fn sq_lyapunov_new(
    k: f64,
    delta: f64,
    p: f64,
    theta_star: *const f64,
    dim: usize,
    out: *mut *mut SqLyapunov,
) -> SqStatus {
    if theta_star.is_null() || out.is_null() {
        return fail(SqStatus::NullPointer, "theta_star and out must be non-null");
    }
    if dim == 0 {
        return fail(SqStatus::InvalidArgument, "dim must be at least 1");
    }
    let center = unsafe { std::slice::from_raw_parts(theta_star, dim) }.to_vec();
    match guarded(|| LyapunovSpec::new(k, delta, p, center)) {
        Ok(spec) => {
            unsafe { *out = Box::into_raw(Box::new(SqLyapunov(spec))) };
            clear_error();
            SqStatus::Ok
        }
        Err(status) => status,
    }
}

/// Releases a Lyapunov handle; a null handle is a no-op.
#[no_mangle]
pub extern "C" fn sq_lyapunov_free(spec: *mut SqLyapunov) {
    if !spec.is_null() {
        drop(unsafe { Box::from_raw(spec) });
    }
}

fn lyapunov_theta<'a>(
    spec: *const SqLyapunov,
    theta: *const f64,
) -> Result<(&'a LyapunovSpec, &'a [f64]), SqStatus> {
    if spec.is_null() || theta.is_null() {
        return Err(fail(SqStatus::NullPointer, "spec and theta must be non-null"));
    }
    let spec = unsafe { &(*spec).0 };
    let theta = unsafe { std::slice::from_raw_parts(theta, spec.theta_star.len()) };
    Ok((spec, theta))
}

/// V_{k,p}(theta); `theta` must have the handle's dimension.
#[no_mangle]
pub extern "C" fn sq_lyapunov_value(
    spec: *const SqLyapunov,
    theta: *const f64,
    out: *mut f64,
) -> SqStatus {
    let (spec, theta) = match lyapunov_theta(spec, theta) {
        Ok(v) => v,
        Err(s) => return s,
    };
    match v_value(spec, theta) {
        Ok(v) => unsafe { write_out(out, v) },
        Err(e) => {
            let status = status_of_lyapunov(&e);
            fail(status, e.to_string())
        }
    }
}

/// Gradient of V_{k,p}; `out_grad` must hold the handle's dimension.
#[no_mangle]
pub extern "C" fn sq_lyapunov_grad(
    spec: *const SqLyapunov,
    theta: *const f64,
    out_grad: *mut f64,
) -> SqStatus {
    let (spec, theta) = match lyapunov_theta(spec, theta) {
        Ok(v) => v,
        Err(s) => return s,
    };
    if out_grad.is_null() {
        return fail(SqStatus::NullPointer, "out_grad is null");
    }
    match v_grad(spec, theta) {
        Ok(g) => {
            let out = unsafe { std::slice::from_raw_parts_mut(out_grad, g.len()) };
            out.copy_from_slice(&g);
            clear_error();
            SqStatus::Ok
        }
        Err(e) => {
            let status = status_of_lyapunov(&e);
            fail(status, e.to_string())
        }
    }
}

/// Hessian operator norm of V_{k,p} with its two analytic envelopes. Any out
/// pointer may be null to skip that value.
#[no_mangle]
pub extern "C" fn sq_lyapunov_hess_bound(
    spec: *const SqLyapunov,
    theta: *const f64,
    out_norm: *mut f64,
    out_envelope_a: *mut f64,
    out_envelope_b: *mut f64,
) -> SqStatus {
    let (spec, theta) = match lyapunov_theta(spec, theta) {
        Ok(v) => v,
        Err(s) => return s,
    };
    match v_hess_bound(spec, theta) {
        Ok(b) => {
            unsafe {
                if !out_norm.is_null() {
                    *out_norm = b.matrix_norm;
                }
                if !out_envelope_a.is_null() {
                    *out_envelope_a = b.bound_a;
                }
                if !out_envelope_b.is_null() {
                    *out_envelope_b = b.bound_b;
                }
            }
            clear_error();
            SqStatus::Ok
        }
        Err(e) => {
            let status = status_of_lyapunov(&e);
            fail(status, e.to_string())
        }
    }
}

/// Wasserstein-1 distance between two one-dimensional empirical measures.
#[no_mangle]
pub extern "C" fn sq_wasserstein1(
    samples_a: *const f64,
    len_a: usize,
    samples_b: *const f64,
    len_b: usize,
    out: *mut f64,
) -> SqStatus {
    if samples_a.is_null() || samples_b.is_null() {
        return fail(SqStatus::NullPointer, "sample pointers must be non-null");
    }
    let a = unsafe { std::slice::from_raw_parts(samples_a, len_a) };
    let b = unsafe { std::slice::from_raw_parts(samples_b, len_b) };
    match wasserstein1_1d(a, b) {
        Ok(v) => unsafe { write_out(out, v) },
        Err(e) => {
            let status = status_of_stats(&e);
            fail(status, e.to_string())
        }
    }
}

/// Log-log slope of `values` against `ns` after a sliding-median smoothing
/// with an odd `window`, fitted over n in [fit_lo, fit_hi]. `out_intercept`
/// and `out_residual_rms` may be null.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub extern "C" fn sq_loglog_slope(
    ns: *const f64,
    values: *const f64,
    len: usize,
    window: usize,
    fit_lo: f64,
    fit_hi: f64,
    out_slope: *mut f64,
    out_intercept: *mut f64,
    out_residual_rms: *mut f64,
) -> SqStatus {
    if ns.is_null() || values.is_null() {
        return fail(SqStatus::NullPointer, "series pointers must be non-null");
    }
    if window % 2 == 0 {
        return fail(SqStatus::InvalidArgument, "window must be odd");
    }
    let ns = unsafe { std::slice::from_raw_parts(ns, len) };
    let values = unsafe { std::slice::from_raw_parts(values, len) };
    let series: Vec<(f64, f64)> = ns.iter().copied().zip(values.iter().copied()).collect();
    match guarded(|| loglog_slope(&series, window, (fit_lo, fit_hi))) {
        Ok(Ok(fit)) => {
            unsafe {
                if !out_slope.is_null() {
                    *out_slope = fit.slope;
                }
                if !out_intercept.is_null() {
                    *out_intercept = fit.intercept;
                }
                if !out_residual_rms.is_null() {
                    *out_residual_rms = fit.residual_rms;
                }
            }
            clear_error();
            SqStatus::Ok
        }
        Ok(Err(e)) => {
            let status = status_of_stats(&e);
            fail(status, e.to_string())
        }
        Err(status) => status,
    }
}
