//! C ABI for spectral-forecast.
//!
//! Objects live behind opaque handles created by `sf_*_new` and released by
//! the matching `sf_*_free`. Every fallible call returns an [`SfStatus`];
//! on failure `sf_last_error` describes the most recent error on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use spectral_forecast::analysis::{spectrum_bound, taylor_worst_case, SpectrumBoundParams, TaylorBoundParams};
use spectral_forecast::chebyshev::{eval_cheb, truncation_bound, BasisDegree, EllipseBoundParams, ProjectedTime};
use spectral_forecast::forecast::{CachePolicy, Forecaster, ForecasterConfig};
use spectral_forecast::schedule::{adaptive_schedule, nfe, ActivationSchedule, ScheduleParams};
use spectral_forecast::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    SF_OK = 0,
    SF_ERR_NULL_POINTER = 1,
    SF_ERR_INVALID_ARGUMENT = 2,
    SF_ERR_SHAPE = 3,
    /// Forecast requested before the cache can support it.
    SF_ERR_NOT_READY = 4,
    SF_ERR_NUMERIC = 5,
    SF_ERR_BUFFER_TOO_SMALL = 6,
    SF_ERR_PANIC = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(err: &Error) -> SfStatus {
    match err {
        Error::AtStep { source, .. } => status_of(source),
        Error::OutOfRange { .. } | Error::InvalidParam(_) | Error::NonMonotone { .. } => SfStatus::SF_ERR_INVALID_ARGUMENT,
        Error::Shape(_) => SfStatus::SF_ERR_SHAPE,
        Error::EmptyCache | Error::InsufficientCache { .. } | Error::Unfitted => SfStatus::SF_ERR_NOT_READY,
        Error::NotPositiveDefinite { .. } | Error::NonFinite => SfStatus::SF_ERR_NUMERIC,
    }
}

fn fail(err: Error) -> SfStatus {
    set_error(err.to_string());
    status_of(&err)
}

/// Runs `f`, turning panics into `SF_ERR_PANIC`.
fn guard(f: impl FnOnce() -> SfStatus) -> SfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            SfStatus::SF_ERR_PANIC
        }
    }
}

fn null(what: &str) -> SfStatus {
    set_error(format!("{what} is null"));
    SfStatus::SF_ERR_NULL_POINTER
}

/// Message for the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Opaque full-pass schedule.
pub struct SfSchedule {
    inner: ActivationSchedule,
}

/// Builds the adaptive schedule; `alpha = 0` gives the uniform one.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sf_schedule_new(
    n_steps: usize,
    interval: usize,
    warmup: usize,
    alpha: f64,
    out: *mut *mut SfSchedule,
) -> SfStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let params = ScheduleParams {
            n_steps,
            interval,
            warmup,
            alpha,
        };
        match adaptive_schedule(&params) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SfSchedule { inner }));
                SfStatus::SF_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of full passes, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a handle from `sf_schedule_new`.
#[no_mangle]
pub unsafe extern "C" fn sf_schedule_nfe(s: *const SfSchedule) -> usize {
    s.as_ref().map_or(0, |s| nfe(&s.inner))
}

/// Whether the 1-based `step` runs the full denoiser.
///
/// # Safety
/// `s` must be null or a handle from `sf_schedule_new`.
#[no_mangle]
pub unsafe extern "C" fn sf_schedule_is_full_pass(s: *const SfSchedule, step: usize) -> bool {
    s.as_ref().is_some_and(|s| s.inner.is_full_pass(step))
}

/// Copies the ascending full-pass indices into `buf`. `written` receives
/// the NFE even when `buf` is too small.
///
/// # Safety
/// `s` must be a handle from `sf_schedule_new`; `buf` must hold `cap`
/// elements (it may be null when `cap` is 0); `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_schedule_indices(
    s: *const SfSchedule,
    buf: *mut usize,
    cap: usize,
    written: *mut usize,
) -> SfStatus {
    guard(|| {
        let Some(s) = s.as_ref() else { return null("schedule") };
        if written.is_null() {
            return null("written");
        }
        let n = nfe(&s.inner);
        *written = n;
        if cap < n {
            set_error(format!("buffer holds {cap} indices, need {n}"));
            return SfStatus::SF_ERR_BUFFER_TOO_SMALL;
        }
        if buf.is_null() {
            return null("buf");
        }
        for (i, j) in s.inner.full_pass_indices().enumerate() {
            *buf.add(i) = j;
        }
        SfStatus::SF_OK
    })
}

/// # Safety
/// `s` must be null or a handle from `sf_schedule_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sf_schedule_free(s: *mut SfSchedule) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Opaque forecaster with its own feature cache.
pub struct SfForecaster {
    inner: Box<dyn Forecaster>,
}

fn policy(window: usize) -> CachePolicy {
    if window == 0 {
        CachePolicy::All
    } else {
        CachePolicy::Window(window)
    }
}

unsafe fn new_forecaster(cfg: ForecasterConfig, window: usize, out: *mut *mut SfForecaster) -> SfStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        match cfg.build(policy(window)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SfForecaster { inner }));
                SfStatus::SF_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Reuses the newest cached feature. `window = 0` keeps every entry.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sf_forecaster_new_naive(window: usize, out: *mut *mut SfForecaster) -> SfStatus {
    new_forecaster(ForecasterConfig::Naive, window, out)
}

/// Local order-`order` Taylor extrapolation from finite differences.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sf_forecaster_new_taylor(order: usize, window: usize, out: *mut *mut SfForecaster) -> SfStatus {
    new_forecaster(ForecasterConfig::Taylor { order }, window, out)
}

/// Ridge-regularized Chebyshev fit of degree `degree`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sf_forecaster_new_spectrum(
    degree: usize,
    lambda: f64,
    window: usize,
    out: *mut *mut SfForecaster,
) -> SfStatus {
    new_forecaster(ForecasterConfig::Spectrum { degree, lambda }, window, out)
}

/// Caches the feature `h[0..len]` observed at time `t` and refits.
///
/// # Safety
/// `f` must be a live forecaster handle and `h` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_forecaster_observe(f: *mut SfForecaster, t: f64, h: *const f64, len: usize) -> SfStatus {
    guard(|| {
        let Some(f) = f.as_mut() else { return null("forecaster") };
        if h.is_null() {
            return null("h");
        }
        let feature = std::slice::from_raw_parts(h, len).to_vec();
        match f.inner.observe(t, feature) {
            Ok(()) => SfStatus::SF_OK,
            Err(e) => fail(e),
        }
    })
}

/// Writes the predicted feature at time `t` into `out[0..len]`; `len` must
/// equal the cached feature length.
///
/// # Safety
/// `f` must be a live forecaster handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_forecaster_predict(f: *const SfForecaster, t: f64, out: *mut f64, len: usize) -> SfStatus {
    guard(|| {
        let Some(f) = f.as_ref() else { return null("forecaster") };
        if out.is_null() {
            return null("out");
        }
        match f.inner.forecast(t) {
            Ok(v) if v.len() == len => {
                ptr::copy_nonoverlapping(v.as_ptr(), out, len);
                SfStatus::SF_OK
            }
            Ok(v) => {
                set_error(format!("output holds {len} values, feature has {}", v.len()));
                SfStatus::SF_ERR_SHAPE
            }
            Err(e) => fail(e),
        }
    })
}

/// Entries currently cached, or 0 for a null handle.
///
/// # Safety
/// `f` must be null or a live forecaster handle.
#[no_mangle]
pub unsafe extern "C" fn sf_forecaster_cache_len(f: *const SfForecaster) -> usize {
    f.as_ref().map_or(0, |f| f.inner.cache().len())
}

/// Coefficient fits performed so far (always 0 for naive and Taylor).
///
/// # Safety
/// `f` must be null or a live forecaster handle.
#[no_mangle]
pub unsafe extern "C" fn sf_forecaster_fit_count(f: *const SfForecaster) -> usize {
    f.as_ref().map_or(0, |f| f.inner.fit_count())
}

/// # Safety
/// `f` must be null or a forecaster handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sf_forecaster_free(f: *mut SfForecaster) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

unsafe fn write_out(out: *mut f64, value: spectral_forecast::Result<f64>) -> SfStatus {
    if out.is_null() {
        return null("out");
    }
    match value {
        Ok(v) => {
            *out = v;
            SfStatus::SF_OK
        }
        Err(e) => fail(e),
    }
}

/// `T_m(tau)` for `tau` in `[-1, 1]`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_eval_cheb(m: usize, tau: f64, out: *mut f64) -> SfStatus {
    guard(|| write_out(out, ProjectedTime::new(tau).map(|t| eval_cheb(m, t))))
}

/// `2B/(rho - 1) · rho^-degree`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_truncation_bound(rho: f64, b_sup: f64, degree: usize, out: *mut f64) -> SfStatus {
    guard(|| {
        write_out(
            out,
            EllipseBoundParams::new(rho, b_sup).map(|p| truncation_bound(&p, BasisDegree::new(degree))),
        )
    })
}

/// `L/(P+1)! · h^(P+1)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_taylor_worst_case(deriv_bound: f64, order: usize, step: f64, out: *mut f64) -> SfStatus {
    guard(|| write_out(out, TaylorBoundParams::new(deriv_bound, order, step).map(|p| taylor_worst_case(&p))))
}

/// Worst-case Spectrum forecast error; takes no forecast time.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sf_spectrum_bound(
    eps_m: f64,
    degree: usize,
    k_points: usize,
    sigma_min: f64,
    lambda: f64,
    rho: f64,
    b_sup: f64,
    out: *mut f64,
) -> SfStatus {
    guard(|| {
        let params = EllipseBoundParams::new(rho, b_sup)
            .and_then(|e| SpectrumBoundParams::new(eps_m, degree, k_points, sigma_min, lambda, e));
        write_out(out, params.map(|p| spectrum_bound(&p)))
    })
}
