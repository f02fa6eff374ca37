#ifndef SPECTRAL_FORECAST_H
#define SPECTRAL_FORECAST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Status codes returned by every fallible function.
 */
typedef enum SfStatus {
  SF_OK = 0,
  SF_ERR_NULL_POINTER = 1,
  SF_ERR_INVALID_ARGUMENT = 2,
  SF_ERR_SHAPE = 3,
  /*
   Forecast requested before the cache can support it.
   */
  SF_ERR_NOT_READY = 4,
  SF_ERR_NUMERIC = 5,
  SF_ERR_BUFFER_TOO_SMALL = 6,
  SF_ERR_PANIC = 7,
} SfStatus;

/*
 Opaque forecaster with its own feature cache.
 */
typedef struct SfForecaster SfForecaster;

/*
 Opaque full-pass schedule.
 */
typedef struct SfSchedule SfSchedule;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failure on this thread; empty if none. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *sf_last_error(void);

/*
 Builds the adaptive schedule; `alpha = 0` gives the uniform one.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum SfStatus sf_schedule_new(uintptr_t n_steps,
                              uintptr_t interval,
                              uintptr_t warmup,
                              double alpha,
                              struct SfSchedule **out);

/*
 Number of full passes, or 0 for a null handle.

 # Safety
 `s` must be null or a handle from `sf_schedule_new`.
 */
uintptr_t sf_schedule_nfe(const struct SfSchedule *s);

/*
 Whether the 1-based `step` runs the full denoiser.

 # Safety
 `s` must be null or a handle from `sf_schedule_new`.
 */
bool sf_schedule_is_full_pass(const struct SfSchedule *s, uintptr_t step);

/*
 Copies the ascending full-pass indices into `buf`. `written` receives
 the NFE even when `buf` is too small.

 # Safety
 `s` must be a handle from `sf_schedule_new`; `buf` must hold `cap`
 elements (it may be null when `cap` is 0); `written` must be writable.
 */
enum SfStatus sf_schedule_indices(const struct SfSchedule *s,
                                  uintptr_t *buf,
                                  uintptr_t cap,
                                  uintptr_t *written);

/*
 # Safety
 `s` must be null or a handle from `sf_schedule_new` not yet freed.
 */
void sf_schedule_free(struct SfSchedule *s);

/*
 Reuses the newest cached feature. `window = 0` keeps every entry.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum SfStatus sf_forecaster_new_naive(uintptr_t window, struct SfForecaster **out);

/*
 Local order-`order` Taylor extrapolation from finite differences.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum SfStatus sf_forecaster_new_taylor(uintptr_t order,
                                       uintptr_t window,
                                       struct SfForecaster **out);

/*
 Ridge-regularized Chebyshev fit of degree `degree`.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum SfStatus sf_forecaster_new_spectrum(uintptr_t degree,
                                         double lambda,
                                         uintptr_t window,
                                         struct SfForecaster **out);

/*
 Caches the feature `h[0..len]` observed at time `t` and refits.

 # Safety
 `f` must be a live forecaster handle and `h` must point to `len` doubles.
 */
enum SfStatus sf_forecaster_observe(struct SfForecaster *f,
                                    double t,
                                    const double *h,
                                    uintptr_t len);

/*
 Writes the predicted feature at time `t` into `out[0..len]`; `len` must
 equal the cached feature length.

 # Safety
 `f` must be a live forecaster handle and `out` must hold `len` doubles.
 */
enum SfStatus sf_forecaster_predict(const struct SfForecaster *f,
                                    double t,
                                    double *out,
                                    uintptr_t len);

/*
 Entries currently cached, or 0 for a null handle.

 # Safety
 `f` must be null or a live forecaster handle.
 */
uintptr_t sf_forecaster_cache_len(const struct SfForecaster *f);

/*
 Coefficient fits performed so far (always 0 for naive and Taylor).

 # Safety
 `f` must be null or a live forecaster handle.
 */
uintptr_t sf_forecaster_fit_count(const struct SfForecaster *f);

/*
 # Safety
 `f` must be null or a forecaster handle not yet freed.
 */
void sf_forecaster_free(struct SfForecaster *f);

/*
 `T_m(tau)` for `tau` in `[-1, 1]`.

 # Safety
 `out` must be writable.
 */
enum SfStatus sf_eval_cheb(uintptr_t m, double tau, double *out);

/*
 `2B/(rho - 1) · rho^-degree`.

 # Safety
 `out` must be writable.
 */
enum SfStatus sf_truncation_bound(double rho, double b_sup, uintptr_t degree, double *out);

/*
 `L/(P+1)! · h^(P+1)`.

 # Safety
 `out` must be writable.
 */
enum SfStatus sf_taylor_worst_case(double deriv_bound, uintptr_t order, double step, double *out);

/*
 Worst-case Spectrum forecast error; takes no forecast time.

 # Safety
 `out` must be writable.
 */
enum SfStatus sf_spectrum_bound(double eps_m,
                                uintptr_t degree,
                                uintptr_t k_points,
                                double sigma_min,
                                double lambda,
                                double rho,
                                double b_sup,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECTRAL_FORECAST_H */
