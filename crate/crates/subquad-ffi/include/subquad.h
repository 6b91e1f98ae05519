#ifndef SUBQUAD_H
#define SUBQUAD_H

/* Generated by cbindgen from the subquad-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code for every fallible call in this interface.
 */
typedef enum SqStatus {
  SqStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  SqStatus_NullPointer = 1,
  /**
   * An argument violated a documented precondition.
   */
  SqStatus_InvalidArgument = 2,
  /**
   * The requested quantity does not exist (e.g. a Huber derivative at the
   * kink, or the Hessian of V_{k,p} at theta* for p in (0,2)).
   */
  SqStatus_Undefined = 3,
  /**
   * An intermediate exponential overflowed.
   */
  SqStatus_Overflow = 4,
  /**
   * An input sample was empty.
   */
  SqStatus_EmptySample = 5,
  /**
   * An unexpected internal failure; the message has details.
   */
  SqStatus_Internal = 6,
} SqStatus;

/**
 * Opaque handle for a robust loss function.
 */
typedef struct SqLoss SqLoss;

/**
 * Opaque handle for a piecewise Lyapunov function V_{k,p}.
 */
typedef struct SqLyapunov SqLyapunov;

/**
 * Message for the most recent non-Ok status on this thread, or null when the
 * last call succeeded. The pointer stays valid until the next ffi call on
 * the same thread.
 */
const char *sq_last_error_message(void);

/**
 * Crate version as a static nul-terminated string.
 */
const char *sq_version(void);

/**
 * Huber loss with threshold `delta` (> 0).
 */
enum SqStatus sq_loss_new_huber(double delta, struct SqLoss **out);

/**
 * Pseudo-Huber loss with scale `delta` (> 0).
 */
enum SqStatus sq_loss_new_pseudo_huber(double delta, struct SqLoss **out);

/**
 * log-cosh loss.
 */
enum SqStatus sq_loss_new_log_cosh(struct SqLoss **out);

/**
 * Generalized Charbonnier loss, `alpha` in [1,2), `c` > 0.
 */
enum SqStatus sq_loss_new_gen_charbonnier(double alpha, double c, struct SqLoss **out);

/**
 * Barron loss, `alpha` in [1,2), `c` > 0.
 */
enum SqStatus sq_loss_new_barron(double alpha, double c, struct SqLoss **out);

/**
 * Releases a loss handle; a null handle is a no-op.
 */
void sq_loss_free(struct SqLoss *loss);

/**
 * l(t).
 */
enum SqStatus sq_loss_value(const struct SqLoss *loss, double t, double *out);

/**
 * Derivative of order 1, 2 or 3 at t. Undefined at a Huber kink.
 */
enum SqStatus sq_loss_deriv(const struct SqLoss *loss, double t, uint32_t order, double *out);

/**
 * Builds V_{k,p} with tail exponent `k` in [1,2), window `delta` > 0, power
 * `p` >= 0 and center `theta_star` of length `dim` >= 1.
 */
enum SqStatus sq_lyapunov_new(double k,
                              double delta,
                              double p,
                              const double *theta_star,
                              uintptr_t dim,
                              struct SqLyapunov **out);

/**
 * Releases a Lyapunov handle; a null handle is a no-op.
 */
void sq_lyapunov_free(struct SqLyapunov *spec);

/**
 * V_{k,p}(theta); `theta` must have the handle's dimension.
 */
enum SqStatus sq_lyapunov_value(const struct SqLyapunov *spec, const double *theta, double *out);

/**
 * Gradient of V_{k,p}; `out_grad` must hold the handle's dimension.
 */
enum SqStatus sq_lyapunov_grad(const struct SqLyapunov *spec,
                               const double *theta,
                               double *out_grad);

/**
 * Hessian operator norm of V_{k,p} with its two analytic envelopes. Any out
 * pointer may be null to skip that value.
 */
enum SqStatus sq_lyapunov_hess_bound(const struct SqLyapunov *spec,
                                     const double *theta,
                                     double *out_norm,
                                     double *out_envelope_a,
                                     double *out_envelope_b);

/**
 * Wasserstein-1 distance between two one-dimensional empirical measures.
 */
enum SqStatus sq_wasserstein1(const double *samples_a,
                              uintptr_t len_a,
                              const double *samples_b,
                              uintptr_t len_b,
                              double *out);

/**
 * Log-log slope of `values` against `ns` after a sliding-median smoothing
 * with an odd `window`, fitted over n in [fit_lo, fit_hi]. `out_intercept`
 * and `out_residual_rms` may be null.
 */
enum SqStatus sq_loglog_slope(const double *ns,
                              const double *values,
                              uintptr_t len,
                              uintptr_t window,
                              double fit_lo,
                              double fit_hi,
                              double *out_slope,
                              double *out_intercept,
                              double *out_residual_rms);

#endif  /* SUBQUAD_H */
