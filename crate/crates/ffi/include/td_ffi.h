#ifndef TD_FFI_H
#define TD_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum TdStatus {
  TD_STATUS_OK = 0,
  TD_STATUS_NULL_POINTER = 1,
  TD_STATUS_INVALID_PARAMETER = 2,
  TD_STATUS_OUT_OF_DOMAIN = 3,
  TD_STATUS_SINGULAR = 4,
  TD_STATUS_NO_CONVERGENCE = 5,
  TD_STATUS_QUADRATURE_FAILURE = 6,
  TD_STATUS_UNBALANCED = 7,
  TD_STATUS_TOO_LARGE = 8,
  TD_STATUS_IO = 9,
  TD_STATUS_OTHER = 10,
  TD_STATUS_PANIC = 11,
} TdStatus;

/**
 * Opaque density instance.
 */
typedef struct TdInstance TdInstance;

typedef struct TdSigmaEval {
  double x1;
  double x2;
  double t;
  double a;
  double sigma;
  double dsigma_dt;
  double dsigma_da;
  double dsigma_dx1;
  double dsigma_dx2;
  double u;
} TdSigmaEval;

typedef struct TdDuality {
  double primal_cost;
  double dual_value;
  double gap;
  double relative_gap;
} TdDuality;

typedef struct TdScaling {
  double fitted_exponent;
  double expected_exponent;
  double r2;
  /**
   * 1 when the fit agrees with the expected exponent, 0 otherwise.
   */
  int32_t consistent;
} TdScaling;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Single-triangle instance. A negative `beta` selects the default amplitude;
 * a non-positive `quad_tol` keeps the default tolerance.
 *
 * # Safety
 * `out` must be a valid pointer; the handle is released with [`td_instance_free`].
 */
enum TdStatus td_instance_new_single(double gamma,
                                     double beta,
                                     double quad_tol,
                                     struct TdInstance **out);

/**
 * Chain of `n_max` triangles.
 *
 * # Safety
 * As for [`td_instance_new_single`].
 */
enum TdStatus td_instance_new_chain(double gamma,
                                    double beta,
                                    double quad_tol,
                                    size_t n_max,
                                    struct TdInstance **out);

/**
 * Smooth variant with cutoffs `eps < eps_prime` and `a0`.
 *
 * # Safety
 * As for [`td_instance_new_single`].
 */
enum TdStatus td_instance_new_smooth(double gamma,
                                     double beta,
                                     double quad_tol,
                                     double eps,
                                     double eps_prime,
                                     double a0,
                                     struct TdInstance **out);

/**
 * # Safety
 * `inst` must come from a constructor above and not be used afterwards. Null is ignored.
 */
void td_instance_free(struct TdInstance *inst);

/**
 * Density amplitude actually used by the instance.
 *
 * # Safety
 * `inst` and `out` must be valid pointers.
 */
enum TdStatus td_instance_beta(const struct TdInstance *inst, double *out);

/**
 * `σ` at ray coordinates `(t, a)`.
 *
 * # Safety
 * `inst` and `out` must be valid pointers.
 */
enum TdStatus td_sigma(const struct TdInstance *inst, double t, double a, double *out);

/**
 * `σ` at a Cartesian point.
 *
 * # Safety
 * `inst` and `out` must be valid pointers.
 */
enum TdStatus td_sigma_at_point(const struct TdInstance *inst, double x1, double x2, double *out);

/**
 * `σ`, its derivatives and `u` at an interior ray coordinate.
 *
 * # Safety
 * `inst` and `out` must be valid pointers.
 */
enum TdStatus td_sigma_eval(const struct TdInstance *inst,
                            double t,
                            double a,
                            struct TdSigmaEval *out);

/**
 * Ray coordinates of a point of the triangle.
 *
 * # Safety
 * All pointers must be valid.
 */
enum TdStatus td_point_to_ray(const struct TdInstance *inst,
                              double x1,
                              double x2,
                              double *out_t,
                              double *out_a);

/**
 * Kantorovich potential `u` at a point, normalised by `u(0,0) = 0`.
 *
 * # Safety
 * `inst` and `out` must be valid pointers.
 */
enum TdStatus td_potential_u(const struct TdInstance *inst, double x1, double x2, double *out);

/**
 * Primal cost of the ray plan against the dual value of `u`.
 *
 * # Safety
 * `inst` and `out` must be valid pointers.
 */
enum TdStatus td_duality_gap(const struct TdInstance *inst, struct TdDuality *out);

/**
 * Log-log fit of `σ(0, ε)` over `n` points in `[eps_min, eps_max]`.
 *
 * # Safety
 * `inst` and `out` must be valid pointers.
 */
enum TdStatus td_holder_fit(const struct TdInstance *inst,
                            double eps_min,
                            double eps_max,
                            size_t n,
                            struct TdScaling *out);

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *td_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *td_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TD_FFI_H */
