#ifndef WEAKLIMIT_H
#define WEAKLIMIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WlStatus {
  WL_STATUS_OK = 0,
  WL_STATUS_NULL_POINTER = 1,
  WL_STATUS_INVALID_INPUT = 2,
  WL_STATUS_NOT_HERMITIAN = 3,
  WL_STATUS_DIMENSION_MISMATCH = 4,
  WL_STATUS_GRID_TOO_NARROW = 5,
  /**
   * Vanishing probability or overlap, or no valid selection.
   */
  WL_STATUS_NUMERICAL = 6,
  /**
   * Singular or inconsistent linear algebra.
   */
  WL_STATUS_SINGULAR = 7,
  WL_STATUS_BUFFER_TOO_SMALL = 8,
  WL_STATUS_PANIC = 9,
} WlStatus;

typedef enum WlFamily {
  WL_FAMILY_GAUSSIAN = 0,
  WL_FAMILY_LORENTZIAN = 1,
  WL_FAMILY_EXPONENTIAL = 2,
} WlFamily;

/**
 * Hermitian operator on a finite space.
 */
typedef struct WlOperator WlOperator;

/**
 * Outcome of a limit computation.
 */
typedef struct WlResult WlResult;

/**
 * Normalized pure detector state.
 */
typedef struct WlState WlState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *wl_version(void);

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *wl_last_error(void);

/**
 * Operator from a row-major `dim × dim` matrix.
 *
 * # Safety
 * `re` must hold `dim * dim` values, and so must `im` unless it is null.
 */
enum WlStatus wl_operator_new(size_t dim,
                              const double *re,
                              const double *im,
                              struct WlOperator **out);

/**
 * Diagonal operator with the given real eigenvalues.
 *
 * # Safety
 * `values` must hold `dim` entries.
 */
enum WlStatus wl_operator_diagonal(size_t dim, const double *values, struct WlOperator **out);

/**
 * Position operator on a grid of `n_points` over `[-half_width, half_width)`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum WlStatus wl_operator_position(size_t n_points, double half_width, struct WlOperator **out);

/**
 * Momentum operator on the same grid convention as [`wl_operator_position`].
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum WlStatus wl_operator_momentum(size_t n_points, double half_width, struct WlOperator **out);

/**
 * # Safety
 * `op` must be null or a handle from this library.
 */
size_t wl_operator_dim(const struct WlOperator *op);

/**
 * # Safety
 * `op` must be null or a handle from this library not freed before.
 */
void wl_operator_free(struct WlOperator *op);

/**
 * State from `dim` amplitudes; with `normalize` zero the input must already
 * have unit norm.
 *
 * # Safety
 * `re` must hold `dim` values, and so must `im` unless it is null.
 */
enum WlStatus wl_state_new(size_t dim,
                           const double *re,
                           const double *im,
                           bool normalize,
                           struct WlState **out);

/**
 * Sampled detector profile of the given family and width.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum WlStatus wl_state_family(enum WlFamily family,
                              double width,
                              size_t n_points,
                              double half_width,
                              struct WlState **out);

/**
 * # Safety
 * `state` must be null or a handle from this library.
 */
size_t wl_state_dim(const struct WlState *state);

/**
 * # Safety
 * `state` must be null or a handle from this library not freed before.
 */
void wl_state_free(struct WlState *state);

/**
 * Weak-coupling limit: the span generated by `Υ, ΩΥ, ..., Ω^(r-1)Υ` where
 * `r` is the number of distinct eigenvalues of `system`.
 *
 * # Safety
 * All handles must come from this library and `out` must be valid.
 */
enum WlStatus wl_limit_small_g(const struct WlOperator *system,
                               const struct WlOperator *omega,
                               const struct WlOperator *pointer,
                               const struct WlState *state,
                               double rank_tol,
                               struct WlResult **out);

/**
 * Limit at coupling `g` from the kicked detector states.
 *
 * # Safety
 * All handles must come from this library and `out` must be valid.
 */
enum WlStatus wl_limit_finite_g(const struct WlOperator *system,
                                const struct WlOperator *omega,
                                const struct WlOperator *pointer,
                                const struct WlState *state,
                                double g,
                                double rank_tol,
                                struct WlResult **out);

/**
 * `|⟨ΔM⟩|max`, or NaN for a null handle.
 *
 * # Safety
 * `res` must be null or a handle from this library.
 */
double wl_result_limit(const struct WlResult *res);

/**
 * Signed extremum attaining the limit, or NaN for a null handle.
 *
 * # Safety
 * `res` must be null or a handle from this library.
 */
double wl_result_extremum(const struct WlResult *res);

/**
 * # Safety
 * `res` must be null or a handle from this library.
 */
size_t wl_result_rank(const struct WlResult *res);

/**
 * # Safety
 * `res` must be null or a handle from this library.
 */
double wl_result_whiten_condition(const struct WlResult *res);

/**
 * All extremal shifts in ascending order. With a null `buf` only `len` is
 * written.
 *
 * # Safety
 * `buf` must be null or hold `cap` values; `len` may be null.
 */
enum WlStatus wl_result_extrema(const struct WlResult *res, double *buf, size_t cap, size_t *len);

/**
 * Extremal coefficients in the generating columns, split into real and
 * imaginary parts. With null buffers only `len` is written.
 *
 * # Safety
 * `re` and `im` must both be null or both hold `cap` values; `len` may be
 * null.
 */
enum WlStatus wl_result_mu(const struct WlResult *res,
                           double *re,
                           double *im,
                           size_t cap,
                           size_t *len);

/**
 * # Safety
 * `res` must be null or a handle from this library not freed before.
 */
void wl_result_free(struct WlResult *res);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WEAKLIMIT_H */
