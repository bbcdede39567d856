#ifndef PDCONE_H
#define PDCONE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Tolerance on `|x - x*|` (relative to `max(1, max|x_ij|)`) accepted by the
 * matrix constructors before symmetrizing.
 */
#define PD_HERMITIAN_TOL 1e-9

/**
 * Status codes returned by every fallible call.
 */
typedef enum {
  PD_STATUS_OK = 0,
  PD_STATUS_NULL_POINTER = 1,
  PD_STATUS_INVALID_ARGUMENT = 2,
  PD_STATUS_NOT_HERMITIAN = 3,
  PD_STATUS_NOT_POSITIVE_DEFINITE = 4,
  PD_STATUS_DOMAIN = 5,
  PD_STATUS_DIMENSION_MISMATCH = 6,
  PD_STATUS_UNSUPPORTED_EXPONENT = 7,
  PD_STATUS_NOT_LIE_TRIPLE_SYSTEM = 8,
  PD_STATUS_NO_CONVERGENCE = 9,
  PD_STATUS_INTERNAL = 10,
} PdStatus;

/**
 * Hermitian matrix handle.
 */
typedef struct PdHerm PdHerm;

/**
 * Positive-definite matrix handle.
 */
typedef struct PdPosDef PdPosDef;

/**
 * Real subspace of Hermitian matrices with an orthonormal basis.
 */
typedef struct PdSubspace PdSubspace;

/**
 * Summary of a projection onto `exp(H)`.
 */
typedef struct {
  double distance;
  double first_order_residual;
  size_t iterations;
  bool converged;
} PdProjection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *pd_last_error_message(void);

/**
 * # Safety
 * `re` (and `im` unless null) must point to `n * n` doubles.
 */
PdStatus pd_herm_new(size_t n, const double *re, const double *im, PdHerm **out);

/**
 * # Safety
 * `h` must be null or a handle from this library, not yet freed.
 */
void pd_herm_free(PdHerm *h);

/**
 * Dimension `n`, or 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
size_t pd_herm_dim(const PdHerm *h);

/**
 * # Safety
 * `re` (and `im` unless null) must have room for `n * n` doubles.
 */
PdStatus pd_herm_entries(const PdHerm *h, double *re, double *im);

/**
 * # Safety
 * As [`pd_herm_new`].
 */
PdStatus pd_posdef_new(size_t n, const double *re, const double *im, PdPosDef **out);

/**
 * # Safety
 * `a` must be null or a live handle.
 */
void pd_posdef_free(PdPosDef *a);

/**
 * # Safety
 * `a` must be null or a live handle.
 */
size_t pd_posdef_dim(const PdPosDef *a);

/**
 * # Safety
 * As [`pd_herm_entries`].
 */
PdStatus pd_posdef_entries(const PdPosDef *a, double *re, double *im);

/**
 * Geodesic distance `d_p(a, b)`; pass `INFINITY` for `p = inf`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
PdStatus pd_distance(const PdPosDef *a, const PdPosDef *b, double p, double *out);

/**
 * `gamma_{a,b}(t)`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
PdStatus pd_geodesic_point(const PdPosDef *a, const PdPosDef *b, double t, PdPosDef **out);

/**
 * `Exp^a(x)`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
PdStatus pd_exp_a(const PdPosDef *a, const PdHerm *x, PdPosDef **out);

/**
 * `log_a(b)`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
PdStatus pd_log_a(const PdPosDef *a, const PdPosDef *b, PdHerm **out);

/**
 * Orthonormalized span of `count` generators in the `n x n` Hermitian matrices.
 *
 * # Safety
 * `gens` must point to `count` live handles.
 */
PdStatus pd_subspace_new(size_t n, size_t count, const PdHerm *const *gens, PdSubspace **out);

/**
 * Smallest Lie triple system containing the generators.
 *
 * # Safety
 * `gens` must point to `count > 0` live handles.
 */
PdStatus pd_lts_closure(size_t count, const PdHerm *const *gens, PdSubspace **out);

/**
 * # Safety
 * `h` must be null or a live handle.
 */
void pd_subspace_free(PdSubspace *h);

/**
 * Dimension of the subspace, or 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
size_t pd_subspace_dim(const PdSubspace *h);

/**
 * Copy basis element `index` into a new handle.
 *
 * # Safety
 * `h` must be live; `out` must be writable.
 */
PdStatus pd_subspace_basis(const PdSubspace *h, size_t index, PdHerm **out);

/**
 * Whether the subspace is closed under `[x, [y, z]]`, with the worst residual.
 *
 * # Safety
 * `h` must be live; `is_lts` and `residual` must be writable (or null).
 */
PdStatus pd_subspace_is_lts(const PdSubspace *h, bool *is_lts, double *residual);

/**
 * Nearest point of `exp(H)` to `b` in `d_p` for `1 < p < inf`.
 * `max_iter = 0` and `tol <= 0` select the defaults. Unconverged runs
 * return `NoConvergence` but still fill `argmin` and `info`.
 *
 * # Safety
 * Handles must be live; `argmin` and `info` must be writable (`info` may be null).
 */
PdStatus pd_project(const PdPosDef *b,
                    const PdSubspace *h,
                    double p,
                    double tol,
                    size_t max_iter,
                    PdPosDef **argmin,
                    PdProjection *info);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PDCONE_H */
