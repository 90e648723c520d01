#ifndef MOMENT_SPLIT_H
#define MOMENT_SPLIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. `Ok` is zero; the grouping of errors follows the exit codes
 * of the command-line tool.
 */
typedef enum MsStatus {
  MS_STATUS_OK = 0,
  /**
   * The interior-point solver did not converge.
   */
  MS_STATUS_SOLVER_FAILURE = 1,
  /**
   * Malformed input: arguments, measure specs, moment files.
   */
  MS_STATUS_INVALID_INPUT = 2,
  /**
   * Moments of too low a degree, or of the wrong dimension.
   */
  MS_STATUS_DEGREE_MISMATCH = 3,
  /**
   * A required pointer argument was null.
   */
  MS_STATUS_NULL_POINTER = 4,
  /**
   * The output buffer is shorter than the data; the required length was
   * still written.
   */
  MS_STATUS_BUFFER_TOO_SMALL = 5,
  /**
   * No finitely atomic structure was found.
   */
  MS_STATUS_EXTRACTION_FAILED = 6,
  /**
   * A panic inside the library.
   */
  MS_STATUS_INTERNAL = 7,
} MsStatus;

/**
 * A truncated moment sequence.
 */
typedef struct MsMoments MsMoments;

/**
 * The result of a decomposition.
 */
typedef struct MsSolution MsSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ms_last_error(void);

/**
 * Static name of a status code.
 */
const char *ms_status_name(enum MsStatus status);

/**
 * Exact moments up to `degree` of the measure described by `spec`
 * (e.g. `"uniform:0:1"`, `"mix:0.5=dirac:0.4,0.5=dirac:0.5"`).
 *
 * # Safety
 * `spec` must be a nul-terminated string and `out` a valid pointer.
 */
enum MsStatus ms_moments_from_spec(const char *spec, size_t degree, struct MsMoments **out);

/**
 * Moments of dimension `dim` up to `degree` from values in graded
 * lexicographic order of the exponents.
 *
 * # Safety
 * `values` must point to `len` doubles and `out` must be valid.
 */
enum MsStatus ms_moments_from_values(size_t dim,
                                     size_t degree,
                                     const double *values,
                                     size_t len,
                                     struct MsMoments **out);

/**
 * Parses a moment file held in memory.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum MsStatus ms_moments_from_json(const char *json, struct MsMoments **out);

/**
 * The canonical moment-file text of `moments`; release it with
 * [`ms_string_free`].
 *
 * # Safety
 * `moments` must be a live handle and `out` a valid pointer.
 */
enum MsStatus ms_moments_to_json(const struct MsMoments *moments, char **out);

/**
 * # Safety
 * `moments` must be a live handle.
 */
size_t ms_moments_dim(const struct MsMoments *moments);

/**
 * # Safety
 * `moments` must be a live handle.
 */
size_t ms_moments_degree(const struct MsMoments *moments);

/**
 * Copies the values (graded lexicographic order) into `buf`.
 *
 * # Safety
 * `moments` must be a live handle; `buf` null or writable for `buf_len`
 * doubles; `len_out` null or valid.
 */
enum MsStatus ms_moments_values(const struct MsMoments *moments,
                                double *buf,
                                size_t buf_len,
                                size_t *len_out);

/**
 * # Safety
 * `moments` must be null or a handle not yet freed.
 */
void ms_moments_free(struct MsMoments *moments);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void ms_string_free(char *s);

/**
 * Splits `mu` into a part bounded by `gamma · lambda` and a remainder with
 * the relaxation of the given order. Nonzero `normalize` rescales `mu` to
 * unit mass first; nonzero `condition` solves in the `lambda`-orthonormal
 * basis.
 *
 * # Safety
 * `mu` and `lambda` must be live handles and `out` a valid pointer.
 */
enum MsStatus ms_decompose(const struct MsMoments *mu,
                           const struct MsMoments *lambda,
                           double gamma,
                           size_t order,
                           int normalize,
                           int condition,
                           struct MsSolution **out);

/**
 * Optimal value `y₀` of the relaxation; NaN for a null handle.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
double ms_solution_rho(const struct MsSolution *solution);

/**
 * Value of the dual certificate.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
double ms_solution_dual_value(const struct MsSolution *solution);

/**
 * # Safety
 * `solution` must be null or a live handle.
 */
size_t ms_solution_iterations(const struct MsSolution *solution);

/**
 * New handle holding the moments of the absolutely continuous part.
 *
 * # Safety
 * `solution` must be a live handle and `out` a valid pointer.
 */
enum MsStatus ms_solution_absolutely_continuous(const struct MsSolution *solution,
                                                struct MsMoments **out);

/**
 * New handle holding the moments of the singular remainder.
 *
 * # Safety
 * `solution` must be a live handle and `out` a valid pointer.
 */
enum MsStatus ms_solution_singular(const struct MsSolution *solution, struct MsMoments **out);

/**
 * # Safety
 * `solution` must be null or a handle not yet freed.
 */
void ms_solution_free(struct MsSolution *solution);

/**
 * Looks for a finitely atomic measure behind `moments` (using moment
 * matrices up to `order`) and writes its atoms: `count_out` points, their
 * coordinates row by row into `points` (`count · dim` values) and their
 * weights into `weights`. With null buffers only the count is reported.
 * `rank_p` of zero selects the default threshold exponent.
 *
 * # Safety
 * `moments` must be a live handle; buffers null or writable for the given
 * lengths; `count_out` null or valid.
 */
enum MsStatus ms_extract_atoms(const struct MsMoments *moments,
                               size_t order,
                               uint32_t rank_p,
                               uint64_t seed,
                               double *points,
                               size_t points_len,
                               double *weights,
                               size_t weights_len,
                               size_t *count_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOMENT_SPLIT_H */
