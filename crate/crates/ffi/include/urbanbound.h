#ifndef URBANBOUND_H
#define URBANBOUND_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum UbScalingMode {
  UB_SCALING_MODE_UNIT2 = 0,
  UB_SCALING_MODE_UNIT1 = 1,
} UbScalingMode;

typedef enum UbStatus {
  UB_STATUS_OK = 0,
  UB_STATUS_NULL_POINTER = 1,
  UB_STATUS_INVALID_UTF8 = 2,
  UB_STATUS_INPUT_ERROR = 3,
  UB_STATUS_SOLVER_FAILURE = 4,
  UB_STATUS_FIT_ERROR = 5,
  UB_STATUS_OUT_OF_RANGE = 6,
  UB_STATUS_PANIC = 7,
} UbStatus;

/**
 * Opaque per-survey centrality ranking.
 */
typedef struct UbRanking UbRanking;

/**
 * Opaque survey handle.
 */
typedef struct UbSurvey UbSurvey;

/**
 * Log-log OLS result, `log10(T) = intercept + beta * log10(P)`.
 */
typedef struct UbFit {
  double beta;
  double intercept;
  double se_beta;
  double ci_lo;
  double ci_hi;
  double r2;
  double adj_r2;
  size_t n;
} UbFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ub_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ub_version(void);

/**
 * Parses one survey from in-memory CSV text (same formats as the files).
 *
 * # Safety
 * All string arguments must be NUL-terminated; `out` must be writable.
 */
enum UbStatus ub_survey_from_csv(const char *survey_id,
                                 const char *trips_csv,
                                 const char *population_csv,
                                 struct UbSurvey **out);

/**
 * # Safety
 * `survey` must come from [`ub_survey_from_csv`] and not be freed twice.
 */
void ub_survey_free(struct UbSurvey *survey);

/**
 * # Safety
 * `survey` must be a live handle or null.
 */
size_t ub_survey_zone_count(const struct UbSurvey *survey);

/**
 * # Safety
 * `survey` must be a live handle; `out` must be writable.
 */
enum UbStatus ub_survey_totals(const struct UbSurvey *survey, double *population, double *trips);

/**
 * Leading-eigenvector centrality for one survey.
 *
 * # Safety
 * `survey` must be a live handle; `out` must be writable.
 */
enum UbStatus ub_rank(const struct UbSurvey *survey,
                      double tol,
                      size_t max_iter,
                      uint64_t seed,
                      enum UbScalingMode mode,
                      struct UbRanking **out);

/**
 * # Safety
 * `ranking` must come from [`ub_rank`] and not be freed twice.
 */
void ub_ranking_free(struct UbRanking *ranking);

/**
 * # Safety
 * `ranking` must be a live handle or null.
 */
size_t ub_ranking_len(const struct UbRanking *ranking);

/**
 * # Safety
 * `ranking` must be a live handle or null.
 */
double ub_ranking_lambda(const struct UbRanking *ranking);

/**
 * Number of warnings attached to the ranking (degenerate spectrum etc.).
 *
 * # Safety
 * `ranking` must be a live handle or null.
 */
size_t ub_ranking_warning_count(const struct UbRanking *ranking);

/**
 * Copies the scores into `buf`, in zone order. `len` must equal
 * [`ub_ranking_len`].
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum UbStatus ub_ranking_psi(const struct UbRanking *ranking, double *buf, size_t len);

/**
 * Zone id at `index`, as a new string released with [`ub_string_free`].
 *
 * # Safety
 * `ranking` must be a live handle; `out` must be writable.
 */
enum UbStatus ub_ranking_zone_id(const struct UbRanking *ranking, size_t index, char **out);

/**
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void ub_string_free(char *s);

/**
 * Log-log OLS of `trips` against `population` over `n` points.
 *
 * # Safety
 * Both arrays must hold `n` doubles; `out` must be writable.
 */
enum UbStatus ub_loglog_ols(const double *population,
                            const double *trips,
                            size_t n,
                            struct UbFit *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* URBANBOUND_H */
