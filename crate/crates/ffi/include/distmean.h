#ifndef DISTMEAN_H
#define DISTMEAN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DmStatus {
  DM_STATUS_OK = 0,
  DM_STATUS_NULL_POINTER = 1,
  DM_STATUS_INVALID_ARGUMENT = 2,
  DM_STATUS_PROTOCOL_ERROR = 3,
  DM_STATUS_INVALID_DISTRIBUTION = 4,
  DM_STATUS_PANIC = 5,
} DmStatus;

/**
 * Fixed-point scalar codec.
 */
typedef struct DmCodec DmCodec;

/**
 * Finite joint distribution over named axes.
 */
typedef struct DmJoint DmJoint;

/**
 * Outcome of a Monte Carlo risk estimate.
 */
typedef struct DmRunResult DmRunResult;

/**
 * Summary of a run: means of squared error, bits and machines, with the
 * standard error of the squared-error mean.
 */
typedef struct DmRiskSummary {
  double mse;
  double mse_stderr;
  double bits;
  double machines;
  size_t completed_trials;
  size_t failed_trials;
} DmRiskSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *dm_last_error_message(void);

/**
 * Standard normal CDF.
 */
double dm_normal_cdf(double x);

/**
 * Posterior mean and variance of V ~ N(0, delta2) given the sum of `n`
 * draws from N(V, sigma2).
 *
 * # Safety
 * `mean` and `variance` must be valid for writes.
 */
enum DmStatus dm_gaussian_posterior(double delta2,
                                    double sigma2,
                                    size_t n,
                                    double sum,
                                    double *mean,
                                    double *variance);

/**
 * Codec with `2^bits` levels on `[lo, hi]`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum DmStatus dm_codec_new(double lo, double hi, uint32_t bits, struct DmCodec **out);

/**
 * # Safety
 * `codec` must come from [`dm_codec_new`] and `code` be valid for writes.
 */
enum DmStatus dm_codec_encode(const struct DmCodec *codec, double x, uint64_t *code);

/**
 * # Safety
 * `codec` must come from [`dm_codec_new`] and `x` be valid for writes.
 */
enum DmStatus dm_codec_decode(const struct DmCodec *codec, uint64_t code, double *x);

/**
 * # Safety
 * `codec` must come from [`dm_codec_new`] or be null; it is not usable after.
 */
void dm_codec_free(struct DmCodec *codec);

/**
 * Estimates the Bayes risk of a protocol over `trials` independent trials.
 *
 * `protocol_json` and `prior_json` take the same objects as the `protocol`
 * and `prior` fields of a `simulate` spec. The result is written even when
 * the status is `ProtocolError` because too many trials failed; it then
 * describes the completed trials only.
 *
 * # Safety
 * Strings must be NUL-terminated; `out` must be valid for writes.
 */
enum DmStatus dm_estimate_risk(const char *protocol_json,
                               const char *prior_json,
                               size_t d,
                               size_t m,
                               size_t n,
                               double sigma2,
                               size_t trials,
                               uint64_t seed,
                               size_t jobs,
                               struct DmRunResult **out);

/**
 * # Safety
 * `result` must come from [`dm_estimate_risk`]; `out` must be valid for writes.
 */
enum DmStatus dm_run_result_summary(const struct DmRunResult *result, struct DmRiskSummary *out);

/**
 * Squared error of completed trial `index`, in trial order.
 *
 * # Safety
 * `result` must come from [`dm_estimate_risk`]; `out` must be valid for writes.
 */
enum DmStatus dm_run_result_squared_error(const struct DmRunResult *result,
                                          size_t index,
                                          double *out);

/**
 * # Safety
 * `result` must come from [`dm_estimate_risk`] or be null.
 */
void dm_run_result_free(struct DmRunResult *result);

/**
 * Joint distribution with axes of the given sizes; `table` is row-major
 * with the last axis fastest and must sum to 1.
 *
 * # Safety
 * `sizes` holds `rank` entries, `table` holds `len`; `out` must be valid for writes.
 */
enum DmStatus dm_joint_new(const size_t *sizes,
                           size_t rank,
                           const double *table,
                           size_t len,
                           struct DmJoint **out);

/**
 * Entropy in bits of the marginal on `axes`.
 *
 * # Safety
 * `joint` must come from [`dm_joint_new`]; `axes` holds `count` entries.
 */
enum DmStatus dm_joint_entropy(const struct DmJoint *joint,
                               const size_t *axes,
                               size_t count,
                               double *out);

/**
 * I(A;B) in bits between two disjoint axis groups.
 *
 * # Safety
 * `joint` must come from [`dm_joint_new`]; the axis arrays hold their counts.
 */
enum DmStatus dm_joint_mutual_information(const struct DmJoint *joint,
                                          const size_t *a,
                                          size_t a_count,
                                          const size_t *b,
                                          size_t b_count,
                                          double *out);

/**
 * I(A;B|C) in bits between disjoint axis groups.
 *
 * # Safety
 * `joint` must come from [`dm_joint_new`]; the axis arrays hold their counts.
 */
enum DmStatus dm_joint_conditional_mutual_information(const struct DmJoint *joint,
                                                      const size_t *a,
                                                      size_t a_count,
                                                      const size_t *b,
                                                      size_t b_count,
                                                      const size_t *c,
                                                      size_t c_count,
                                                      double *out);

/**
 * # Safety
 * `joint` must come from [`dm_joint_new`] or be null.
 */
void dm_joint_free(struct DmJoint *joint);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DISTMEAN_H */
