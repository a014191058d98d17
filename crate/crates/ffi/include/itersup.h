#ifndef ITERSUP_H
#define ITERSUP_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ItersupStatus {
  ITERSUP_STATUS_OK = 0,
  ITERSUP_STATUS_NULL_POINTER = 1,
  ITERSUP_STATUS_DOMAIN = 2,
  ITERSUP_STATUS_MISSING_PICKANDS = 3,
  ITERSUP_STATUS_NOT_POSITIVE_DEFINITE = 4,
  ITERSUP_STATUS_INSUFFICIENT_DATA = 5,
  ITERSUP_STATUS_UNSUPPORTED = 6,
  ITERSUP_STATUS_CONFIG = 7,
  ITERSUP_STATUS_OUT_OF_RANGE = 8,
  ITERSUP_STATUS_PANIC = 9,
  ITERSUP_STATUS_OTHER = 10,
} ItersupStatus;

/**
 * A process usable as either side of `X(Y(s))`.
 */
typedef struct ItersupProcess ItersupProcess;

/**
 * Tail probabilities at a set of thresholds.
 */
typedef struct ItersupTailEstimate ItersupTailEstimate;

/**
 * `P(T > u) ~ C u^gamma exp(-beta u^alpha)`.
 */
typedef struct ItersupTail {
  double alpha;
  double beta;
  double gamma;
  double big_c;
} ItersupTail;

typedef struct ItersupBetaFit {
  double beta_hat;
  double std_err;
  double ci_lo;
  double ci_hi;
  /**
   * `NaN` when `C` was held fixed.
   */
  double big_c_hat;
  size_t n_points;
} ItersupBetaFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library on this thread.
 */
const char *itersup_last_error(void);

/**
 * Library version, a static string.
 */
const char *itersup_version(void);

/**
 * `P(N > u)` for a standard normal `N`.
 */
double itersup_normal_upper_tail(double u);

enum ItersupStatus itersup_tail_eval(const struct ItersupTail *tail, double u, double *out);

/**
 * Tail of `sup_{[0,1]} B_h`; `pickands` is needed for `h < 1/2`.
 */
enum ItersupStatus itersup_fbm_sup_unit_interval(double h,
                                                 double pickands,
                                                 struct ItersupTail *out);

/**
 * Tail of `sup_{[0,T]} B_{h2}(B_{h1}(s))`.
 */
enum ItersupStatus itersup_iterated_fbm_sup(double h1,
                                            double h2,
                                            double big_t,
                                            double pickands_h1,
                                            double pickands_h2,
                                            struct ItersupTail *out);

/**
 * Randomized supremum of a process with variance `big_d t^alpha_inf`.
 */
enum ItersupStatus itersup_randomized_sup_transform(const struct ItersupTail *tail,
                                                    double big_d,
                                                    double alpha_inf,
                                                    bool strict,
                                                    struct ItersupTail *out);

/**
 * Pickands constant `H_alpha`. With `estimate` false a known closed form
 * is returned (`std_err` 0); otherwise it is simulated.
 */
enum ItersupStatus itersup_pickands(double alpha,
                                    bool estimate,
                                    double horizon,
                                    uint64_t n_reps,
                                    double mesh,
                                    uint64_t seed,
                                    double *value,
                                    double *std_err);

/**
 * fBm with Hurst index `hurst`; NULL on invalid input.
 */
struct ItersupProcess *itersup_process_fbm(double hurst);

/**
 * Stationary increments with variance `big_d t^alpha_inf`.
 */
struct ItersupProcess *itersup_process_power_variance(double big_d, double alpha_inf);

/**
 * Stationary with correlation `exp(-c |t|^alpha)`.
 */
struct ItersupProcess *itersup_process_power_exponential(double c, double alpha);

/**
 * The deterministic path `slope * t`.
 */
struct ItersupProcess *itersup_process_linear(double slope);

void itersup_process_free(struct ItersupProcess *p);

/**
 * Crude Monte Carlo estimate of `P(sup_{[0,horizon]} X(Y(s)) > u)` at the
 * `n_thresholds` ascending thresholds. Results do not depend on the
 * number of threads.
 */
enum ItersupStatus itersup_estimate_tail(const struct ItersupProcess *x,
                                         const struct ItersupProcess *y,
                                         double horizon,
                                         const double *thresholds,
                                         size_t n_thresholds,
                                         uint64_t n_reps,
                                         double mesh,
                                         uint64_t seed,
                                         struct ItersupTailEstimate **out);

size_t itersup_tail_estimate_len(const struct ItersupTailEstimate *est);

/**
 * Row `i`: threshold, estimate and standard error. Any output pointer may
 * be NULL.
 */
enum ItersupStatus itersup_tail_estimate_get(const struct ItersupTailEstimate *est,
                                             size_t i,
                                             double *u,
                                             double *p_hat,
                                             double *std_err);

void itersup_tail_estimate_free(struct ItersupTailEstimate *est);

/**
 * Fits `beta` with `alpha` and `gamma` fixed; `big_c` fixed unless NaN.
 */
enum ItersupStatus itersup_fit_beta(const struct ItersupTailEstimate *est,
                                    double alpha,
                                    double gamma,
                                    double big_c,
                                    struct ItersupBetaFit *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ITERSUP_H */
