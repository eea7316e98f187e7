/* Generated by cbindgen from src/lib.rs; do not edit. */

#ifndef MEDBMA_H
#define MEDBMA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MedbmaStatus {
  MEDBMA_STATUS_OK = 0,
  MEDBMA_STATUS_NULL_POINTER = 1,
  MEDBMA_STATUS_INVALID_ARGUMENT = 2,
  MEDBMA_STATUS_IO = 3,
  MEDBMA_STATUS_PARSE = 4,
  MEDBMA_STATUS_NUMERICAL = 5,
  MEDBMA_STATUS_PANIC = 6,
} MedbmaStatus;

/**
 * Subject-level data.
 */
typedef struct MedbmaDataset MedbmaDataset;

/**
 * Posterior draws with their summary.
 */
typedef struct MedbmaPosterior MedbmaPosterior;

/**
 * Options for [`medbma_fit`]; start from [`medbma_fit_options_default`].
 */
typedef struct MedbmaFitOptions {
  size_t chains;
  size_t iterations;
  size_t burn_in;
  size_t thin;
  uint64_t seed;
  /**
   * 0 = AIC rank, 1 = equal, 2 = reversed AIC values.
   */
  uint32_t weighting;
  double coef_sd;
  size_t anneal_evaluations;
} MedbmaFitOptions;

typedef struct MedbmaParameterSummary {
  double mean;
  double sd;
  double hpd_lower;
  double hpd_upper;
  double rhat;
} MedbmaParameterSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *medbma_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *medbma_version(void);

/**
 * Loads a subject CSV (`arm,covariate,response,time,event`).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MedbmaStatus medbma_dataset_load(const char *path_, struct MedbmaDataset **out);

/**
 * Builds a dataset from `n` parallel columns.
 *
 * # Safety
 * Each array must hold `n` elements; `out` must be valid.
 */
enum MedbmaStatus medbma_dataset_from_columns(size_t n,
                                              const uint8_t *arm,
                                              const double *covariate,
                                              const uint8_t *response,
                                              const double *time,
                                              const uint8_t *event,
                                              struct MedbmaDataset **out);

/**
 * Synthetic trial from scenario 1–4 with `n` (even) subjects.
 *
 * # Safety
 * `out` must be valid.
 */
enum MedbmaStatus medbma_dataset_simulate(uint32_t scenario,
                                          size_t n,
                                          uint64_t seed,
                                          struct MedbmaDataset **out);

/**
 * Number of subjects; 0 for NULL.
 *
 * # Safety
 * `dataset` must be NULL or a live handle.
 */
size_t medbma_dataset_len(const struct MedbmaDataset *dataset);

/**
 * # Safety
 * `dataset` must be NULL or a handle not yet freed.
 */
void medbma_dataset_free(struct MedbmaDataset *dataset);

struct MedbmaFitOptions medbma_fit_options_default(void);

/**
 * Calibrates the model prior and samples the posterior.
 *
 * # Safety
 * `dataset` and `options` must be valid; `out` must be valid.
 */
enum MedbmaStatus medbma_fit(const struct MedbmaDataset *dataset,
                             const struct MedbmaFitOptions *options,
                             struct MedbmaPosterior **out);

/**
 * Reads draws written by [`medbma_posterior_save`] or the CLI.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid.
 */
enum MedbmaStatus medbma_posterior_load(const char *path_, struct MedbmaPosterior **out);

/**
 * # Safety
 * `post` must be a live handle and `path` a NUL-terminated string.
 */
enum MedbmaStatus medbma_posterior_save(const struct MedbmaPosterior *post, const char *path_);

/**
 * Number of retained draws; 0 for NULL.
 *
 * # Safety
 * `post` must be NULL or a live handle.
 */
size_t medbma_posterior_len(const struct MedbmaPosterior *post);

/**
 * Posterior probability of model `index` (1-based) in family `'R'` or
 * `'S'`.
 *
 * # Safety
 * `post` must be a live handle and `out` valid.
 */
enum MedbmaStatus medbma_posterior_model_probability(const struct MedbmaPosterior *post,
                                                     char family,
                                                     size_t index,
                                                     double *out);

/**
 * Summary of parameter `index` in the order beta0..beta3, gamma1..gamma6,
 * nu, lambda.
 *
 * # Safety
 * `post` must be a live handle and `out` valid.
 */
enum MedbmaStatus medbma_posterior_parameter(const struct MedbmaPosterior *post,
                                             size_t index,
                                             struct MedbmaParameterSummary *out);

/**
 * # Safety
 * `post` must be NULL or a handle not yet freed.
 */
void medbma_posterior_free(struct MedbmaPosterior *post);

/**
 * Posterior mean log risk ratios (total, direct, mediated) and the median
 * mediation proportion at each of `n_times` times. Uses at most
 * `max_draws` draws (0 = all).
 *
 * # Safety
 * `times` and the four outputs must each hold `n_times` elements.
 */
enum MedbmaStatus medbma_risk_ratio(const struct MedbmaPosterior *post,
                                    const struct MedbmaDataset *dataset,
                                    const double *times,
                                    size_t n_times,
                                    size_t max_draws,
                                    double *total,
                                    double *direct,
                                    double *mediated,
                                    double *proportion);

/**
 * Predictive power for a frame of `n` subjects. `mode` 0 predicts a
 * future study alone; 1 completes `observed` (required then) with the
 * frame.
 *
 * # Safety
 * `arm` and `covariate` must hold `n` elements; `observed` may be NULL
 * in mode 0; `out` must be valid.
 */
enum MedbmaStatus medbma_predictive_power(const struct MedbmaPosterior *post,
                                          size_t n,
                                          const uint8_t *arm,
                                          const double *covariate,
                                          uint32_t mode,
                                          double alpha,
                                          double landmark,
                                          const struct MedbmaDataset *observed,
                                          size_t max_draws,
                                          uint64_t seed,
                                          double *out);

/**
 * Inclusion probabilities for family `'R'` (3 terms, 5 targets) or `'S'`
 * (6 terms, 18 targets) whose model prior is closest to proportional to
 * `targets`.
 *
 * # Safety
 * `targets` must hold `n_targets` elements, `psi` room for the family's
 * term count, and `residual` may be NULL.
 */
enum MedbmaStatus medbma_calibrate_psi(char family,
                                       const double *targets,
                                       size_t n_targets,
                                       size_t evaluations,
                                       uint64_t seed,
                                       double *psi,
                                       double *residual);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MEDBMA_H */
