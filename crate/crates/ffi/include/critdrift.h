#ifndef CRITDRIFT_H
#define CRITDRIFT_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CdStatus {
  CD_STATUS_OK = 0,
  CD_STATUS_NULL_POINTER = 1,
  CD_STATUS_INVALID_ARGUMENT = 2,
  CD_STATUS_DOMAIN = 3,
  CD_STATUS_RESOLUTION = 4,
  CD_STATUS_SMALLNESS_VIOLATED = 5,
  CD_STATUS_NO_CONVERGENCE = 6,
  CD_STATUS_EXCESSIVE_EXCLUSION = 7,
  CD_STATUS_CONFIG = 8,
  CD_STATUS_IO = 9,
  CD_STATUS_NUMERICAL = 10,
  CD_STATUS_PANIC = 11,
} CdStatus;

typedef struct CdDrift CdDrift;

typedef struct CdEnsemble CdEnsemble;

typedef struct CdField CdField;

typedef struct CdSolution CdSolution;

typedef struct CdConstants {
  double c_grad;
  double c_sup;
  double c0;
  double theta;
} CdConstants;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t cd_last_error(char *buf, size_t len);

/**
 * Static, NUL-terminated version string.
 */
const char *cd_version(void);

/**
 * Kernel constants for exponents `(p, q)` in one dimension.
 *
 * # Safety
 * `out` must point to a writable `CdConstants`.
 */
enum CdStatus cd_constants(double p, double q, double horizon, struct CdConstants *out);

/**
 * Builds a scalar field from `n_times * nx` time-major values on the grid
 * `x_min + j h`.
 *
 * # Safety
 * `times` must hold `n_times` values, `values` `n_times * nx`, `out` must
 * be writable.
 */
enum CdStatus cd_field_new(const double *times,
                           size_t n_times,
                           double x_min,
                           double h,
                           size_t nx,
                           double horizon,
                           const double *values,
                           struct CdField **out);

/**
 * # Safety
 * `f` must be null or come from `cd_field_new`, and not be used afterwards.
 */
void cd_field_free(struct CdField *f);

/**
 * `sup_t t^{1/q} ||f(t)||_p` over the grid times.
 *
 * # Safety
 * `f` must be a live field and `out` writable.
 */
enum CdStatus cd_weighted_norm(const struct CdField *f, double p, double q, double *out);

/**
 * Solves the backward heat problem with forcing `f` and optional transport
 * coefficient `g` (null for none), using default solver options.
 *
 * # Safety
 * `f` must be a live field, `g` null or a live field, `out` writable.
 */
enum CdStatus cd_solve_mild(const struct CdField *f,
                            const struct CdField *g,
                            double p,
                            double q,
                            struct CdSolution **out);

/**
 * # Safety
 * `s` must be null or come from `cd_solve_mild`, and not be used afterwards.
 */
void cd_solution_free(struct CdSolution *s);

/**
 * Sup norms of `u` and `du/dx`, Picard iterations and contraction ratio.
 * Any output pointer may be null.
 *
 * # Safety
 * `s` must be a live solution; non-null outputs must be writable.
 */
enum CdStatus cd_solution_summary(const struct CdSolution *s,
                                  double *sup_u,
                                  double *sup_grad,
                                  size_t *iterations,
                                  double *contraction_ratio);

/**
 * Copies the `nx` values of `u` (or of `du/dx` when `gradient` is true) at
 * solver time index `ti`. `*n_times` receives the number of solver times
 * when non-null.
 *
 * # Safety
 * `s` must be a live solution and `buf` hold `len` writable doubles.
 */
enum CdStatus cd_solution_slice(const struct CdSolution *s,
                                size_t ti,
                                bool gradient,
                                double *buf,
                                size_t len,
                                size_t *n_times);

/**
 * Parses a drift from its JSON description.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum CdStatus cd_drift_from_json(const char *json, struct CdDrift **out);

/**
 * # Safety
 * `d` must be null or come from `cd_drift_from_json`.
 */
void cd_drift_free(struct CdDrift *d);

/**
 * Euler-Maruyama paths of `dX = b dt + dW` from `x0` on `[0, horizon]`.
 *
 * # Safety
 * `d` must be a live drift and `out` writable.
 */
enum CdStatus cd_simulate(const struct CdDrift *d,
                          double horizon,
                          double x0,
                          size_t n_paths,
                          size_t n_steps,
                          uint64_t seed,
                          struct CdEnsemble **out);

/**
 * # Safety
 * `e` must be null or come from `cd_simulate`.
 */
void cd_ensemble_free(struct CdEnsemble *e);

/**
 * Terminal states of the retained paths. With `buf` null only `*count` is
 * written; otherwise up to `len` values are copied.
 *
 * # Safety
 * `e` must be a live ensemble, `count` writable, `buf` null or `len` doubles.
 */
enum CdStatus cd_ensemble_terminal(const struct CdEnsemble *e,
                                   double *buf,
                                   size_t len,
                                   size_t *count);

/**
 * Runs an experiment from its JSON config, writing artifacts and the
 * manifest under `out_dir`. `*passed` tells whether every check held.
 *
 * # Safety
 * Both strings must be NUL-terminated; `passed` null or writable.
 */
enum CdStatus cd_run_experiment(const char *config_json, const char *out_dir, bool *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CRITDRIFT_H */
