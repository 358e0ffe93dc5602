#ifndef RELOPT_H
#define RELOPT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Values accepted by `ro_levelize_annual`.
 */
typedef enum RoLevelizeMode {
  RO_LEVELIZE_MODE_START_OF_YEAR = 0,
  RO_LEVELIZE_MODE_CONTINUOUS = 1,
} RoLevelizeMode;

/**
 * Status code returned by every function.
 */
typedef enum RoStatus {
  RO_STATUS_OK = 0,
  RO_STATUS_NULL_POINTER = 1,
  RO_STATUS_INVALID_UTF8 = 2,
  RO_STATUS_INVALID_ARGUMENT = 3,
  RO_STATUS_PARSE_ERROR = 4,
  RO_STATUS_COMPUTATION_ERROR = 5,
  RO_STATUS_PANIC = 6,
} RoStatus;

/**
 * Opaque calibrated model.
 */
typedef struct RoModel RoModel;

/**
 * Contract terms; times in years, strike in currency/MWh.
 */
typedef struct RoContractTerms {
  double t;
  double tau;
  double dt;
  double k;
  double r;
  double q;
} RoContractTerms;

/**
 * Monte Carlo premium per MW (scaled by `q`).
 */
typedef struct RoPremium {
  double premium;
  double std_error;
  uint64_t n_paths;
  uint64_t seed;
} RoPremium;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next failing call on the same thread; do not free.
 */
const char *ro_last_error(void);

/**
 * Builds a model from its JSON form. Free with `ro_model_free`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RoStatus ro_model_from_json(const char *json, struct RoModel **out);

/**
 * Releases a model; null is ignored.
 *
 * # Safety
 * `model` must come from `ro_model_from_json` and not be freed twice.
 */
void ro_model_free(struct RoModel *model);

/**
 * Number of regimes (1 for single-regime models).
 *
 * # Safety
 * `model` and `out` must be valid pointers.
 */
enum RoStatus ro_model_regimes(const struct RoModel *model, uint32_t *out);

/**
 * Monte Carlo premium. `r0 < 0` means no initial regime (single-regime
 * models); regime-switching models need `r0 >= 0`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum RoStatus ro_premium(const struct RoModel *model,
                         double s0,
                         int32_t r0,
                         const struct RoContractTerms *terms,
                         uint64_t n_paths,
                         uint64_t seed,
                         struct RoPremium *out);

/**
 * Closed-form strip value for a single-regime OU process.
 *
 * # Safety
 * Pointers must be valid.
 */
enum RoStatus ro_ou_strip_closed_form(double kappa,
                                      double theta,
                                      double sigma,
                                      double s0,
                                      const struct RoContractTerms *terms,
                                      double *out);

/**
 * Empirical `alpha` quantile of `n` values.
 *
 * # Safety
 * `xs` must point to `n` readable doubles; `out` must be valid.
 */
enum RoStatus ro_quantile(const double *xs, size_t n, double alpha, double *out);

/**
 * Empirical CVaR at level `alpha`.
 *
 * # Safety
 * `xs` must point to `n` readable doubles; `out` must be valid.
 */
enum RoStatus ro_cvar(const double *xs, size_t n, double alpha, double *out);

/**
 * Constant annual payment with the same present value as `premium`.
 * `mode` is one of the `RoLevelizeMode` values.
 *
 * # Safety
 * `out` must be valid.
 */
enum RoStatus ro_levelize_annual(double premium, double r, double tau, int32_t mode, double *out);

/**
 * Smallest integer duration in `1..=tau_max` covering CapEx and O&M.
 * Fails with `RO_STATUS_COMPUTATION_ERROR` when none does.
 *
 * # Safety
 * Pointers must be valid.
 */
enum RoStatus ro_breakeven_duration(const struct RoModel *model,
                                    double s0,
                                    double capex,
                                    double om,
                                    double t,
                                    double r,
                                    double dt,
                                    uint32_t tau_max,
                                    uint32_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELOPT_H */
