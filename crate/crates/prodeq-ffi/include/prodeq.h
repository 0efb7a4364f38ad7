/* prodeq C ABI. Generated by cbindgen; do not edit. */

#pragma once

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum prodeq_status {
  PRODEQ_OK = 0,
  // A required pointer argument was null.
  PRODEQ_ERR_NULL_ARGUMENT = 1,
  // Arguments violate a documented precondition.
  PRODEQ_ERR_INVALID_ARGUMENT = 2,
  // Productivity outside the positive domain.
  PRODEQ_ERR_DOMAIN = 3,
  // A computation left the finite range.
  PRODEQ_ERR_NUMERIC = 4,
  // A root or peak solver could not bracket a solution.
  PRODEQ_ERR_SOLVER = 5,
  // The data cannot constrain the requested fit.
  PRODEQ_ERR_ILL_POSED = 6,
  // No state satisfies the requested conserved totals and capacities.
  PRODEQ_ERR_INFEASIBLE = 7,
  // An internal invariant failed; report this as a bug.
  PRODEQ_ERR_INTERNAL = 8,
} prodeq_status;

// Opaque handle to a binned mean-occupancy curve.
typedef struct prodeq_curve prodeq_curve;

// Opaque handle to the four-parameter occupancy law.
typedef struct prodeq_model prodeq_model;

// Outcome of [`prodeq_fit`].
typedef struct prodeq_fit_result {
  double beta;
  double mu;
  double amplitude;
  double gamma;
  double chi2;
  uint64_t n_evals;
  // Index of the winning start on the default multi-start grid.
  uint64_t start_index;
  // 1 when the simplex met both convergence criteria.
  int32_t converged;
} prodeq_fit_result;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Detail text for the most recent failure on this thread. The pointer is
// valid until the next failing prodeq call on the same thread; never
// freed by the caller.
const char *prodeq_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *prodeq_version(void);

// Creates a model handle. `amplitude` must be positive and `gamma`
// non-negative; `beta` may have either sign.
//
// # Safety
// `out` must be a valid pointer. The handle must be released with
// [`prodeq_model_free`].
enum prodeq_status prodeq_model_new(double beta,
                                    double mu,
                                    double amplitude,
                                    double gamma,
                                    struct prodeq_model **out);

// Releases a model handle; a null pointer is a no-op.
//
// # Safety
// `model` must have come from [`prodeq_model_new`] and not be freed twice.
void prodeq_model_free(struct prodeq_model *model);

// Capacity `g(c) = A c^(-gamma)`.
//
// # Safety
// `model` and `out` must be valid pointers.
enum prodeq_status prodeq_model_capacity(const struct prodeq_model *model, double c, double *out);

// Equilibrium mean occupancy `g / (g e^{beta (c - mu)} + 1)`.
//
// # Safety
// `model` and `out` must be valid pointers.
enum prodeq_status prodeq_model_mean_occupancy(const struct prodeq_model *model,
                                               double c,
                                               double *out);

// Log partition function `g ln(1 + e^{-beta (c - mu)} / g)`.
//
// # Safety
// `model` and `out` must be valid pointers.
enum prodeq_status prodeq_model_log_partition(const struct prodeq_model *model,
                                              double c,
                                              double *out);

// Productivity at which the mean occupancy peaks, bracketed by
// `[c_lo, c_hi]`. Fails with `PRODEQ_ERR_SOLVER` for monotone regimes
// (`beta >= 0` or `gamma == 0`) or when the bracket excludes the peak.
//
// # Safety
// `model` and `out` must be valid pointers.
enum prodeq_status prodeq_model_peak_productivity(const struct prodeq_model *model,
                                                  double c_lo,
                                                  double c_hi,
                                                  double *out);

// Self-consistent occupancy under the model's linear-ramp limiter,
// solved independently of the closed form to `tol` relative accuracy.
//
// # Safety
// `model` and `out` must be valid pointers.
enum prodeq_status prodeq_model_solve_occupancy(const struct prodeq_model *model,
                                                double c,
                                                double tol,
                                                double *out);

// Boltzmann occupancy `e^{-beta (c - mu)}` (the unlimited-capacity law).
//
// # Safety
// `out` must be a valid pointer.
enum prodeq_status prodeq_boltzmann_occupancy(double c, double beta, double mu, double *out);

// Builds a curve from parallel arrays of length `len`. `weights` may be
// null, in which case every bin has weight 1. Centers must be positive
// and distinct (they are sorted internally), means and weights positive.
//
// # Safety
// The arrays must hold at least `len` readable doubles; `out` must be a
// valid pointer. The handle must be released with [`prodeq_curve_free`].
enum prodeq_status prodeq_curve_new(const double *c_centers,
                                    const double *n_means,
                                    const double *weights,
                                    size_t len,
                                    struct prodeq_curve **out);

// Releases a curve handle; a null pointer is a no-op.
//
// # Safety
// `curve` must have come from this library and not be freed twice.
void prodeq_curve_free(struct prodeq_curve *curve);

// Number of bins in the curve; 0 for a null handle.
//
// # Safety
// `curve` must be a valid handle or null.
size_t prodeq_curve_len(const struct prodeq_curve *curve);

// Reads one bin of the curve by index (bins are ordered by ascending
// center). Out-pointers may be null to skip a field.
//
// # Safety
// `curve` must be a valid handle; non-null out-pointers must be writable.
enum prodeq_status prodeq_curve_bin(const struct prodeq_curve *curve,
                                    size_t index,
                                    double *c_center,
                                    double *n_mean,
                                    double *weight);

// Samples the model at log-spaced bin centers over `[c_min, c_max]` with
// multiplicative log-normal noise `exp(noise_sigma * z)`; deterministic
// in `seed`.
//
// # Safety
// `model` and `out` must be valid pointers; release the handle with
// [`prodeq_curve_free`].
enum prodeq_status prodeq_synthetic_curve(const struct prodeq_model *model,
                                          double c_min,
                                          double c_max,
                                          size_t bins,
                                          double noise_sigma,
                                          uint64_t seed,
                                          struct prodeq_curve **out);

// Weighted sum of squared log residuals between curve and model.
//
// # Safety
// All pointers must be valid.
enum prodeq_status prodeq_chi_square(const struct prodeq_model *model,
                                     const struct prodeq_curve *curve,
                                     double *out);

// Multi-start chi-square fit of the four-parameter law with default
// options. Needs at least 8 bins spanning two decades.
//
// # Safety
// `curve` and `out` must be valid pointers.
enum prodeq_status prodeq_fit(const struct prodeq_curve *curve, struct prodeq_fit_result *out);

// One-shot chain run: `levels` grid points spaced `dc`, `workers` workers
// at conserved output `output_index`, `steps` proposals with the given
// burn-in, stride and seed. With `use_capacity` nonzero the linear-ramp
// limiter `g(c) = amplitude * c^(-gamma)` applies; otherwise moves are
// unrestricted. Writes per-level time-averaged occupancies into
// `n_mean_out` and variances into `n_var_out` (either may be null to
// skip), both of length `levels`.
//
// # Safety
// Non-null output arrays must hold at least `levels` writable doubles.
enum prodeq_status prodeq_simulate_occupancy(size_t levels,
                                             double dc,
                                             uint64_t workers,
                                             uint64_t output_index,
                                             uint64_t steps,
                                             uint64_t burn_in,
                                             uint64_t sample_every,
                                             uint64_t seed,
                                             int32_t use_capacity,
                                             double amplitude,
                                             double gamma,
                                             double *n_mean_out,
                                             double *n_var_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
