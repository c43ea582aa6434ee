#ifndef CMP_H
#define CMP_H

/* Generated by cbindgen from the cmp-ffi crate; edit src/lib.rs instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call in this ABI.
 */
typedef enum CmpStatus {
  /**
   * Success.
   */
  CmpStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  CmpStatus_NullArgument = 1,
  /**
   * A parameter failed validation; see `cmp_last_error`.
   */
  CmpStatus_InvalidParameter = 2,
  /**
   * The quantity is mathematically undefined for these inputs
   * (for example g2 of a completely empty mode).
   */
  CmpStatus_UndefinedResult = 3,
  /**
   * The solver failed; see `cmp_last_error`.
   */
  CmpStatus_SolverFailure = 4,
  /**
   * An internal panic was caught at the ABI boundary.
   */
  CmpStatus_InternalPanic = 5,
} CmpStatus;

/**
 * Opaque, validated system parameters. Create with [`cmp_params_new`],
 * release with [`cmp_params_free`].
 */
typedef struct CmpParams CmpParams;

/**
 * One g2(0) ensemble estimate per mode: value, standard error, and a
 * reliability flag that clears when the occupation is within 3 standard
 * errors of zero.
 */
typedef struct CmpG2Estimate {
  double g2_pho;
  double se_pho;
  bool reliable_pho;
  double g2_mag;
  double se_mag;
  bool reliable_mag;
} CmpG2Estimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string; never free it.
 */
const char *cmp_version(void);

/**
 * Copies the most recent error message of this thread into `buf`
 * (truncated to `cap` - 1 bytes, always NUL-terminated when `cap` > 0)
 * and returns the full message length in bytes.
 *
 * # Safety
 * `buf` must point to at least `cap` writable bytes, or be null with
 * `cap` = 0 to query the length alone.
 */
size_t cmp_last_error(char *buf, size_t cap);

/**
 * Validates the parameter set (frequencies and rates in Hz, temperature in
 * kelvin) and writes a new handle to `out`.
 *
 * # Safety
 * `out` must be a valid pointer. On `Ok` it receives an owned handle that
 * must be released with [`cmp_params_free`].
 */
enum CmpStatus cmp_params_new(double omega_c_hz,
                              double omega_m_hz,
                              double g_hz,
                              double kappa_c_hz,
                              double kappa_m_hz,
                              double drive_hz,
                              double omega_0_hz,
                              double temperature_k,
                              struct CmpParams **out);

/**
 * Releases a handle from [`cmp_params_new`]. Null is a no-op.
 *
 * # Safety
 * `params` must be null or a handle returned by [`cmp_params_new`] that has
 * not been freed yet.
 */
void cmp_params_free(struct CmpParams *params);

/**
 * Steady-state mean occupations under the continuous drive.
 *
 * # Safety
 * `params` must be a live handle; `n_pho` and `n_mag` must be valid.
 */
enum CmpStatus cmp_steady_occupations(const struct CmpParams *params, double *n_pho, double *n_mag);

/**
 * Steady-state g2(0) of both modes from the closed displaced-thermal form.
 * Returns `UndefinedResult` when a mode holds no field at all.
 *
 * # Safety
 * `params` must be a live handle; `g2_pho` and `g2_mag` must be valid.
 */
enum CmpStatus cmp_steady_g2(const struct CmpParams *params, double *g2_pho, double *g2_mag);

/**
 * Mean occupations during free decay of an injected pulse of `n_inject`
 * photons, evaluated at `len` sample times. The drive must be 0.
 *
 * # Safety
 * `params` must be a live handle; `times`, `n_pho` and `n_mag` must each
 * point to `len` elements.
 */
enum CmpStatus cmp_pulse_occupations(const struct CmpParams *params,
                                     double n_inject,
                                     const double *times,
                                     size_t len,
                                     double *n_pho,
                                     double *n_mag);

/**
 * Monte Carlo g2(0) estimate at time `t` from `n_traj` stochastic
 * trajectories started with `n_inject` coherent photons on the thermal
 * magnon background. Uses the exact-Gaussian one-step propagator, so `dt`
 * only sets the output granularity, and identical arguments reproduce
 * identical results bit for bit.
 *
 * # Safety
 * `params` must be a live handle and `out` a valid pointer.
 */
enum CmpStatus cmp_trajectory_g2(const struct CmpParams *params,
                                 double n_inject,
                                 uint64_t n_traj,
                                 double dt,
                                 uint64_t seed,
                                 double t,
                                 struct CmpG2Estimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CMP_H */
