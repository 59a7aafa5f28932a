#ifndef CHIMERA_H
#define CHIMERA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum ChimeraStatus {
  CHIMERA_STATUS_OK = 0,
  CHIMERA_STATUS_NULL_POINTER = 1,
  /**
   * Bad parameters, malformed JSON or mismatched lengths.
   */
  CHIMERA_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Integration or tangent failure.
   */
  CHIMERA_STATUS_NUMERICAL = 3,
  CHIMERA_STATUS_IO = 4,
  /**
   * Output buffer shorter than required; nothing was written.
   */
  CHIMERA_STATUS_BUFFER_TOO_SMALL = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  CHIMERA_STATUS_PANIC = 6,
} ChimeraStatus;

/**
 * Network description (opaque).
 */
typedef struct ChimeraNetwork ChimeraNetwork;

/**
 * Sampled trajectory with lifted phases (opaque).
 */
typedef struct ChimeraTrajectory ChimeraTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *chimera_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *chimera_version(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void chimera_string_free(char *s);

/**
 * Builds a network from its JSON description.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum ChimeraStatus chimera_network_from_json(const char *json, struct ChimeraNetwork **out);

/**
 * Serializes a network to JSON; free the result with [`chimera_string_free`].
 *
 * # Safety
 * `net` must be a live handle; `out` must be writable.
 */
enum ChimeraStatus chimera_network_to_json(const struct ChimeraNetwork *net, char **out);

/**
 * # Safety
 * `net` must be null or a handle not yet freed.
 */
void chimera_network_free(struct ChimeraNetwork *net);

/**
 * Phase-space dimension, or 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle.
 */
size_t chimera_network_dim(const struct ChimeraNetwork *net);

/**
 * Evaluates the vector field at `x` (length `dim`) and time `t`.
 *
 * # Safety
 * Arrays must hold at least the stated number of values.
 */
enum ChimeraStatus chimera_network_vector_field(const struct ChimeraNetwork *net,
                                                const double *x,
                                                size_t len,
                                                double t,
                                                double *out,
                                                size_t out_len);

/**
 * Integrates from `x0` over `[0, duration]`, sampling every
 * `sample_interval`. Non-positive tolerances select the defaults
 * (`1e-9` relative, `1e-11` absolute).
 *
 * # Safety
 * `x0` must hold `len` values; `out` must be writable.
 */
enum ChimeraStatus chimera_integrate(const struct ChimeraNetwork *net,
                                     const double *x0,
                                     size_t len,
                                     double duration,
                                     double sample_interval,
                                     double rtol,
                                     double atol,
                                     struct ChimeraTrajectory **out);

/**
 * # Safety
 * `traj` must be null or a handle not yet freed.
 */
void chimera_trajectory_free(struct ChimeraTrajectory *traj);

/**
 * Number of samples, or 0 for a null handle.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t chimera_trajectory_len(const struct ChimeraTrajectory *traj);

/**
 * Oscillators per sample, or 0 for a null handle.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t chimera_trajectory_dim(const struct ChimeraTrajectory *traj);

/**
 * Copies the `len` sample times.
 *
 * # Safety
 * `out` must hold `out_len` values.
 */
enum ChimeraStatus chimera_trajectory_times(const struct ChimeraTrajectory *traj,
                                            double *out,
                                            size_t out_len);

/**
 * Copies the lifted phases, row-major (`len * dim` values).
 *
 * # Safety
 * `out` must hold `out_len` values.
 */
enum ChimeraStatus chimera_trajectory_phases(const struct ChimeraTrajectory *traj,
                                             double *out,
                                             size_t out_len);

/**
 * Kuramoto order parameter of `len` phases.
 *
 * # Safety
 * `phases` must hold `len` values; `out` must be writable.
 */
enum ChimeraStatus chimera_order_parameter(const double *phases, size_t len, double *out);

/**
 * Maximal Lyapunov exponent with default integrator tolerances.
 *
 * # Safety
 * `x0` must hold `len` values; `out` must be writable.
 */
enum ChimeraStatus chimera_max_lyapunov(const struct ChimeraNetwork *net,
                                        const double *x0,
                                        size_t len,
                                        double total_time,
                                        double skip,
                                        double renorm_interval,
                                        uint64_t seed,
                                        double *out);

/**
 * Frequency report of one trajectory and the weak-chimera verdict, as a JSON
 * object `{"report": .., "verdict": ..}`. Free with [`chimera_string_free`].
 *
 * # Safety
 * `traj` must be a live handle; `out` must be writable.
 */
enum ChimeraStatus chimera_classify(const struct ChimeraTrajectory *traj,
                                    double burn_in,
                                    size_t n_windows,
                                    double sync_tol,
                                    double sep_margin,
                                    char **out);

/**
 * Runs a JSON experiment config (as used by the `chimera` binary) and writes
 * its artifacts into `out_dir`.
 *
 * # Safety
 * Both arguments must be NUL-terminated strings.
 */
enum ChimeraStatus chimera_run_experiment(const char *config_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHIMERA_H */
