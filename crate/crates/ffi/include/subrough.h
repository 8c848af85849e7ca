#ifndef SUBROUGH_H
#define SUBROUGH_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Zero is success.
 */
typedef enum SrStatus {
  SR_STATUS_OK = 0,
  SR_STATUS_NULL_POINTER = 1,
  SR_STATUS_INVALID_UTF8 = 2,
  SR_STATUS_DIMENSION = 3,
  SR_STATUS_DOMAIN = 4,
  SR_STATUS_INFEASIBLE = 5,
  SR_STATUS_NOT_POSITIVE_DEFINITE = 6,
  SR_STATUS_NON_CONVERGENCE = 7,
  SR_STATUS_CONFIG = 8,
  SR_STATUS_BUFFER_TOO_SMALL = 9,
  SR_STATUS_INTERNAL = 10,
  SR_STATUS_PANIC = 11,
} SrStatus;

/**
 * A distance on the state space of a system, exact or gauge-backed.
 */
typedef struct SrMetric SrMetric;

/**
 * A vector field system.
 */
typedef struct SrSystem SrSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *sr_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sr_version(void);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must be null or a pointer obtained from this library, freed once.
 */
void sr_string_free(char *s);

/**
 * Looks up a built-in system (`elliptic1`, `elliptic2`, `heisenberg`, ...).
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SrStatus sr_system_builtin(const char *name, struct SrSystem **out);

/**
 * Builds a system from its JSON description.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SrStatus sr_system_from_json(const char *json, struct SrSystem **out);

/**
 * State dimension `n`, number of driving fields `d` and bracket depth.
 *
 * # Safety
 * `sys` must be a live handle; output pointers may be null.
 */
enum SrStatus sr_system_dims(const struct SrSystem *sys, size_t *n, size_t *d, size_t *lbar);

/**
 * # Safety
 * `sys` must be null or a handle from this library, freed once.
 */
void sr_system_free(struct SrSystem *sys);

/**
 * Metric that solves the control problem on every query.
 *
 * # Safety
 * `sys` must be a live handle and `out` a valid pointer.
 */
enum SrStatus sr_metric_exact(const struct SrSystem *sys, struct SrMetric **out);

/**
 * Gauge metric calibrated against exact distances on `pairs` random pairs.
 * Fails with `Domain` when no gauge is registered for the system.
 *
 * # Safety
 * `sys` must be a live handle and `out` a valid pointer.
 */
enum SrStatus sr_metric_calibrated(const struct SrSystem *sys,
                                   size_t pairs,
                                   uint64_t seed,
                                   struct SrMetric **out);

/**
 * Calibration band `[lower, upper]` of exact distance over gauge. Both are
 * 1 for exact metrics.
 *
 * # Safety
 * `metric` must be a live handle and the outputs valid pointers.
 */
enum SrStatus sr_metric_band(const struct SrMetric *metric, double *lower, double *upper);

/**
 * Distance between two points of length `n`.
 *
 * # Safety
 * `x` and `y` must point to `n` doubles; `metric` must be live.
 */
enum SrStatus sr_metric_distance(const struct SrMetric *metric,
                                 const double *x,
                                 const double *y,
                                 size_t n,
                                 double *out);

/**
 * # Safety
 * `metric` must be null or a handle from this library, freed once.
 */
void sr_metric_free(struct SrMetric *metric);

/**
 * Control distance with explicit solver settings. `residual` may be null.
 *
 * # Safety
 * `x` and `y` must point to `n` doubles; `sys` must be live.
 */
enum SrStatus sr_control_distance(const struct SrSystem *sys,
                                  const double *x,
                                  const double *y,
                                  size_t n,
                                  size_t segments,
                                  size_t restarts,
                                  uint64_t seed,
                                  double *value,
                                  double *residual);

/**
 * Path `index` of the stream `seed`: a `dim`-dimensional fBM on `steps`
 * uniform steps of `[0, horizon]`, written time-major into `buf`, which
 * must hold `(steps + 1) * dim` doubles.
 *
 * # Safety
 * `buf` must point to `buf_len` writable doubles.
 */
enum SrStatus sr_sample_fbm(double hurst,
                            double horizon,
                            size_t steps,
                            size_t dim,
                            uint64_t seed,
                            uint64_t index,
                            double *buf,
                            size_t buf_len);

/**
 * Newtonian capacity of index `alpha` of a point cloud (`count` points of
 * dimension `dim`, point-major) under `metric`, with default settings.
 *
 * # Safety
 * `points` must point to `count * dim` doubles; `metric` must be live.
 */
enum SrStatus sr_capacity(const struct SrMetric *metric,
                          const double *points,
                          size_t count,
                          size_t dim,
                          double alpha,
                          double *out);

/**
 * Hitting probability for an experiment given as JSON (fields `hurst`,
 * `window`, `center`, `radius`, `y0`, `n_paths`, `steps`, `seed`, optional
 * `horizon`). On success `*json_out` receives the result as JSON, to be
 * released with `sr_string_free`; `estimate` may be null.
 *
 * # Safety
 * Handles must be live, `config` NUL-terminated and `json_out` valid.
 */
enum SrStatus sr_hitting_probability(const struct SrSystem *sys,
                                     const struct SrMetric *metric,
                                     const char *config,
                                     double *estimate,
                                     char **json_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBROUGH_H */
