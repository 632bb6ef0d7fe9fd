#ifndef GEOFLOW_H
#define GEOFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define GEOFLOW_OK 0

#define GEOFLOW_ERR_NULL_POINTER -1

#define GEOFLOW_ERR_INVALID_ARGUMENT -2

#define GEOFLOW_ERR_DIMENSION -3

#define GEOFLOW_ERR_DOMAIN -4

#define GEOFLOW_ERR_NUMERICAL -5

#define GEOFLOW_ERR_UNSUPPORTED -6

#define GEOFLOW_ERR_BUFFER_TOO_SMALL -7

#define GEOFLOW_ERR_PANIC -99

#define GEOFLOW_FORM_PROJECTED 0

#define GEOFLOW_FORM_COORDS 1

#define GEOFLOW_FORM_NORMALIZED 2

#define GEOFLOW_FORM_HOPKINS 3

// Population game.
typedef struct GeoflowGame GeoflowGame;

// Metric field on the simplex.
typedef struct GeoflowMetric GeoflowMetric;

// Game, metric and field form.
typedef struct GeoflowSpec GeoflowSpec;

// Sampled solution path.
typedef struct GeoflowTrajectory GeoflowTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Null-terminated library version; static storage.
const char *geoflow_version(void);

// Copies the calling thread's last error message into `buf`.
//
// Returns the buffer size needed including the terminating nul, or 0 when no
// error has been recorded. The copy is truncated (and still nul-terminated)
// when `len` is too small; `buf` may be null to query the size.
//
// # Safety
// `buf` must be null or valid for `len` writable bytes.
int32_t geoflow_last_error_message(char *buf, size_t len);

// Clears the calling thread's last error message.
void geoflow_clear_error(void);

// Built-in game by name: `rps`, `rps-permanent`, `rps-dominated`, `toy`,
// `coordination`, `contractive`.
//
// # Safety
// `name` must be a nul-terminated string; `out` must be writable.
int32_t geoflow_game_builtin(const char *name, struct GeoflowGame **out);

// Matching game `π(x) = A x` from a row-major `n × n` matrix. With
// `symmetric` set, `A` must be symmetric and the game gets a potential.
//
// # Safety
// `data` must point to `n * n` readable doubles; `out` must be writable.
int32_t geoflow_game_matching(const double *data,
                              size_t n,
                              bool symmetric,
                              struct GeoflowGame **out);

// Number of strategies.
//
// # Safety
// `game` must be a live handle; `n` must be writable.
int32_t geoflow_game_dim(const struct GeoflowGame *game, size_t *n);

// Payoff vector at the population state `x`.
//
// # Safety
// `x` and `payoff` must each hold `n` doubles.
int32_t geoflow_game_payoff(const struct GeoflowGame *game,
                            const double *x,
                            size_t n,
                            double *payoff);

// # Safety
// `game` must be null or a handle not yet freed.
int32_t geoflow_game_free(struct GeoflowGame *game);

// Euclidean metric; its dynamics is the projection dynamics.
//
// # Safety
// `out` must be writable.
int32_t geoflow_metric_euclidean(size_t n, struct GeoflowMetric **out);

// Shahshahani metric; its dynamics is the replicator dynamics.
//
// # Safety
// `out` must be writable.
int32_t geoflow_metric_shahshahani(size_t n, struct GeoflowMetric **out);

// Separable metric with inverse weights `x^p`, `p >= 0`.
//
// # Safety
// `out` must be writable.
int32_t geoflow_metric_prep(size_t n, double p, struct GeoflowMetric **out);

// # Safety
// `metric` must be null or a handle not yet freed.
int32_t geoflow_metric_free(struct GeoflowMetric *metric);

// Dynamics of `game` under `metric` in the given `GEOFLOW_FORM_*`. Both
// inputs are copied; the caller keeps ownership of them.
//
// # Safety
// `game` and `metric` must be live handles; `out` must be writable.
int32_t geoflow_spec_new(const struct GeoflowGame *game,
                         const struct GeoflowMetric *metric,
                         int32_t form,
                         struct GeoflowSpec **out);

// Velocity at the state `x`.
//
// # Safety
// `x` and `velocity` must each hold `n` doubles.
int32_t geoflow_spec_field(const struct GeoflowSpec *spec,
                           const double *x,
                           size_t n,
                           double *velocity);

// # Safety
// `spec` must be null or a handle not yet freed.
int32_t geoflow_spec_free(struct GeoflowSpec *spec);

// Integrates from `x0` to `t_end` with fixed `step` and default settings.
//
// # Safety
// `x0` must hold `n` doubles; `out` must be writable.
int32_t geoflow_integrate(const struct GeoflowSpec *spec,
                          const double *x0,
                          size_t n,
                          double step,
                          double t_end,
                          struct GeoflowTrajectory **out);

// Number of samples and states dimension.
//
// # Safety
// `traj` must be a live handle; `len` and `n` must be writable.
int32_t geoflow_trajectory_shape(const struct GeoflowTrajectory *traj, size_t *len, size_t *n);

// Copies the sample times; `capacity` must be at least the sample count.
//
// # Safety
// `times` must be valid for `capacity` writable doubles.
int32_t geoflow_trajectory_times(const struct GeoflowTrajectory *traj,
                                 double *times,
                                 size_t capacity);

// Copies the states row-major (`len × n`); `capacity` counts doubles.
//
// # Safety
// `states` must be valid for `capacity` writable doubles.
int32_t geoflow_trajectory_states(const struct GeoflowTrajectory *traj,
                                  double *states,
                                  size_t capacity);

// # Safety
// `traj` must be null or a handle not yet freed.
int32_t geoflow_trajectory_free(struct GeoflowTrajectory *traj);

// Runs the audit on a scenario given as JSON text and returns the report as
// JSON. Release the result with `geoflow_string_free`.
//
// # Safety
// `scenario_json` must be a nul-terminated string; `out` must be writable.
int32_t geoflow_audit_json(const char *scenario_json, char **out);

// # Safety
// `s` must be null or a string returned by this library and not yet freed.
int32_t geoflow_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GEOFLOW_H */
