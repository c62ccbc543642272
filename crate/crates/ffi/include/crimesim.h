#ifndef CRIMESIM_H
#define CRIMESIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * How a simulation currently stands.
 */
typedef enum CrimesimRunState {
  /**
   * The requested time was reached; the simulation can continue.
   */
  CRIMESIM_RUN_STATE_RUNNING = 0,
  CRIMESIM_RUN_STATE_REACHED_T = 1,
  CRIMESIM_RUN_STATE_EQUILIBRATED = 2,
  CRIMESIM_RUN_STATE_BLOWUP_SUSPECTED = 3,
  CRIMESIM_RUN_STATE_FAILED = 4,
} CrimesimRunState;

typedef enum CrimesimStatus {
  CRIMESIM_STATUS_OK = 0,
  CRIMESIM_STATUS_NULL_POINTER = 1,
  CRIMESIM_STATUS_INVALID_ARGUMENT = 2,
  CRIMESIM_STATUS_PARSE_ERROR = 3,
  CRIMESIM_STATUS_VALIDATION_ERROR = 4,
  CRIMESIM_STATUS_IO_ERROR = 5,
  CRIMESIM_STATUS_FORMAT_ERROR = 6,
  CRIMESIM_STATUS_NUMERICAL_ERROR = 7,
  CRIMESIM_STATUS_BUFFER_TOO_SMALL = 8,
  CRIMESIM_STATUS_PANIC = 9,
} CrimesimStatus;

/**
 * Opaque parsed scenario.
 */
typedef struct CrimesimScenario CrimesimScenario;

/**
 * Opaque running simulation.
 */
typedef struct CrimesimSim CrimesimSim;

/**
 * Model parameters with constant sources.
 */
typedef struct CrimesimParams {
  double m;
  double chi;
  double eps;
  double b1;
  double b2;
} CrimesimParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length including the NUL,
 * or 0 if there is no error.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t crimesim_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *crimesim_version(void);

/**
 * Homogeneous equilibrium `(u*, v*)` for constant sources.
 *
 * # Safety
 * `u_out` and `v_out` must be valid for writes.
 */
enum CrimesimStatus crimesim_steady_state(double b1, double b2, double *u_out, double *v_out);

/**
 * Parses and validates a TOML scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum CrimesimStatus crimesim_scenario_load(const char *path, struct CrimesimScenario **out);

/**
 * # Safety
 * `s` must be null or a handle from [`crimesim_scenario_load`] not yet freed.
 */
void crimesim_scenario_free(struct CrimesimScenario *s);

/**
 * Runs a scenario to completion, writing snapshots, `diagnostics.csv` and
 * `manifest.json` into `out_dir`. `state_out` receives the final status.
 *
 * # Safety
 * `s` must be a live scenario handle, `out_dir` a NUL-terminated string and
 * `state_out` null or valid for writes.
 */
enum CrimesimStatus crimesim_scenario_run(const struct CrimesimScenario *s,
                                          const char *out_dir,
                                          enum CrimesimRunState *state_out);

/**
 * Creates a simulation from a scenario's grid, model, control and initial data.
 *
 * # Safety
 * `s` must be a live scenario handle and `out` valid for writes.
 */
enum CrimesimStatus crimesim_sim_from_scenario(const struct CrimesimScenario *s,
                                               struct CrimesimSim **out);

/**
 * Creates a simulation with gaussian initial data of width `sigma` on the
 * rectangle `bounds = {x_min, x_max, y_min, y_max}` and default step control.
 *
 * # Safety
 * `params` must point to a valid struct, `bounds` to 4 doubles and `out` be
 * valid for writes.
 */
enum CrimesimStatus crimesim_sim_new_gaussian(const struct CrimesimParams *params,
                                              const double *bounds,
                                              size_t nx,
                                              size_t ny,
                                              double sigma,
                                              struct CrimesimSim **out);

/**
 * # Safety
 * `sim` must be null or a live simulation handle.
 */
void crimesim_sim_free(struct CrimesimSim *sim);

/**
 * Advances to `t_target`. `state_out` receives `Running` when the target was
 * reached, otherwise the reason the run stopped.
 *
 * # Safety
 * `sim` must be a live handle and `state_out` null or valid for writes.
 */
enum CrimesimStatus crimesim_sim_advance(struct CrimesimSim *sim,
                                         double t_target,
                                         enum CrimesimRunState *state_out);

/**
 * Current simulation time, or NaN for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
double crimesim_sim_time(const struct CrimesimSim *sim);

/**
 * Largest `max |u|` seen so far, or NaN for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
double crimesim_sim_peak_linf_u(const struct CrimesimSim *sim);

/**
 * # Safety
 * `sim` must be a live handle; `nx` and `ny` valid for writes.
 */
enum CrimesimStatus crimesim_sim_dims(const struct CrimesimSim *sim, size_t *nx, size_t *ny);

/**
 * Copies `u` into `buf` (at least `nx * ny` doubles).
 *
 * # Safety
 * `sim` must be a live handle and `buf` valid for `len` doubles.
 */
enum CrimesimStatus crimesim_sim_copy_u(const struct CrimesimSim *sim, double *buf, size_t len);

/**
 * Copies `v` into `buf` (at least `nx * ny` doubles).
 *
 * # Safety
 * `sim` must be a live handle and `buf` valid for `len` doubles.
 */
enum CrimesimStatus crimesim_sim_copy_v(const struct CrimesimSim *sim, double *buf, size_t len);

/**
 * Writes a `CWF1` snapshot of `nx * ny` values.
 *
 * # Safety
 * `path` and `name` must be NUL-terminated strings, `bounds` point to 4
 * doubles and `values` to `nx * ny` doubles.
 */
enum CrimesimStatus crimesim_snapshot_write(const char *path,
                                            const double *values,
                                            size_t nx,
                                            size_t ny,
                                            const double *bounds,
                                            double t,
                                            const char *name);

/**
 * Reads a `CWF1` snapshot. `nx`, `ny`, `t` and `bounds` (4 doubles, may be
 * null) are always filled on a successful parse; if `values` is null or
 * `len < nx * ny` the call returns `BufferTooSmall` so the caller can
 * allocate and retry.
 *
 * # Safety
 * `path` must be a NUL-terminated string; the out pointers valid for writes;
 * `values` null or valid for `len` doubles.
 */
enum CrimesimStatus crimesim_snapshot_read(const char *path,
                                           double *values,
                                           size_t len,
                                           size_t *nx,
                                           size_t *ny,
                                           double *t,
                                           double *bounds);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CRIMESIM_H */
