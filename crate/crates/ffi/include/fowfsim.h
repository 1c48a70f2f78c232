#ifndef FOWFSIM_H
#define FOWFSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call. Values 2 to 4 match the command-line exit codes.
typedef enum {
  FOWFSIM_STATUS_OK = 0,
  // A required pointer argument was null.
  FOWFSIM_STATUS_NULL_ARGUMENT = 1,
  // The config failed to load or validate, or an argument was invalid.
  FOWFSIM_STATUS_VALIDATION = 2,
  // The run failed.
  FOWFSIM_STATUS_RUNTIME = 3,
  // The layout search or the power demand was infeasible.
  FOWFSIM_STATUS_INFEASIBLE = 4,
  // A panic was caught inside the library.
  FOWFSIM_STATUS_PANIC = 5,
} FowfsimStatus;

// Opaque scenario configuration.
typedef struct FowfsimConfig FowfsimConfig;

// Opaque finished run.
typedef struct FowfsimRun FowfsimRun;

// Scalar results of a finished run.
typedef struct {
  size_t turbines;
  // Trapezoidal integral of farm power, J.
  double total_energy;
  double mean_farm_power;
  // Farm power RMSE against the target in tracking mode, W; NaN otherwise.
  double power_tracking_rmse;
  // Largest 300 s mean of farm power, W.
  double peak_sustained_power;
  size_t saturation_violations;
  size_t rate_violations;
  size_t speed_band_violations;
  size_t degraded_steps;
} FowfsimMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null when there was none.
// The pointer stays valid until the next failing call on the same thread.
const char *fowfsim_last_error(void);

// Library version as a static nul-terminated string.
const char *fowfsim_version(void);

// Loads a config file, or a bundled preset named `preset:<name>`.
//
// # Safety
// `source` must be a nul-terminated string and `out` a valid pointer. On
// success `*out` owns a config to be released with [`fowfsim_config_free`].
FowfsimStatus fowfsim_config_load(const char *source, FowfsimConfig **out);

// Releases a config. Null is ignored.
//
// # Safety
// `config` must be null or come from [`fowfsim_config_load`], and must not
// be used afterwards.
void fowfsim_config_free(FowfsimConfig *config);

// Overrides the simulated duration, s. It must stay a multiple of the
// time step.
//
// # Safety
// `config` must be a live handle from [`fowfsim_config_load`].
FowfsimStatus fowfsim_config_set_duration(FowfsimConfig *config, double seconds);

// Runs the scenario. Nothing is written to disk; see [`fowfsim_run_write`].
//
// # Safety
// `config` must be a live handle and `out` a valid pointer. On success
// `*out` owns a run to be released with [`fowfsim_run_free`].
FowfsimStatus fowfsim_run(const FowfsimConfig *config, FowfsimRun **out);

// Releases a run. Null is ignored.
//
// # Safety
// `run` must be null or come from [`fowfsim_run`], and must not be used
// afterwards.
void fowfsim_run_free(FowfsimRun *run);

// Fills `out` with the scalar results of a run.
//
// # Safety
// `run` must be a live handle and `out` a valid pointer.
FowfsimStatus fowfsim_run_metrics(const FowfsimRun *run, FowfsimMetrics *out);

// Copies per-turbine lateral targets (m) and mean powers (W) into caller
// buffers of length `len`, which must equal the turbine count. Either
// buffer may be null to skip it.
//
// # Safety
// Non-null buffers must hold `len` doubles.
FowfsimStatus fowfsim_run_turbines(const FowfsimRun *run,
                                   double *targets,
                                   double *mean_power,
                                   size_t len);

// Writes every run artifact into `dir`, creating it if needed.
//
// # Safety
// `run` must be a live handle and `dir` a nul-terminated string.
FowfsimStatus fowfsim_run_write(const FowfsimRun *run, const char *dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FOWFSIM_H */
