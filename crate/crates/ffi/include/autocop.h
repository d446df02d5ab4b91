#ifndef AUTOCOP_H
#define AUTOCOP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AutocopStatus {
  AUTOCOP_STATUS_OK = 0,
  AUTOCOP_STATUS_NULL_POINTER = 1,
  AUTOCOP_STATUS_INVALID_ARGUMENT = 2,
  AUTOCOP_STATUS_CONFIG = 3,
  AUTOCOP_STATUS_RUN = 4,
  AUTOCOP_STATUS_IO = 5,
  AUTOCOP_STATUS_OUT_OF_RANGE = 6,
  // The run handle holds baseline results, which have no adaptations.
  AUTOCOP_STATUS_NOT_AVAILABLE = 7,
  AUTOCOP_STATUS_PANIC = 8,
} AutocopStatus;

typedef enum AutocopEnv {
  AUTOCOP_ENV_DRIVING = 0,
  AUTOCOP_ENV_WAREHOUSE = 1,
} AutocopEnv;

// Experiment settings under construction.
typedef struct AutocopConfig AutocopConfig;

// Results of one pipeline or baseline run.
typedef struct AutocopRun AutocopRun;

// Counters of a finished run's exploitation phase.
typedef struct AutocopMetrics {
  uint64_t decision_points;
  uint64_t executed_actions;
  uint64_t adaptation_actuations;
  uint64_t crashes;
  uint64_t lane_violations;
  uint64_t speed_violations;
  uint64_t vehicles_encountered;
  uint64_t vehicles_overtaken;
  uint64_t deliveries;
  uint64_t incorrect_pickups;
  uint64_t incorrect_dropoffs;
  uint64_t episodes;
  uint64_t options_extracted;
  uint64_t states_with_options;
  uint64_t adaptations_generated;
} AutocopMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null after a
// success. The pointer stays valid until the next library call on the
// same thread; do not free it.
const char *autocop_last_error(void);

// Default configuration for `env`.
//
// # Safety
// `out` must be null or valid for writes.
enum AutocopStatus autocop_config_new(enum AutocopEnv env, struct AutocopConfig **out);

// # Safety
// `config` must be null or a handle from [`autocop_config_new`] not yet freed.
void autocop_config_free(struct AutocopConfig *config);

// Overlays a flat TOML file on the configuration.
//
// # Safety
// `config` must be a live handle and `path` a NUL-terminated string.
enum AutocopStatus autocop_config_load(struct AutocopConfig *config, const char *path);

// # Safety
// `config` must be a live handle.
enum AutocopStatus autocop_config_set_seed(struct AutocopConfig *config, uint64_t seed);

// Primitive learning steps for non-episodic environments.
//
// # Safety
// `config` must be a live handle.
enum AutocopStatus autocop_config_set_steps(struct AutocopConfig *config, uint64_t steps);

// Primitive learning episodes for episodic environments.
//
// # Safety
// `config` must be a live handle.
enum AutocopStatus autocop_config_set_episodes(struct AutocopConfig *config, uint64_t episodes);

// # Safety
// `config` must be a live handle.
enum AutocopStatus autocop_config_set_batch_size(struct AutocopConfig *config, size_t batch_size);

// # Safety
// `config` must be a live handle.
enum AutocopStatus autocop_config_set_max_option_length(struct AutocopConfig *config,
                                                        size_t length);

// Full pipeline: learning, extraction, option learning, adaptation and
// exploitation.
//
// # Safety
// `config` must be a live handle and `out` valid for writes.
enum AutocopStatus autocop_run(const struct AutocopConfig *config, struct AutocopRun **out);

// Primitive learning and exploitation without adaptations.
//
// # Safety
// `config` must be a live handle and `out` valid for writes.
enum AutocopStatus autocop_run_baseline(const struct AutocopConfig *config,
                                        struct AutocopRun **out);

// # Safety
// `run` must be null or a handle from a run function not yet freed.
void autocop_run_free(struct AutocopRun *run);

// # Safety
// `run` must be a live handle and `out` valid for writes.
enum AutocopStatus autocop_run_metrics(const struct AutocopRun *run, struct AutocopMetrics *out);

// Writes the run's artifacts (traces, option dump, stubs, metrics, report)
// into `dir`, creating it if needed.
//
// # Safety
// `run` must be a live handle and `dir` a NUL-terminated string.
enum AutocopStatus autocop_run_write(const struct AutocopRun *run, const char *dir);

// # Safety
// `run` must be a live handle and `out` valid for writes.
enum AutocopStatus autocop_run_adaptation_count(const struct AutocopRun *run, size_t *out);

// Context name of adaptation `index`, such as `Context6001`. Free the
// result with [`autocop_string_free`].
//
// # Safety
// `run` must be a live handle and `out` valid for writes.
enum AutocopStatus autocop_run_adaptation_context(const struct AutocopRun *run,
                                                  size_t index,
                                                  char **out);

// Generated Context-Traits source of adaptation `index`. Free the result
// with [`autocop_string_free`].
//
// # Safety
// `run` must be a live handle and `out` valid for writes.
enum AutocopStatus autocop_run_adaptation_stub(const struct AutocopRun *run,
                                               size_t index,
                                               char **out);

// # Safety
// `s` must be null or a string returned by this library, freed only once.
void autocop_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AUTOCOP_H */
