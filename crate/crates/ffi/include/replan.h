#ifndef REPLAN_H
#define REPLAN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stdint.h>
#include <stddef.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum ReplanStatus {
  REPLAN_STATUS_OK = 0,
  REPLAN_STATUS_NULL_POINTER = 1,
  REPLAN_STATUS_INVALID_ARGUMENT = 2,
  REPLAN_STATUS_CONFIG = 3,
  REPLAN_STATUS_INITIAL_PLAN_FAILED = 4,
  REPLAN_STATUS_STEP_AFTER_DONE = 5,
  REPLAN_STATUS_MODEL_FORMAT = 6,
  REPLAN_STATUS_IO = 7,
  REPLAN_STATUS_INTERNAL = 8,
  REPLAN_STATUS_PANIC = 9,
} ReplanStatus;

/**
 * Opaque environment handle.
 */
typedef struct ReplanEnvHandle ReplanEnvHandle;

/**
 * Opaque Q-network handle.
 */
typedef struct ReplanQNet ReplanQNet;

/**
 * Outcome of one decision step.
 */
typedef struct ReplanStepInfo {
  double reward;
  /**
   * Simulated seconds covered by the step.
   */
  double elapsed;
  bool terminated;
  bool truncated;
  bool replanned;
} ReplanStepInfo;

/**
 * Summary of a finished episode. `outcome` is 0 success, 1 collision, 2 timeout.
 */
typedef struct ReplanEpisodeInfo {
  uint32_t outcome;
  double sim_time;
  uint64_t decisions;
  uint64_t replans;
  double l_path;
  double travelled;
  double sgt;
} ReplanEpisodeInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length of an observation vector.
 */
size_t replan_obs_dim(void);

/**
 * Copies the last error message of this thread into `buf` (NUL terminated,
 * truncated to fit) and returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t replan_last_error(char *buf, size_t len);

/**
 * Creates an environment. `settings_json` may be null for the defaults;
 * otherwise it is a JSON object with any of the settings sections.
 *
 * # Safety
 * `settings_json` must be null or a NUL-terminated string; `out` must be valid.
 */
enum ReplanStatus replan_env_new(const char *settings_json, struct ReplanEnvHandle **out);

/**
 * Releases an environment; null is ignored.
 *
 * # Safety
 * `env` must be null or a handle from `replan_env_new` not yet freed.
 */
void replan_env_free(struct ReplanEnvHandle *env);

/**
 * Starts the episode for `seed` and writes the first observation.
 *
 * # Safety
 * `env` must be a live handle; `obs` must be null or hold `obs_len` doubles.
 */
enum ReplanStatus replan_env_reset(struct ReplanEnvHandle *env,
                                   uint64_t seed,
                                   double *obs,
                                   size_t obs_len);

/**
 * Applies `action` (0 keep the path, 1 replan).
 *
 * # Safety
 * `env` must be a live handle; `info` must be null or valid; `obs` must be
 * null or hold `obs_len` doubles.
 */
enum ReplanStatus replan_env_step(struct ReplanEnvHandle *env,
                                  uint32_t action,
                                  struct ReplanStepInfo *info,
                                  double *obs,
                                  size_t obs_len);

/**
 * Summary of the finished episode; `InvalidArgument` while it is still running.
 *
 * # Safety
 * `env` must be a live handle and `out` valid.
 */
enum ReplanStatus replan_env_result(const struct ReplanEnvHandle *env,
                                    struct ReplanEpisodeInfo *out);

/**
 * Loads a weight file written by `replan train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid.
 */
enum ReplanStatus replan_qnet_load(const char *path, struct ReplanQNet **out);

/**
 * Releases a network; null is ignored.
 *
 * # Safety
 * `net` must be null or a handle from `replan_qnet_load` not yet freed.
 */
void replan_qnet_free(struct ReplanQNet *net);

/**
 * Q-values of both actions and the greedy action for one observation.
 *
 * # Safety
 * `net` must be a live handle, `obs` must hold `obs_len` doubles, and `q`
 * (two doubles) and `action` must each be null or valid.
 */
enum ReplanStatus replan_qnet_act(const struct ReplanQNet *net,
                                  const double *obs,
                                  size_t obs_len,
                                  double *q,
                                  uint32_t *action);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REPLAN_H */
