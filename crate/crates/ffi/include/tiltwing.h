#ifndef TILTWING_H
#define TILTWING_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TwCause {
  TW_CAUSE_NONE = 0,
  TW_CAUSE_TOOK_OFF = 1,
  TW_CAUSE_GROUND = 2,
  TW_CAUSE_NEGATIVE_FREESTREAM = 3,
  TW_CAUSE_TIMEOUT = 4,
} TwCause;

typedef enum TwStatus {
  TW_STATUS_OK = 0,
  TW_STATUS_NULL_POINTER = 1,
  TW_STATUS_INVALID_ARGUMENT = 2,
  TW_STATUS_INFEASIBLE = 3,
  TW_STATUS_NUMERICAL = 4,
  TW_STATUS_IO = 5,
  TW_STATUS_FORMAT = 6,
  TW_STATUS_BUFFER_TOO_SMALL = 7,
  TW_STATUS_PANIC = 8,
} TwStatus;

typedef struct TwAgent TwAgent;

/**
 * Takeoff environment in vanilla observation mode.
 */
typedef struct TwEnv TwEnv;

typedef struct TwTransformer TwTransformer;

/**
 * Result of one environment step. `observation` holds `observation_len`
 * valid entries.
 */
typedef struct TwStep {
  double observation[7];
  size_t observation_len;
  double reward;
  double energy_wh;
  enum TwCause cause;
  bool done;
} TwStep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *tw_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tw_version(void);

/**
 * Relative accuracy 1 − |e_gen − e_ref| / e_ref.
 *
 * # Safety
 * `out` must be a valid pointer to a double.
 */
enum TwStatus tw_accuracy(double e_gen, double e_ref, double *out);

/**
 * Wing drag coefficient of the default vehicle at angle of attack `alpha`
 * (rad).
 *
 * # Safety
 * `out` must be a valid pointer to a double.
 */
enum TwStatus tw_drag_coeff(double alpha, double *out);

/**
 * Creates an environment from a JSON run config (null for defaults; only
 * the `vehicle` and `env` sections matter).
 *
 * # Safety
 * `config_json` must be null or a NUL-terminated string; `out` must be a
 * valid pointer.
 */
enum TwStatus tw_env_new(const char *config_json, struct TwEnv **out);

/**
 * # Safety
 * `env` must be null or a handle from `tw_env_new` not yet freed.
 */
void tw_env_free(struct TwEnv *env);

/**
 * Resets to the initial state and writes the observation.
 *
 * # Safety
 * `env` must be a live handle; `obs` must hold `cap` doubles; `len` must
 * be valid.
 */
enum TwStatus tw_env_reset(struct TwEnv *env, uint64_t seed, double *obs, size_t cap, size_t *len);

/**
 * Applies power (W) and wing angle (rad) for one step.
 *
 * # Safety
 * `env` must be a live handle and `out` a valid pointer.
 */
enum TwStatus tw_env_step(struct TwEnv *env, double power, double theta, struct TwStep *out);

/**
 * Loads a transformer checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TwStatus tw_transformer_load(const char *path, struct TwTransformer **out);

/**
 * # Safety
 * `t` must be null or a handle from `tw_transformer_load` not yet freed.
 */
void tw_transformer_free(struct TwTransformer *t);

/**
 * Proposal for the action after `n` normalized (power, angle) pairs stored
 * row-major in `history`.
 *
 * # Safety
 * `t` must be a live handle, `history` must hold `2 n` doubles and `mean`
 * and `var` must each hold 2 doubles.
 */
enum TwStatus tw_transformer_propose(const struct TwTransformer *t,
                                     const double *history,
                                     size_t n,
                                     double *mean,
                                     double *var);

/**
 * Loads a SAC agent checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TwStatus tw_agent_load(const char *path, struct TwAgent **out);

/**
 * # Safety
 * `a` must be null or a handle from `tw_agent_load` not yet freed.
 */
void tw_agent_free(struct TwAgent *a);

/**
 * Observation and action sizes of an agent.
 *
 * # Safety
 * All pointers must be valid.
 */
enum TwStatus tw_agent_dims(const struct TwAgent *a, size_t *obs_dim, size_t *act_dim);

/**
 * Deterministic action in [−1, 1]^act_dim for an observation.
 *
 * # Safety
 * `a` must be a live handle, `obs` must hold `obs_len` doubles and
 * `action` must hold `cap` doubles.
 */
enum TwStatus tw_agent_act(const struct TwAgent *a,
                           const double *obs,
                           size_t obs_len,
                           double *action,
                           size_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TILTWING_H */
