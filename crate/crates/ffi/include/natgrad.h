#ifndef NATGRAD_H
#define NATGRAD_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum NgStatus {
  NG_STATUS_OK = 0,
  // A required pointer argument was null.
  NG_STATUS_NULL_POINTER = 1,
  // Bad argument: unknown id, malformed text, wrong length, out-of-range
  // value.
  NG_STATUS_INVALID_ARGUMENT = 2,
  // The call is illegal in the handle's current state.
  NG_STATUS_INVALID_STATE = 3,
  // A non-finite value appeared.
  NG_STATUS_NUMERIC = 4,
  // Training left the bounded parameter region.
  NG_STATUS_DIVERGENCE = 5,
  // An ill-conditioned linear system.
  NG_STATUS_DEGENERATE = 6,
  NG_STATUS_IO = 7,
  // A Rust panic was caught at the boundary.
  NG_STATUS_PANIC = 8,
} NgStatus;

// A training run in progress.
typedef struct NgAgent NgAgent;

// An environment instance with its own random stream.
typedef struct NgEnv NgEnv;

// A softmax policy network.
typedef struct NgPolicy NgPolicy;

// Outcome of one environment step.
typedef struct NgStep {
  double reward;
  bool terminated;
  bool truncated;
} NgStep;

// Summary of one training episode.
typedef struct NgEpisode {
  // 1-based episode index.
  size_t index;
  double total_reward;
  double ema_reward;
  size_t steps;
} NgEpisode;

// Exact quantities of a tabular policy on a chain MDP.
typedef struct NgOracleReport {
  // `J(θ)`.
  double objective;
  // `‖∇θ J‖`.
  double grad_norm;
  size_t fisher_rank;
  // `F x* = ∇J` has no solution. A singular but consistent Fisher system
  // (any softmax with redundant logits) is not degenerate.
  bool degenerate;
  // `‖x*‖`.
  double x_star_norm;
  // Norm of the compatible-feature residual at `x*`; ~0 by construction.
  double projection_residual;
} NgOracleReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none. The
// pointer stays valid until the next failing call on the same thread.
const char *ng_last_error_message(void);

// Forgets the last error message of this thread.
void ng_clear_last_error(void);

// Library version as a static NUL-terminated string.
const char *ng_version(void);

// Creates an environment from an id (`cartpole`, `acrobot`, `mountaincar`,
// `chain:<n>:<seed>`); `seed` drives resets and transition noise.
//
// # Safety
// `id` must be a NUL-terminated string; `out` must be writable.
enum NgStatus ng_env_new(const char *id, uint64_t seed, struct NgEnv **out);

// Releases an environment; null is ignored.
//
// # Safety
// `env` must come from [`ng_env_new`] and not be used afterwards.
void ng_env_free(struct NgEnv *env);

// Observation length; 0 for a null handle.
//
// # Safety
// `env` must be null or a live handle.
size_t ng_env_obs_dim(const struct NgEnv *env);

// Number of discrete actions; 0 for a null handle.
//
// # Safety
// `env` must be null or a live handle.
size_t ng_env_n_actions(const struct NgEnv *env);

// Starts an episode and writes the first observation to `obs[0..obs_len]`.
//
// # Safety
// `env` must be a live handle; `obs` must hold `obs_len` doubles.
enum NgStatus ng_env_reset(struct NgEnv *env, double *obs, size_t obs_len);

// Applies `action`, writes the next observation to `obs` and the reward
// and end flags to `step`.
//
// # Safety
// `env` must be a live handle; `obs` must hold `obs_len` doubles; `step`
// must be writable.
enum NgStatus ng_env_step(struct NgEnv *env,
                          size_t action,
                          double *obs,
                          size_t obs_len,
                          struct NgStep *step);

// Loads a policy parameter file written by training.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum NgStatus ng_policy_load(const char *path, struct NgPolicy **out);

// Writes the policy parameters to `path`.
//
// # Safety
// `policy` must be a live handle; `path` a NUL-terminated string.
enum NgStatus ng_policy_save(const struct NgPolicy *policy, const char *path);

// Releases a policy; null is ignored.
//
// # Safety
// `policy` must come from this library and not be used afterwards.
void ng_policy_free(struct NgPolicy *policy);

// Number of actions the policy chooses between; 0 for a null handle.
//
// # Safety
// `policy` must be null or a live handle.
size_t ng_policy_n_actions(const struct NgPolicy *policy);

// Writes `π(·|obs)` to `probs[0..n_actions]`.
//
// # Safety
// `policy` must be a live handle; `obs` must hold `obs_len` doubles and
// `probs` `n_actions` doubles.
enum NgStatus ng_policy_action_probs(const struct NgPolicy *policy,
                                     const double *obs,
                                     size_t obs_len,
                                     double *probs,
                                     size_t n_actions);

// Mean and population standard deviation of `episodes` returns of the
// policy on a fresh environment `env_id`, seeded with `seed`.
//
// # Safety
// `policy` must be a live handle; `env_id` a NUL-terminated string; `mean`
// and `std_dev` writable.
enum NgStatus ng_policy_evaluate(const struct NgPolicy *policy,
                                 const char *env_id,
                                 size_t episodes,
                                 uint64_t seed,
                                 double *mean,
                                 double *std_dev);

// Creates an agent from `key = value` lines (the format of a run's
// `config.txt`; `algo` and `env` are required).
//
// # Safety
// `config` must be a NUL-terminated string; `out` must be writable.
enum NgStatus ng_agent_new(const char *config, struct NgAgent **out);

// Releases an agent; null is ignored.
//
// # Safety
// `agent` must come from [`ng_agent_new`] and not be used afterwards.
void ng_agent_free(struct NgAgent *agent);

// Runs one training episode. `record` may be null.
//
// # Safety
// `agent` must be a live handle; `record` null or writable.
enum NgStatus ng_agent_train_episode(struct NgAgent *agent, struct NgEpisode *record);

// Copies the agent's current policy into a new policy handle.
//
// # Safety
// `agent` must be a live handle; `out` writable.
enum NgStatus ng_agent_policy(const struct NgAgent *agent, struct NgPolicy **out);

// Solves a `chain:<n>:<seed>` MDP exactly under `policy`, whose input
// size must equal the number of states.
//
// # Safety
// `env_id` must be a NUL-terminated string; `policy` a live handle;
// `report` writable.
enum NgStatus ng_oracle_solve(const char *env_id,
                              const struct NgPolicy *policy,
                              struct NgOracleReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NATGRAD_H */
