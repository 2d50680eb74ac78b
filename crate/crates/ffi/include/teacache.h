#ifndef TEACACHE_H
#define TEACACHE_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TcIndicatorMode {
  TC_INDICATOR_MODE_TIMESTEP_EMBEDDING = 0,
  TC_INDICATOR_MODE_NOISY_INPUT = 1,
  TC_INDICATOR_MODE_MODULATED_INPUT = 2,
} TcIndicatorMode;

/**
 * Result code of every fallible call. `TC_STATUS_OK` is zero; on any other
 * value `tc_last_error_message` describes the failure.
 */
typedef enum TcStatus {
  TC_STATUS_OK = 0,
  TC_STATUS_NULL_POINTER = 1,
  TC_STATUS_INVALID_ARGUMENT = 2,
  TC_STATUS_SHAPE_MISMATCH = 3,
  TC_STATUS_INVALID_CONFIG = 4,
  TC_STATUS_BAD_RANGE = 5,
  TC_STATUS_ZERO_DENOMINATOR = 6,
  TC_STATUS_NO_CACHED_RESIDUAL = 7,
  TC_STATUS_FIT_FAILED = 8,
  TC_STATUS_IO = 9,
  TC_STATUS_FORMAT = 10,
  TC_STATUS_MISSING_RESCALER = 11,
  TC_STATUS_BUFFER_TOO_SMALL = 12,
  TC_STATUS_PANIC = 13,
} TcStatus;

/**
 * Opaque model handle.
 */
typedef struct TcModel TcModel;

/**
 * Opaque rescaling-polynomial handle.
 */
typedef struct TcRescaler TcRescaler;

typedef struct TcModelConfig {
  size_t token_count;
  size_t channel_dim;
  size_t hidden_dim;
  size_t num_blocks;
  size_t num_heads;
  size_t cond_dim;
  uint64_t weight_seed;
} TcModelConfig;

/**
 * Sampling and policy options for one run.
 */
typedef struct TcRunOptions {
  size_t steps;
  double beta_start;
  double beta_end;
  uint64_t noise_seed;
  /**
   * Caching threshold; ignored by `tc_run_baseline`.
   */
  double delta;
  enum TcIndicatorMode mode;
} TcRunOptions;

typedef struct TcRunStats {
  size_t steps;
  size_t computed_steps;
  size_t reused_steps;
  size_t total_model_evals;
  uint64_t flops_proxy;
} TcRunStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The reference model configuration (16 tokens, 8 channels, hidden 32,
 * 4 blocks, 4 heads, cond 16, seed 42).
 */
struct TcModelConfig tc_model_config_reference(void);

/**
 * Builds a model with weights drawn from `config->weight_seed`.
 */
enum TcStatus tc_model_new(const struct TcModelConfig *config, struct TcModel **out);

/**
 * Loads a binary weight file written by `tc_model_save`.
 */
enum TcStatus tc_model_load(const char *path, struct TcModel **out);

enum TcStatus tc_model_save(const struct TcModel *model, const char *path);

enum TcStatus tc_model_config(const struct TcModel *model, struct TcModelConfig *out);

/**
 * Number of `double`s in a latent (`token_count * channel_dim`).
 */
enum TcStatus tc_model_latent_len(const struct TcModel *model, size_t *out);

/**
 * Releases a model; NULL is ignored.
 */
void tc_model_free(struct TcModel *model);

/**
 * Builds a rescaler from `count` coefficients `a_0 .. a_{count-1}`.
 */
enum TcStatus tc_rescaler_new(const double *coefficients, size_t count, struct TcRescaler **out);

/**
 * Loads a rescaler text file written by `teacache calibrate`.
 */
enum TcStatus tc_rescaler_load(const char *path, struct TcRescaler **out);

enum TcStatus tc_rescaler_evaluate(const struct TcRescaler *rescaler, double x, double *out);

enum TcStatus tc_rescaler_order(const struct TcRescaler *rescaler, size_t *out);

void tc_rescaler_free(struct TcRescaler *rescaler);

/**
 * `‖a − b‖₁ / ‖b‖₁` over two arrays of `len` doubles.
 */
enum TcStatus tc_rel_l1_distance(const double *a, const double *b, size_t len, double *out);

/**
 * Samples with the caching policy. `rescaler` may be NULL (identity).
 * `latent_out` receives the final latent row-major; `stats_out` may be NULL.
 */
enum TcStatus tc_run_teacache(const struct TcModel *model,
                              const struct TcRunOptions *options,
                              const struct TcRescaler *rescaler,
                              double *latent_out,
                              size_t latent_len,
                              struct TcRunStats *stats_out);

/**
 * Samples without caching.
 */
enum TcStatus tc_run_baseline(const struct TcModel *model,
                              const struct TcRunOptions *options,
                              double *latent_out,
                              size_t latent_len,
                              struct TcRunStats *stats_out);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tc_version(void);

/**
 * Message for the most recent failure on the calling thread, or NULL if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *tc_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TEACACHE_H */
