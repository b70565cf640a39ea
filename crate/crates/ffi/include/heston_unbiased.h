#ifndef HESTON_UNBIASED_H
#define HESTON_UNBIASED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HuStatus {
  HU_STATUS_OK = 0,
  HU_STATUS_NULL_POINTER = 1,
  HU_STATUS_INVALID_UTF8 = 2,
  HU_STATUS_CONFIG = 3,
  HU_STATUS_PARAMETER = 4,
  HU_STATUS_UNSUPPORTED = 5,
  HU_STATUS_DIAGNOSTIC = 6,
  HU_STATUS_OUT_OF_RANGE = 7,
  HU_STATUS_IO = 8,
  HU_STATUS_INTERNAL = 9,
  HU_STATUS_PANIC = 10,
} HuStatus;

/**
 * Opaque engine handle.
 */
typedef struct HuEngine HuEngine;

/**
 * Result of one estimator run.
 */
typedef struct HuPriceResult {
  double mean;
  double std_error;
  /**
   * Lower end of the 95% confidence interval.
   */
  double ci_lo;
  double ci_hi;
  /**
   * Average cost per sample in level-0 path units.
   */
  double avg_work;
  uint64_t n_samples;
} HuPriceResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds an engine from a NUL-terminated JSON configuration.
 *
 * # Safety
 * `config_json` must be a valid C string and `out_engine` a writable pointer.
 */
enum HuStatus hu_engine_new(const char *config_json, struct HuEngine **out_engine);

/**
 * Releases an engine. Null is ignored.
 *
 * # Safety
 * `engine` must come from [`hu_engine_new`] and not be used afterwards.
 */
void hu_engine_free(struct HuEngine *engine);

/**
 * Number of payoffs in the configuration; 0 for a null handle.
 *
 * # Safety
 * `engine` must be null or a live handle.
 */
size_t hu_engine_payoff_count(const struct HuEngine *engine);

/**
 * Counts validation errors and warnings. Returns `HU_STATUS_CONFIG` when
 * there is at least one error; the first one is the last-error message.
 *
 * # Safety
 * `engine` must be a live handle; the counters may be null.
 */
enum HuStatus hu_engine_validate(const struct HuEngine *engine,
                                 size_t *out_errors,
                                 size_t *out_warnings);

/**
 * Unbiased coupled-sum price of payoff `payoff_index`. `workers == 0` uses every core.
 *
 * # Safety
 * `engine` must be a live handle and `out` writable.
 */
enum HuStatus hu_engine_price(const struct HuEngine *engine,
                              size_t payoff_index,
                              uint64_t n_samples,
                              uint64_t seed,
                              size_t workers,
                              struct HuPriceResult *out);

/**
 * Plain Monte Carlo price on the fixed grid with `2^level` steps.
 *
 * # Safety
 * `engine` must be a live handle and `out` writable.
 */
enum HuStatus hu_engine_price_standard(const struct HuEngine *engine,
                                       size_t payoff_index,
                                       uint32_t level,
                                       uint64_t n_samples,
                                       uint64_t seed,
                                       size_t workers,
                                       struct HuPriceResult *out);

/**
 * Copies the calling thread's last error message into `buf` (truncated,
 * always NUL-terminated when `len > 0`). Returns the full message length
 * without the terminator, or 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t hu_last_error_message(char *buf, size_t len);

/**
 * Library version as a static C string.
 */
const char *hu_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HESTON_UNBIASED_H */
