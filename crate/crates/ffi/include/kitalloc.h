/* C interface to the kitalloc test-kit allocation engine. */

#ifndef KITALLOC_H
#define KITALLOC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes for every fallible call.
 */
typedef enum KaStatus {
  KA_STATUS_OK = 0,
  KA_STATUS_NULL_ARGUMENT = 1,
  KA_STATUS_INVALID_ARGUMENT = 2,
  KA_STATUS_CONFIG_ERROR = 3,
  KA_STATUS_IO_ERROR = 4,
  KA_STATUS_UTF8_ERROR = 5,
  KA_STATUS_RUNTIME_ERROR = 6,
  /**
   * The requested value is not present (for example a metric that is
   * undefined on a day with no selections).
   */
  KA_STATUS_MISSING_VALUE = 7,
} KaStatus;

/**
 * Per-day metrics addressable through `ka_report_day_metric`.
 */
typedef enum KaDayMetric {
  KA_DAY_METRIC_DAY = 0,
  KA_DAY_METRIC_KITS_BUDGETED = 1,
  KA_DAY_METRIC_KITS_USED = 2,
  KA_DAY_METRIC_POSITIVES_FOUND = 3,
  KA_DAY_METRIC_CUMULATIVE_POSITIVES_FOUND = 4,
  KA_DAY_METRIC_CUMULATIVE_POSITIVES_PRESENT = 5,
  KA_DAY_METRIC_DETECTION_RECALL = 6,
  KA_DAY_METRIC_COHORT_SIZE = 7,
  KA_DAY_METRIC_COHORT_POSITIVITY = 8,
  KA_DAY_METRIC_TV_DIVERGENCE = 9,
  KA_DAY_METRIC_PROBE_LOG_LOSS = 10,
  KA_DAY_METRIC_PROBE_AUC = 11,
  KA_DAY_METRIC_POOLING_TESTS_USED = 12,
  KA_DAY_METRIC_MANDATORY_OVERFLOW = 13,
} KaDayMetric;

/**
 * Pool resolution strategies.
 */
typedef enum KaPoolStrategy {
  KA_POOL_STRATEGY_DORFMAN = 0,
  KA_POOL_STRATEGY_BINARY_SPLIT = 1,
} KaPoolStrategy;

/**
 * Opaque simulation report handle.
 */
typedef struct KaReport KaReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; never freed by the caller.
 */
const char *ka_version(void);

/**
 * Message for the most recent failure on this thread. Valid until the next
 * failing call on the same thread; never freed by the caller.
 */
const char *ka_last_error_message(void);

/**
 * Run a simulation from a config file. `seed_override < 0` keeps the
 * config's seed. On success writes a new report handle to `out`.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum KaStatus ka_simulate_config_file(const char *path,
                                      int64_t seed_override,
                                      struct KaReport **out);

/**
 * Run a simulation from config text in the flat key-value format.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum KaStatus ka_simulate_config_text(const char *text,
                                      int64_t seed_override,
                                      struct KaReport **out);

/**
 * Number of day rows in the report; 0 for a null handle.
 *
 * # Safety
 * `report` must be null or a handle from `ka_simulate_*`.
 */
uint32_t ka_report_num_days(const struct KaReport *report);

/**
 * Read one per-day metric as a double. Booleans come back as 0/1; optional
 * metrics return `MissingValue` on days where they are undefined.
 *
 * # Safety
 * `report` must be a handle from `ka_simulate_*` and `out` a valid pointer.
 */
enum KaStatus ka_report_day_metric(const struct KaReport *report,
                                   uint32_t day_index,
                                   enum KaDayMetric metric,
                                   double *out);

/**
 * Whole report as JSON; free with `ka_string_free`. Null on a null handle.
 *
 * # Safety
 * `report` must be null or a handle from `ka_simulate_*`.
 */
char *ka_report_to_json(const struct KaReport *report);

/**
 * Whole report as CSV; free with `ka_string_free`. Null on a null handle.
 *
 * # Safety
 * `report` must be null or a handle from `ka_simulate_*`.
 */
char *ka_report_to_csv(const struct KaReport *report);

/**
 * Release a report handle. Null is a no-op.
 *
 * # Safety
 * `report` must be null or a handle from `ka_simulate_*`, not yet freed.
 */
void ka_report_free(struct KaReport *report);

/**
 * Release a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void ka_string_free(char *s);

/**
 * Expected tests per person for pooled testing at the given pool size and
 * prevalence.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum KaStatus ka_expected_tests_per_person(uint32_t pool_size,
                                           double prevalence,
                                           enum KaPoolStrategy strategy,
                                           double *out);

/**
 * How many people a kit budget covers in expectation under pooling.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum KaStatus ka_effective_budget(uint64_t kits,
                                  uint32_t pool_size,
                                  double prevalence,
                                  enum KaPoolStrategy strategy,
                                  uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KITALLOC_H */
