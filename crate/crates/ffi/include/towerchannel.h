/* C interface for the towerchannel payment-channel simulator. */

#ifndef TOWERCHANNEL_H
#define TOWERCHANNEL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum twc_status {
  TWC_OK = 0,
  TWC_NULL_ARGUMENT = 1,
  TWC_INVALID_UTF8 = 2,
  TWC_INVALID_JSON = 3,
  TWC_INVALID_SCENARIO = 4,
  TWC_RUN_FAILED = 5,
  TWC_FORMAT_MISMATCH = 6,
} twc_status;

/**
 * Opaque parsed scenario configuration.
 */
typedef struct twc_scenario twc_scenario;

/**
 * Opaque completed run: trace, metrics, and violations.
 */
typedef struct twc_trace twc_trace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parse a scenario config from JSON and validate it.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be a valid
 * pointer. On success `*out` owns the scenario.
 */
enum twc_status twc_scenario_parse(const char *json, struct twc_scenario **out);

/**
 * Release a scenario handle. Null is a no-op.
 *
 * # Safety
 * `scenario` must come from `twc_scenario_parse` and not be freed twice.
 */
void twc_scenario_free(struct twc_scenario *scenario);

/**
 * Override the seed of a parsed scenario.
 *
 * # Safety
 * `scenario` must be a live handle from `twc_scenario_parse`.
 */
enum twc_status twc_scenario_set_seed(struct twc_scenario *scenario, uint64_t seed);

/**
 * Execute a scenario to completion. The run is deterministic: the same
 * scenario always yields byte-identical traces.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be valid. On success
 * `*out` owns the trace.
 */
enum twc_status twc_scenario_run(const struct twc_scenario *scenario, struct twc_trace **out);

/**
 * Release a trace handle. Null is a no-op.
 *
 * # Safety
 * `trace` must come from `twc_scenario_run` and not be freed twice.
 */
void twc_trace_free(struct twc_trace *trace);

/**
 * The JSON-lines trace: one object per block.
 *
 * # Safety
 * `trace` must be live; `out` must be valid. Free `*out` with
 * `twc_string_free`.
 */
enum twc_status twc_trace_to_jsonl(const struct twc_trace *trace, char **out);

/**
 * The metrics report plus any violations, as pretty JSON.
 *
 * # Safety
 * Same contract as [`twc_trace_to_jsonl`].
 */
enum twc_status twc_trace_metrics_json(const struct twc_trace *trace, char **out);

/**
 * Number of blocks the run produced; zero for a null handle.
 *
 * # Safety
 * `trace` must be null or a live handle.
 */
uint64_t twc_trace_block_count(const struct twc_trace *trace);

/**
 * Number of in-run assertion violations; zero means the run passed.
 *
 * # Safety
 * `trace` must be null or a live handle.
 */
uint64_t twc_trace_violation_count(const struct twc_trace *trace);

/**
 * Check the golden wire-format vectors.
 */
enum twc_status twc_verify_formats(void);

/**
 * Library version as a static string; do not free.
 */
const char *twc_version(void);

/**
 * Release a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `text` must come from this library and not be freed twice.
 */
void twc_string_free(char *text);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOWERCHANNEL_H */
