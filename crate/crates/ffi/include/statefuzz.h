#ifndef STATEFUZZ_H
#define STATEFUZZ_H

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

/**
 * Result codes shared by every fallible function.
 */
typedef enum StfStatus {
  STF_STATUS_OK = 0,
  STF_STATUS_NULL_POINTER = 1,
  STF_STATUS_INVALID_UTF8 = 2,
  STF_STATUS_EXECUTION_ALREADY_ACTIVE = 3,
  STF_STATUS_NO_ACTIVE_EXECUTION = 4,
  STF_STATUS_UNKNOWN_TARGET = 5,
  STF_STATUS_UNKNOWN_VARIANT = 6,
  STF_STATUS_EMPTY_CORPUS = 7,
  STF_STATUS_TARGET_INIT_FAILURE = 8,
  STF_STATUS_NOT_REPRODUCIBLE = 9,
  STF_STATUS_MANIFEST = 10,
  STF_STATUS_CONFIG = 11,
  STF_STATUS_IO = 12,
  STF_STATUS_JSON = 13,
  STF_STATUS_NOT_ATTACHED = 14,
  STF_STATUS_PANIC = 15,
} StfStatus;

/**
 * Opaque handle to a state transition tree.
 */
typedef struct StfStt StfStt;

/**
 * Summary of a finished campaign.
 */
typedef struct StfCampaignResult {
  uint64_t executions;
  size_t transition_coverage;
  size_t stt_nodes;
  size_t corpus_size;
  bool crashed;
  /**
   * Executions up to and including the crashing one; zero without a crash.
   */
  uint64_t crash_execution;
} StfCampaignResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last error on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *stf_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void stf_string_free(char *s);

/**
 * Creates an empty tree. Returns null if `repetition_cap` is zero.
 */
struct StfStt *stf_stt_new(uint32_t repetition_cap);

/**
 * Destroys a tree. Null is ignored. A tree attached to the runtime stays
 * alive until it is detached.
 *
 * # Safety
 * `stt` must be null or a handle from [`stf_stt_new`] not yet freed.
 */
void stf_stt_free(struct StfStt *stt);

/**
 * Starts recording an execution.
 *
 * # Safety
 * `stt` must be a live handle.
 */
enum StfStatus stf_stt_begin(const struct StfStt *stt);

/**
 * Records that `variable` was assigned `value`.
 *
 * # Safety
 * `stt` must be a live handle and `variable` a NUL-terminated string.
 */
enum StfStatus stf_stt_update(const struct StfStt *stt, const char *variable, int64_t value);

/**
 * Finishes the execution. Writes the id of the node it ended at and the
 * number of nodes it created; either pointer may be null.
 *
 * # Safety
 * `stt` must be a live handle; non-null out-pointers must be writable.
 */
enum StfStatus stf_stt_end(const struct StfStt *stt, uint32_t *terminal, size_t *new_nodes);

/**
 * Number of nodes other than the root. Zero for a null handle.
 *
 * # Safety
 * `stt` must be null or a live handle.
 */
size_t stf_stt_node_count(const struct StfStt *stt);

/**
 * Number of distinct execution paths observed. Zero for a null handle.
 *
 * # Safety
 * `stt` must be null or a live handle.
 */
size_t stf_stt_transition_coverage(const struct StfStt *stt);

/**
 * Serializes the tree and its compacted state machine as JSON.
 *
 * # Safety
 * `stt` must be a live handle and `json` writable.
 */
enum StfStatus stf_stt_to_json(const struct StfStt *stt, char **json);

/**
 * Routes `__stt_update` calls to `stt`, replacing any previous tree.
 *
 * # Safety
 * `stt` must be a live handle.
 */
enum StfStatus stf_runtime_attach(const struct StfStt *stt);

/**
 * Stops routing `__stt_update` calls.
 */
void stf_runtime_detach(void);

/**
 * Entry point called by instrumented code. Updates outside an execution,
 * or with no tree attached, are dropped; the reason is kept as the last
 * error.
 *
 * # Safety
 * `name` must be a NUL-terminated string.
 */
void __stt_update(const char *name, long long value);

/**
 * Scans `count` C source files and writes the variable manifest text.
 *
 * # Safety
 * `paths` must point to `count` NUL-terminated strings and `manifest` be
 * writable.
 */
enum StfStatus stf_svscan(const char *const *paths, size_t count, char **manifest);

/**
 * Inserts `__stt_update` calls into `source` before every assignment of a
 * manifest variable. Writes the instrumented text and the number of
 * assignments that could not be instrumented.
 *
 * # Safety
 * String arguments must be NUL-terminated; out-pointers must be writable
 * (`conflicts` may be null).
 */
enum StfStatus stf_instrument(const char *source,
                              const char *file,
                              const char *manifest,
                              char **instrumented,
                              size_t *conflicts);

/**
 * The C header declaring `__stt_update`, for instrumented sources.
 */
char *stf_runtime_header(void);

/**
 * Fuzzes a built-in target from its own seed corpus for at most
 * `max_executions` executions, stopping at the first crash.
 *
 * # Safety
 * `target` and `variant` must be NUL-terminated; `result` must be writable.
 */
enum StfStatus stf_campaign_run(const char *target,
                                const char *variant,
                                uint64_t max_executions,
                                uint64_t rng_seed,
                                struct StfCampaignResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STATEFUZZ_H */
