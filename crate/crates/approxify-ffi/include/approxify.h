#ifndef APPROXIFY_H
#define APPROXIFY_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum ApxStatus {
  APX_OK = 0,
  APX_ERR_INVALID_ARGUMENT = 1,
  APX_ERR_PARSE = 2,
  APX_ERR_IO = 3,
  APX_ERR_CONFIG = 4,
  APX_ERR_RUNTIME = 5,
  APX_ERR_NO_VIABLE_CAPACITOR = 6,
  APX_ERR_NO_FEASIBLE_POINT = 7,
} ApxStatus;

/**
 * Opaque parsed program.
 */
typedef struct ApxProgram ApxProgram;

/**
 * Summary of one intermittent simulation.
 */
typedef struct ApxSimStats {
  bool completed;
  uint64_t total_cycles;
  uint64_t logical_cycles;
  uint64_t checkpoints;
  uint64_t reboots;
  uint64_t sim_time_ms;
} ApxSimStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, or null.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *apx_last_error(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must be a pointer previously returned by an `apx_*` function that
 * documents this free, and must not have been freed already.
 */
void apx_string_free(char *s);

/**
 * Parse ApproxC source text into a program handle.
 *
 * # Safety
 * `source` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum ApxStatus apx_program_parse(const char *source, struct ApxProgram **out);

/**
 * Parse an `.axc` file into a program handle.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum ApxStatus apx_program_parse_file(const char *path, struct ApxProgram **out);

/**
 * Destroy a program handle.
 *
 * # Safety
 * `p` must come from `apx_program_parse*` and not be freed twice.
 */
void apx_program_free(struct ApxProgram *p);

/**
 * Canonical source text of a program. Free with `apx_string_free`.
 *
 * # Safety
 * `p` must be a live program handle.
 */
char *apx_program_pretty(const struct ApxProgram *p);

/**
 * Number of approximable blocks (loops and functions).
 *
 * # Safety
 * `p` must be a live program handle and `out` a valid pointer.
 */
enum ApxStatus apx_program_block_count(const struct ApxProgram *p, uintptr_t *out);

/**
 * JSON description of the approximable blocks. Free with `apx_string_free`.
 *
 * # Safety
 * `p` must be a live program handle.
 */
char *apx_program_sites_json(const struct ApxProgram *p);

/**
 * Apply one approximation technique to one block, producing a new handle.
 * `technique` is one of `truncation`, `sampling`, `random`, `memo`.
 *
 * # Safety
 * `p` must be a live program handle; `technique` a valid string; `out` a
 * valid pointer.
 */
enum ApxStatus apx_program_transform(const struct ApxProgram *p,
                                     const char *technique,
                                     double param,
                                     uint32_t block_id,
                                     uint32_t capacity,
                                     uint64_t seed,
                                     struct ApxProgram **out);

/**
 * Simulate one intermittent run of a source file on a platform preset.
 *
 * # Safety
 * All pointer arguments must be valid; `stats` must point to writable
 * memory.
 */
enum ApxStatus apx_simulate_file(const char *source_path,
                                 const char *trace_path,
                                 double cap_uf,
                                 const char *platform_preset,
                                 uint64_t seed,
                                 struct ApxSimStats *stats);

/**
 * Run the whole pipeline from a JSON config file; artifacts are written to
 * the configured output directory.
 *
 * # Safety
 * `config_path` must be a valid NUL-terminated string.
 */
enum ApxStatus apx_run_pipeline(const char *config_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* APPROXIFY_H */
