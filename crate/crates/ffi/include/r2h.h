#ifndef R2H_H
#define R2H_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum R2hStatus {
  R2H_STATUS_OK = 0,
  R2H_STATUS_NULL_POINTER = 1,
  R2H_STATUS_INVALID_UTF8 = 2,
  R2H_STATUS_INVALID_ARGUMENT = 3,
  R2H_STATUS_NOT_FOUND = 4,
  R2H_STATUS_IO = 5,
  R2H_STATUS_PANIC = 6,
} R2hStatus;

/**
 * Opaque trained helper.
 */
typedef struct R2hHelper R2hHelper;

/**
 * Opaque world graph.
 */
typedef struct R2hWorld R2hWorld;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Valid until the next failing call.
 */
const char *r2h_last_error_message(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void r2h_string_free(char *s);

/**
 * Generates a world with `node_count` viewpoints and default parameters otherwise.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum R2hStatus r2h_world_generate(uint64_t seed, size_t node_count, struct R2hWorld **out);

/**
 * Parses a world from its JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum R2hStatus r2h_world_from_json(const char *json, struct R2hWorld **out);

/**
 * # Safety
 * `world` must be a live handle and `out` a valid pointer.
 */
enum R2hStatus r2h_world_to_json(const struct R2hWorld *world, char **out);

/**
 * # Safety
 * `world` must be a live handle and `out` a valid pointer.
 */
enum R2hStatus r2h_world_node_count(const struct R2hWorld *world, size_t *out);

/**
 * Shortest-path distance in meters between two viewpoint ids.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum R2hStatus r2h_world_distance(const struct R2hWorld *world,
                                  const char *from,
                                  const char *to,
                                  double *out);

/**
 * Releases a world. NULL is ignored.
 *
 * # Safety
 * `world` must come from this library and not be freed twice.
 */
void r2h_world_free(struct R2hWorld *world);

/**
 * Rule-based step parse; writes a JSON array of `{index, text}`.
 *
 * # Safety
 * `response` must be NUL-terminated and `out` a valid pointer.
 */
enum R2hStatus r2h_parse_steps(const char *response, char **out);

/**
 * BLEU-2 of `candidate` against a single reference.
 *
 * # Safety
 * Strings must be NUL-terminated and `out` a valid pointer.
 */
enum R2hStatus r2h_bleu2(const char *candidate, const char *reference, double *out);

/**
 * ROUGE-L F-measure of `candidate` against `reference`.
 *
 * # Safety
 * Strings must be NUL-terminated and `out` a valid pointer.
 */
enum R2hStatus r2h_rouge_l(const char *candidate, const char *reference, double *out);

/**
 * Loads a helper checkpoint.
 *
 * # Safety
 * `path` must be NUL-terminated and `out` a valid pointer.
 */
enum R2hStatus r2h_helper_load(const char *path, struct R2hHelper **out);

/**
 * Answers `inquiry` from observations at `current` toward `goal`.
 *
 * # Safety
 * Handles must be live; strings NUL-terminated; `out` a valid pointer.
 */
enum R2hStatus r2h_helper_respond(const struct R2hHelper *helper,
                                  const struct R2hWorld *world,
                                  const char *current,
                                  const char *goal,
                                  const char *inquiry,
                                  char **out);

/**
 * Releases a helper. NULL is ignored.
 *
 * # Safety
 * `helper` must come from this library and not be freed twice.
 */
void r2h_helper_free(struct R2hHelper *helper);

/**
 * Runs a suite from a TOML configuration; writes the metric report as JSON.
 *
 * # Safety
 * `config_toml` must be NUL-terminated and `out` a valid pointer.
 */
enum R2hStatus r2h_bench_run(const char *config_toml, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* R2H_H */
