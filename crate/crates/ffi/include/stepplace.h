#ifndef STEPPLACE_H
#define STEPPLACE_H

/* Generated by cbindgen from the stepplace-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a C ABI call.
 */
typedef enum SpStatus {
  SP_STATUS_OK = 0,
  /**
   * A required pointer was null.
   */
  SP_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  SP_STATUS_INVALID_UTF8 = 2,
  SP_STATUS_INVALID_ARGUMENT = 3,
  /**
   * Malformed JSON, JSONL or profile contents.
   */
  SP_STATUS_PARSE = 4,
  SP_STATUS_UNKNOWN_STEP = 5,
  SP_STATUS_UNASSIGNED_STEP = 6,
  SP_STATUS_UNKNOWN_KEY_OBJECT = 7,
  /**
   * A Rust panic was caught at the boundary.
   */
  SP_STATUS_INTERNAL = 8,
} SpStatus;

/**
 * A loaded document profile.
 */
typedef struct SpDocument SpDocument;

/**
 * A loaded spatial profile.
 */
typedef struct SpSpatialProfile SpSpatialProfile;

/**
 * A loaded gaze and hand trace.
 */
typedef struct SpTrace SpTrace;

/**
 * Placement tunables. Obtain defaults from [`sp_place_options_default`].
 */
typedef struct SpPlaceOptions {
  uint64_t seed;
  double t1;
  size_t i_max;
  size_t n_frames;
  /**
   * Index of the last frame in the window; negative selects the last frame.
   */
  int64_t cursor;
  double lambda_v;
  double lambda_r;
  double lambda_ha;
  double lambda_p;
  double label_w;
  double label_h;
} SpPlaceOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next call into this library on the same thread.
 */
const char *sp_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *sp_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void sp_string_free(char *s);

/**
 * Parses a spatial profile from JSON.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a writable pointer.
 */
enum SpStatus sp_spatial_from_json(const char *json, struct SpSpatialProfile **out);

/**
 * Number of cells on a key object, or 0 if it does not exist.
 *
 * # Safety
 * `profile` must be a live handle and `key_object` a nul-terminated string.
 */
size_t sp_spatial_cell_count(const struct SpSpatialProfile *profile, const char *key_object);

/**
 * # Safety
 * `profile` must be null or a live handle from [`sp_spatial_from_json`].
 */
void sp_spatial_free(struct SpSpatialProfile *profile);

/**
 * Parses a document profile from JSON.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a writable pointer.
 */
enum SpStatus sp_document_from_json(const char *json, struct SpDocument **out);

/**
 * # Safety
 * `doc` must be a live handle or null.
 */
size_t sp_document_step_count(const struct SpDocument *doc);

/**
 * Serializes a document profile to a newly allocated JSON string.
 *
 * # Safety
 * `doc` must be a live handle and `out` a writable pointer.
 */
enum SpStatus sp_document_to_json(const struct SpDocument *doc, char **out);

/**
 * # Safety
 * `doc` must be null or a live handle from [`sp_document_from_json`].
 */
void sp_document_free(struct SpDocument *doc);

/**
 * Parses a trace, one JSON frame per line.
 *
 * # Safety
 * `jsonl` must be a nul-terminated string and `out` a writable pointer.
 */
enum SpStatus sp_trace_from_jsonl(const char *jsonl, struct SpTrace **out);

/**
 * # Safety
 * `trace` must be a live handle or null.
 */
size_t sp_trace_len(const struct SpTrace *trace);

/**
 * # Safety
 * `trace` must be null or a live handle from [`sp_trace_from_jsonl`].
 */
void sp_trace_free(struct SpTrace *trace);

struct SpPlaceOptions sp_place_options_default(void);

/**
 * Places one step and writes the placement report as JSON to `report_json`.
 * `options` may be null for defaults.
 *
 * # Safety
 * Handles must be live, `step_id` nul-terminated, `options` null or valid,
 * and `report_json` writable.
 */
enum SpStatus sp_place(const struct SpSpatialProfile *spatial,
                       const struct SpDocument *doc,
                       const struct SpTrace *trace,
                       const char *step_id,
                       const struct SpPlaceOptions *options,
                       char **report_json);

/**
 * Labels `text` with the built-in kitchen vocabulary. `*label` is set to a
 * new string, or to null when no label word occurs.
 *
 * # Safety
 * `text` must be nul-terminated and `label` writable.
 */
enum SpStatus sp_rule_label(const char *text, char **label);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STEPPLACE_H */
