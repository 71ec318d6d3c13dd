#ifndef FORMATION_GENIUS_H
#define FORMATION_GENIUS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FgStatus {
  FG_STATUS_OK = 0,
  FG_STATUS_NULL_ARGUMENT = 1,
  FG_STATUS_INVALID_UTF8 = 2,
  FG_STATUS_IO = 3,
  FG_STATUS_PARSE = 4,
  FG_STATUS_VALIDATION = 5,
  FG_STATUS_INVALID_MATRIX = 6,
  FG_STATUS_UNKNOWN_COMPONENT = 7,
  FG_STATUS_ALREADY_COMMITTED = 8,
  FG_STATUS_NO_PENDING_COMPONENT = 9,
  FG_STATUS_NOT_EVALUATED = 10,
  FG_STATUS_NO_FEASIBLE_COMBINATION = 11,
  FG_STATUS_INFEASIBLE_SELECTION = 12,
  FG_STATUS_REPLAY_MISMATCH = 13,
  FG_STATUS_PANIC = 14,
} FgStatus;

/**
 * Loaded catalog. Shared by every session created from it.
 */
typedef struct FgCatalog FgCatalog;

/**
 * One migration session.
 */
typedef struct FgSession FgSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static string.
 */
const char *fg_version(void);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library on the same thread.
 */
const char *fg_last_error(void);

void fg_string_free(char *s);

enum FgStatus fg_catalog_load(const char *path, struct FgCatalog **out);

enum FgStatus fg_catalog_from_json(const char *json, struct FgCatalog **out);

enum FgStatus fg_catalog_counts(const struct FgCatalog *catalog, size_t *images, size_t *services);

void fg_catalog_free(struct FgCatalog *catalog);

/**
 * Starts a session over `formation_json`. A non-zero `logical_clock` stamps
 * events with a counter instead of wall-clock milliseconds, which makes the
 * event log reproducible.
 */
enum FgStatus fg_session_new(const struct FgCatalog *catalog,
                             const char *session_id,
                             const char *formation_json,
                             bool logical_clock,
                             struct FgSession **out);

/**
 * Rebuilds a session from a recorded event log, checking every evaluation.
 */
enum FgStatus fg_session_replay(const struct FgCatalog *catalog,
                                const char *log_json,
                                struct FgSession **out);

void fg_session_free(struct FgSession *session);

/**
 * Makes `component` pending. `candidates_json` (nullable) receives the
 * candidate image ids as a JSON array.
 */
enum FgStatus fg_session_select(struct FgSession *session,
                                const char *component,
                                char **candidates_json);

enum FgStatus fg_session_set_preferences(struct FgSession *session,
                                         const char *component,
                                         const char *preferences_json);

/**
 * Evaluates the pending component. The recommendation is written to
 * `result_json` and must be released with `fg_string_free`.
 */
enum FgStatus fg_session_evaluate(struct FgSession *session, char **result_json);

/**
 * Commits a pair for the pending component. `note` and `entry_json` may be
 * null.
 */
enum FgStatus fg_session_commit(struct FgSession *session,
                                const char *image,
                                const char *service,
                                const char *note,
                                char **entry_json);

enum FgStatus fg_session_event_log(const struct FgSession *session, char **log_json);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* FORMATION_GENIUS_H */
