/* C interface to the cotdistill library.
 *
 * Structured inputs and outputs cross the boundary as UTF-8 JSON text.
 * Strings returned through `char **` are owned by the caller and must be
 * released with cotd_string_free. Error messages are per thread and stay
 * valid until the next call on that thread.
 */
#ifndef COTDISTILL_H
#define COTDISTILL_H

#ifdef __cplusplus
extern "C" {
#endif

#if defined(COTD_BUILDING_LIBRARY)
#define COTD_API __attribute__((visibility("default")))
#else
#define COTD_API
#endif

/* Values double as CLI exit codes. */
typedef enum cotd_status {
  COTD_OK = 0,
  COTD_USAGE = 1,
  COTD_DATA = 2,
  COTD_TRANSPORT = 3,
  COTD_INTERNAL = 4
} cotd_status;

typedef struct cotd_context cotd_context;

COTD_API const char *cotd_version(void);
COTD_API const char *cotd_status_name(cotd_status status);

/* Message for the last failed call on this thread, or "" after a success. */
COTD_API const char *cotd_last_error(void);

COTD_API void cotd_string_free(char *s);

/* Loads a config file (path may be NULL) and applies `overrides_json` (may be
 * NULL) as a merge patch. Relative paths resolve against the config file's
 * directory. */
COTD_API cotd_status cotd_context_new(const char *config_path, const char *overrides_json, cotd_context **out);
COTD_API void cotd_context_free(cotd_context *ctx);

/* Resolved config as JSON. */
COTD_API cotd_status cotd_context_config(const cotd_context *ctx, char **out_json);

/* Runs one of: ingest, generate, emit-train, evaluate, cross-eval, judge,
 * report. `args_json` may be NULL. On success `out_json` (may be NULL)
 * receives the command manifest. */
COTD_API cotd_status cotd_run(cotd_context *ctx, const char *command, const char *args_json, char **out_json);

/* Verbosity for library logging: 0 warnings only, 1 info, 2 debug. */
COTD_API void cotd_set_log_level(int level);

#ifdef __cplusplus
}
#endif

#endif /* COTDISTILL_H */
