#ifndef PASSPORT_H
#define PASSPORT_H

/* Generated by cbindgen from the passport-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes for every FFI entry point.
typedef enum PassportStatus {
  PASSPORT_STATUS_OK = 0,
  PASSPORT_STATUS_NULL_ARGUMENT = 1,
  PASSPORT_STATUS_INVALID_UTF8 = 2,
  PASSPORT_STATUS_LOAD_FAILED = 3,
  PASSPORT_STATUS_PARSE_FAILED = 4,
  PASSPORT_STATUS_PREDICT_FAILED = 5,
  PASSPORT_STATUS_PANIC = 6,
} PassportStatus;

// Opaque engine handle: an immutable corpus view plus a trained model.
typedef struct PassportEngine PassportEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Load a corpus (named by a config file) and a model snapshot directory.
// On success writes an engine handle to `out_engine`; release it with
// [`passport_engine_close`].
//
// # Safety
// `config_path` and `model_dir` must be NUL-terminated strings;
// `out_engine` must be a valid pointer.
enum PassportStatus passport_engine_open(const char *config_path,
                                         const char *model_dir,
                                         struct PassportEngine **out_engine);

// Release an engine handle.
//
// # Safety
// `engine` must be null or a pointer previously returned by
// [`passport_engine_open`] that has not been closed.
void passport_engine_close(struct PassportEngine *engine);

// Predict the country set for a single IPv4 address. On success writes a
// JSON document describing the staged prediction to `out_json`; release
// it with [`passport_string_free`].
//
// # Safety
// `engine` must be a live handle; `ip` a NUL-terminated string; `out_json`
// a valid pointer.
enum PassportStatus passport_predict_ip(const struct PassportEngine *engine,
                                        const char *ip,
                                        char **out_json);

// Predict every responsive hop of raw traceroute text. On success writes
// a JSON array of per-hop outcomes to `out_json`; release it with
// [`passport_string_free`].
//
// # Safety
// `engine` must be a live handle; `text` a NUL-terminated string;
// `out_json` a valid pointer.
enum PassportStatus passport_predict_traceroute(const struct PassportEngine *engine,
                                                const char *text,
                                                char **out_json);

// Speed-of-light feasibility radius in kilometers for a sub-cutoff RTT.
//
// # Safety
// `out_radius_km` must be a valid pointer.
enum PassportStatus passport_radius_km(double min_rtt_ms, double *out_radius_km);

// Release a string allocated by this library.
//
// # Safety
// `s` must be null or a pointer previously returned through an `out_json`
// parameter, not yet freed.
void passport_string_free(char *s);

// Message for the most recent failure on this thread. The pointer stays
// valid until the next failing call on the same thread; never free it.
const char *passport_last_error_message(void);

// Library version as a static string.
const char *passport_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PASSPORT_H */
