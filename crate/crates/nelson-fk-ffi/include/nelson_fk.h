#ifndef NELSON_FK_H
#define NELSON_FK_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum NfkStatus {
  NFK_STATUS_OK = 0,
  NFK_STATUS_NULL_POINTER = 1,
  NFK_STATUS_INVALID_UTF8 = 2,
  NFK_STATUS_CONFIG = 3,
  NFK_STATUS_DOMAIN = 4,
  NFK_STATUS_RUNTIME = 5,
  NFK_STATUS_IO = 6,
  /**
   * The run completed but a verification check failed.
   */
  NFK_STATUS_VERIFICATION_FAILED = 7,
  NFK_STATUS_OUT_OF_RANGE = 8,
  NFK_STATUS_PANIC = 9,
} NfkStatus;

/**
 * Run configuration.
 */
typedef struct NfkConfig NfkConfig;

/**
 * Completed experiment with its in-memory artifacts.
 */
typedef struct NfkRun NfkRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *nfk_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t nfk_last_error(char *buf, size_t len);

/**
 * New configuration with default values.
 */
struct NfkConfig *nfk_config_new(void);

/**
 * Parses a TOML configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NfkStatus nfk_config_from_toml(const char *toml, struct NfkConfig **out);

/**
 * Sets one dotted key such as `model.eps` or `mc.t`. `value` is read as a
 * TOML value; anything that does not parse is taken as a string.
 *
 * # Safety
 * `cfg` must come from this library; `key` and `value` must be
 * NUL-terminated strings.
 */
enum NfkStatus nfk_config_set(struct NfkConfig *cfg, const char *key, const char *value);

/**
 * Canonical TOML form; free with `nfk_string_free`.
 *
 * # Safety
 * `cfg` must come from this library.
 */
char *nfk_config_to_toml(const struct NfkConfig *cfg);

/**
 * # Safety
 * `s` must be null or come from this library.
 */
void nfk_string_free(char *s);

/**
 * # Safety
 * `cfg` must be null or come from this library, and not be used afterwards.
 */
void nfk_config_free(struct NfkConfig *cfg);

/**
 * Runs an experiment (`action`, `energy`, `fiber`, `nonfock`, `bounds`,
 * `verify`). `suites` is a comma-separated list for `verify`, otherwise
 * null. With a non-null `out_dir` the artifacts and a manifest are written
 * there. A failing verification still yields a run handle together with
 * `NfkStatus::VerificationFailed`.
 *
 * # Safety
 * `cfg` must come from this library, string arguments must be null or
 * NUL-terminated, and `out` must be a valid pointer.
 */
enum NfkStatus nfk_run(const struct NfkConfig *cfg,
                       const char *experiment_name,
                       const char *suites,
                       const char *out_dir,
                       struct NfkRun **out);

/**
 * JSON summary, valid while the run handle lives.
 *
 * # Safety
 * `run` must come from this library.
 */
const char *nfk_run_summary(const struct NfkRun *run);

/**
 * Number of artifacts.
 *
 * # Safety
 * `run` must be null or come from this library.
 */
size_t nfk_run_artifact_count(const struct NfkRun *run);

/**
 * Name and body of artifact `index`; both stay valid while the run handle
 * lives.
 *
 * # Safety
 * `run` must come from this library; `name`, `body` and `len` must be
 * valid pointers.
 */
enum NfkStatus nfk_run_artifact(const struct NfkRun *run,
                                size_t index,
                                const char **name,
                                const uint8_t **body,
                                size_t *len);

/**
 * # Safety
 * `run` must be null or come from this library, and not be used afterwards.
 */
void nfk_run_free(struct NfkRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NELSON_FK_H */
