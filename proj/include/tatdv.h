/* tatdv: couple survey + time-use diary measurement pipeline.
 *
 * C interface over the C++ core. All functions return tatdv_status;
 * human-readable detail for the most recent failure on the calling
 * thread is available via tatdv_last_error().
 */
#ifndef TATDV_H
#define TATDV_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tatdv_status {
  TATDV_OK = 0,
  TATDV_ERROR_CONFIG = 1,
  TATDV_ERROR_STAGE = 2,
  TATDV_ERROR_IO = 3,
  TATDV_ERROR_INVALID_ARGUMENT = 4,
  TATDV_ERROR_INTERNAL = 5
} tatdv_status;

typedef struct tatdv_pipeline tatdv_pipeline;

/* Library version, e.g. "1.0.0". Static storage, do not free. */
const char* tatdv_version(void);

/* Most recent error message on this thread ("" if none). Static
 * thread-local storage, valid until the next tatdv_* call. */
const char* tatdv_last_error(void);

/* Build a pipeline from a JSON config file / string. On failure *out
 * is NULL and the parse/validation error is in tatdv_last_error(). */
tatdv_status tatdv_pipeline_create(const char* config_path, tatdv_pipeline** out);
tatdv_status tatdv_pipeline_create_from_string(const char* config_json, tatdv_pipeline** out);

/* Validate the config without running: input paths resolvable,
 * regression variables known, parameter ranges sane. */
tatdv_status tatdv_pipeline_check(tatdv_pipeline* p);

/* Execute all stages, writing the report bundle to the output
 * directory. Partial reports plus an error manifest are written when
 * a stage fails. */
tatdv_status tatdv_pipeline_run(tatdv_pipeline* p);

/* Override the configured output directory (takes precedence over
 * the config file; the TATDV_OUTPUT_DIR environment variable
 * overrides both). */
tatdv_status tatdv_pipeline_set_output_dir(tatdv_pipeline* p, const char* dir);

void tatdv_pipeline_destroy(tatdv_pipeline* p);

/* Generate a synthetic matched-couple dataset (survey.csv, diary.csv,
 * taxonomy.csv, truth.json) from a generator-spec JSON file into
 * out_dir. spec_path may be NULL for all-default generation. */
tatdv_status tatdv_simulate(const char* spec_path, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* TATDV_H */
