#ifndef SCIU_H
#define SCIU_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. The numeric values of `SCIU_STATUS_INVALID_ARGUMENT`,
 * `SCIU_STATUS_DEGENERATE` and `SCIU_STATUS_NUMERIC` match the CLI exit codes.
 */
typedef enum SciuStatus {
  SCIU_STATUS_OK = 0,
  SCIU_STATUS_NULL_POINTER = 1,
  SCIU_STATUS_INVALID_ARGUMENT = 2,
  SCIU_STATUS_DEGENERATE = 3,
  SCIU_STATUS_NUMERIC = 4,
  SCIU_STATUS_IO = 5,
  SCIU_STATUS_PARSE = 6,
  SCIU_STATUS_INTERNAL = 7,
} SciuStatus;

typedef enum SciuMode {
  SCIU_MODE_BASELINE = 0,
  SCIU_MODE_CGP = 1,
  SCIU_MODE_FGC = 2,
  SCIU_MODE_SCIU = 3,
} SciuMode;

/**
 * Opaque dataset handle.
 */
typedef struct SciuDataset SciuDataset;

/**
 * Opaque run report handle.
 */
typedef struct SciuReport SciuReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into the library from the same thread.
 */
const char *sciu_last_error(void);

/**
 * Library version as a static string.
 */
const char *sciu_version(void);

/**
 * Generates a synthetic dataset. `synth_json` may be null.
 *
 * # Safety
 * `synth_json` must be null or a valid C string; `out` must be writable.
 */
enum SciuStatus sciu_dataset_generate(const char *synth_json, struct SciuDataset **out);

/**
 * Loads a dataset file. `n_classes` of 0 infers the count from the labels.
 *
 * # Safety
 * `path` must be a valid C string; `out` must be writable.
 */
enum SciuStatus sciu_dataset_load(const char *path, size_t n_classes, struct SciuDataset **out);

/**
 * # Safety
 * `dataset` must be a live handle; `path` a valid C string.
 */
enum SciuStatus sciu_dataset_save(const struct SciuDataset *dataset, const char *path);

/**
 * Copy of `dataset` with oracle fields removed.
 *
 * # Safety
 * `dataset` must be a live handle; `out` must be writable.
 */
enum SciuStatus sciu_dataset_strip_oracle(const struct SciuDataset *dataset,
                                          struct SciuDataset **out);

/**
 * # Safety
 * `dataset` must be a live handle; `len` must be writable.
 */
enum SciuStatus sciu_dataset_len(const struct SciuDataset *dataset, size_t *len);

/**
 * # Safety
 * `dataset` must be null or a handle from this library, freed once.
 */
void sciu_dataset_free(struct SciuDataset *dataset);

/**
 * Default training config as JSON. Free with [`sciu_string_free`].
 *
 * # Safety
 * `out` must be writable.
 */
enum SciuStatus sciu_default_config_json(char **out);

/**
 * Runs one pipeline mode (a [`SciuMode`] value). `config_json` may be null.
 *
 * # Safety
 * `dataset` must be a live handle; `config_json` null or a valid C string;
 * `out` must be writable.
 */
enum SciuStatus sciu_run(const struct SciuDataset *dataset,
                         uint32_t mode,
                         const char *config_json,
                         struct SciuReport **out);

/**
 * Test-split weighted average recall.
 *
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum SciuStatus sciu_report_war(const struct SciuReport *report, double *out);

/**
 * Test-split unweighted average recall.
 *
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum SciuStatus sciu_report_uar(const struct SciuReport *report, double *out);

/**
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum SciuStatus sciu_report_pruned(const struct SciuReport *report, size_t *out);

/**
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum SciuStatus sciu_report_corrected(const struct SciuReport *report, size_t *out);

/**
 * Full report as JSON, byte-identical to the CLI's `report.struct`.
 *
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum SciuStatus sciu_report_to_json(const struct SciuReport *report, char **out);

/**
 * # Safety
 * `report` must be null or a handle from this library, freed once.
 */
void sciu_report_free(struct SciuReport *report);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void sciu_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCIU_H */
