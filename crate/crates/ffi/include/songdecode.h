#ifndef SONGDECODE_H
#define SONGDECODE_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SdStatus {
  SD_STATUS_OK = 0,
  SD_STATUS_NULL_POINTER = 1,
  SD_STATUS_INVALID_ARGUMENT = 2,
  SD_STATUS_CONFIG = 3,
  SD_STATUS_IO = 4,
  SD_STATUS_PARSE = 5,
  SD_STATUS_DATA = 6,
  SD_STATUS_BUFFER_TOO_SMALL = 7,
  SD_STATUS_PANIC = 8,
} SdStatus;

typedef struct SdDataset SdDataset;

typedef struct SdModel SdModel;

typedef struct SdReport SdReport;

typedef struct SdSession SdSession;

/**
 * Generator settings exposed to C. Fields not listed keep their defaults.
 */
typedef struct SdGeneratorConfig {
  uint32_t n_subjects;
  uint32_t n_songs;
  uint32_t n_channels;
  uint32_t sample_rate_hz;
  uint32_t n_bad_channels;
  double class_separation;
  uint64_t seed;
} SdGeneratorConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next call into this library.
 */
const char *sd_last_error_message(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void sd_string_free(char *s);

struct SdGeneratorConfig sd_generator_config_default(void);

/**
 * # Safety
 * `config` must point to a valid config; `out` to writable storage.
 */
enum SdStatus sd_session_generate(const struct SdGeneratorConfig *config,
                                  uint32_t subject_id,
                                  struct SdSession **out);

/**
 * Writes the session under `directory/subject_<id>`.
 *
 * # Safety
 * Pointers must be valid; `directory` NUL-terminated.
 */
enum SdStatus sd_session_write(const struct SdSession *session, const char *directory);

/**
 * Reads a session from its manifest file.
 *
 * # Safety
 * Pointers must be valid; `manifest_path` NUL-terminated.
 */
enum SdStatus sd_session_read(const char *manifest_path, struct SdSession **out);

/**
 * # Safety
 * `session` must be a live handle.
 */
size_t sd_session_n_channels(const struct SdSession *session);

/**
 * # Safety
 * `session` must be a live handle.
 */
size_t sd_session_n_samples(const struct SdSession *session);

/**
 * # Safety
 * `session` must come from this library and not have been freed.
 */
void sd_session_free(struct SdSession *session);

/**
 * Generates, preprocesses and featurizes every subject in `config`.
 * `features_list` is comma separated, e.g. `"spectopo,dfa"`.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum SdStatus sd_dataset_build_generated(const struct SdGeneratorConfig *config,
                                         const char *features_list,
                                         uint32_t epoch_seconds,
                                         struct SdDataset **out);

/**
 * Same as [`sd_dataset_build_generated`] over `subject_<id>` directories under `sessions_root`.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum SdStatus sd_dataset_build_from_dir(const char *sessions_root,
                                        const char *features_list,
                                        uint32_t epoch_seconds,
                                        struct SdDataset **out);

/**
 * # Safety
 * Pointers must be valid; `path` NUL-terminated.
 */
enum SdStatus sd_dataset_read_csv(const char *path, struct SdDataset **out);

/**
 * # Safety
 * Pointers must be valid; `path` NUL-terminated.
 */
enum SdStatus sd_dataset_write_csv(const struct SdDataset *dataset, const char *path);

/**
 * # Safety
 * `dataset` must be a live handle.
 */
size_t sd_dataset_n_rows(const struct SdDataset *dataset);

/**
 * # Safety
 * `dataset` must be a live handle.
 */
size_t sd_dataset_width(const struct SdDataset *dataset);

/**
 * Copies the row labels (song ids) into `out`. `written` receives the
 * required length even when the buffer is too small.
 *
 * # Safety
 * `out` must hold `capacity` values; `written` may be NULL.
 */
enum SdStatus sd_dataset_labels(const struct SdDataset *dataset,
                                uint32_t *out,
                                size_t capacity,
                                size_t *written);

/**
 * Copies the feature matrix, row-major, into `out`.
 *
 * # Safety
 * `out` must hold `capacity` values; `written` may be NULL.
 */
enum SdStatus sd_dataset_features(const struct SdDataset *dataset,
                                  double *out,
                                  size_t capacity,
                                  size_t *written);

/**
 * Stratified split by (subject, song).
 *
 * # Safety
 * Pointers must be valid.
 */
enum SdStatus sd_dataset_split(const struct SdDataset *dataset,
                               double test_fraction,
                               uint64_t seed,
                               struct SdDataset **train_out,
                               struct SdDataset **test_out);

/**
 * # Safety
 * `dataset` must come from this library and not have been freed.
 */
void sd_dataset_free(struct SdDataset *dataset);

/**
 * Fits a model with default hyperparameters. `kind` is one of
 * `knn`, `tree`, `gboost`, `gnb`, `mlp`, `kmeans`, `gmm`.
 *
 * # Safety
 * Pointers must be valid; `kind` NUL-terminated.
 */
enum SdStatus sd_model_fit(const char *kind,
                           uint64_t seed,
                           const struct SdDataset *train,
                           struct SdModel **out);

/**
 * Predicted labels for every row of `dataset`; clustering kinds report the
 * majority label of the assigned cluster.
 *
 * # Safety
 * `out` must hold `capacity` values; `written` may be NULL.
 */
enum SdStatus sd_model_predict(const struct SdModel *model,
                               const struct SdDataset *dataset,
                               uint32_t *out,
                               size_t capacity,
                               size_t *written);

/**
 * Predicted labels for `n_rows` row-major rows of `width` values.
 *
 * # Safety
 * `rows` must hold `n_rows * width` values and `out` at least `n_rows`.
 */
enum SdStatus sd_model_predict_rows(const struct SdModel *model,
                                    const double *rows,
                                    size_t n_rows,
                                    size_t width,
                                    uint32_t *out);

/**
 * Input width the model expects.
 *
 * # Safety
 * `model` must be a live handle.
 */
size_t sd_model_width(const struct SdModel *model);

/**
 * # Safety
 * Pointers must be valid; `path` NUL-terminated.
 */
enum SdStatus sd_model_save(const struct SdModel *model, const char *path);

/**
 * # Safety
 * Pointers must be valid; `path` NUL-terminated.
 */
enum SdStatus sd_model_load(const char *path, struct SdModel **out);

/**
 * # Safety
 * `model` must come from this library and not have been freed.
 */
void sd_model_free(struct SdModel *model);

/**
 * # Safety
 * Pointers must be valid.
 */
enum SdStatus sd_evaluate(const struct SdModel *model,
                          const struct SdDataset *test,
                          struct SdReport **out);

/**
 * Overall accuracy in percent, or NaN for a null handle.
 *
 * # Safety
 * `report` must be a live handle.
 */
double sd_report_accuracy(const struct SdReport *report);

/**
 * # Safety
 * `report` must be a live handle.
 */
size_t sd_report_n_test(const struct SdReport *report);

/**
 * Number of labels, i.e. the side of the confusion matrix.
 *
 * # Safety
 * `report` must be a live handle.
 */
size_t sd_report_n_labels(const struct SdReport *report);

/**
 * Row-major confusion counts, rows = true label.
 *
 * # Safety
 * `out` must hold `capacity` values; `written` may be NULL.
 */
enum SdStatus sd_report_confusion(const struct SdReport *report,
                                  uint64_t *out,
                                  size_t capacity,
                                  size_t *written);

/**
 * Plain-text summary; free with [`sd_string_free`].
 *
 * # Safety
 * Pointers must be valid.
 */
enum SdStatus sd_report_summary(const struct SdReport *report, char **out);

/**
 * Writes `confusion.csv` and `confusion.pgm` into `directory`.
 *
 * # Safety
 * Pointers must be valid; `directory` NUL-terminated.
 */
enum SdStatus sd_report_render(const struct SdReport *report, const char *directory);

/**
 * # Safety
 * `report` must come from this library and not have been freed.
 */
void sd_report_free(struct SdReport *report);

/**
 * DFA scaling exponent with the default box sizes.
 *
 * # Safety
 * `signal` must hold `len` values.
 */
enum SdStatus sd_dfa_alpha(const double *signal, size_t len, double *alpha);

/**
 * Zero-phase notch filter. `out` must hold `len` values and may equal `signal`.
 *
 * # Safety
 * `signal` and `out` must each hold `len` values.
 */
enum SdStatus sd_notch_filter(const double *signal,
                              size_t len,
                              double sample_rate_hz,
                              double notch_hz,
                              double bandwidth_hz,
                              double *out);

/**
 * Relative db8 energy per level, `d1..dL` then `aL`, at the default depth
 * for `sample_rate_hz`.
 *
 * # Safety
 * `signal` must hold `len` values; `out` `capacity` values; `written` may be NULL.
 */
enum SdStatus sd_wavelet_energy(const double *signal,
                                size_t len,
                                uint32_t sample_rate_hz,
                                double *out,
                                size_t capacity,
                                size_t *written);

/**
 * Library version as a static string.
 */
const char *sd_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SONGDECODE_H */
