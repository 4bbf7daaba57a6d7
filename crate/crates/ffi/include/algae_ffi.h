#ifndef ALGAE_FFI_H
#define ALGAE_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AlgaeStatus {
  ALGAE_STATUS_OK = 0,
  ALGAE_STATUS_NULL_POINTER = 1,
  ALGAE_STATUS_INVALID_ARGUMENT = 2,
  ALGAE_STATUS_VALIDATION = 3,
  ALGAE_STATUS_IO = 4,
  ALGAE_STATUS_PANIC = 5,
} AlgaeStatus;

/**
 * A trained classifier.
 */
typedef struct AlgaeModel AlgaeModel;

/**
 * Organisms found in a corrected stack, with their feature vectors.
 */
typedef struct AlgaeSegmentation AlgaeSegmentation;

/**
 * A multi-band image stack.
 */
typedef struct AlgaeStack AlgaeStack;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *algae_last_error(void);

/**
 * Loads a stack from a directory or manifest path.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum AlgaeStatus algae_stack_load(const char *path, struct AlgaeStack **out);

/**
 * Builds a stack from `bands` planes of `width * height` doubles each.
 * `role` is 0 raw, 1 background, 2 corrected.
 *
 * # Safety
 * `data` must hold `bands * width * height` values and `wavelengths_nm` `bands`.
 */
enum AlgaeStatus algae_stack_new(const double *data,
                                 size_t width,
                                 size_t height,
                                 size_t bands,
                                 const double *wavelengths_nm,
                                 double pixel_pitch_um,
                                 uint32_t role,
                                 struct AlgaeStack **out);

/**
 * # Safety
 * `dir` must be a NUL-terminated string and `stack` a live handle.
 */
enum AlgaeStatus algae_stack_save(const struct AlgaeStack *stack, const char *dir);

/**
 * # Safety
 * `stack` must be null or a handle not yet freed.
 */
void algae_stack_free(struct AlgaeStack *stack);

/**
 * # Safety
 * Output pointers must be writable.
 */
enum AlgaeStatus algae_stack_dims(const struct AlgaeStack *stack,
                                  size_t *width,
                                  size_t *height,
                                  size_t *bands);

/**
 * Copies one band, row-major, into `out` (at least `width * height` values).
 *
 * # Safety
 * `out` must be writable for `len` doubles.
 */
enum AlgaeStatus algae_stack_band(const struct AlgaeStack *stack,
                                  size_t band,
                                  double *out,
                                  size_t len);

/**
 * # Safety
 * `out` must be writable.
 */
enum AlgaeStatus algae_stack_wavelength(const struct AlgaeStack *stack, size_t band, double *out);

/**
 * Background estimation and subtraction. `config_json` may be null for
 * defaults; otherwise a pipeline configuration document.
 *
 * # Safety
 * `raw` must be a live handle and `out` writable.
 */
enum AlgaeStatus algae_stack_correct(const struct AlgaeStack *raw,
                                     const char *config_json,
                                     struct AlgaeStack **out);

/**
 * Thresholds, labels and measures every organism in a corrected stack.
 *
 * # Safety
 * `corrected` must be a live handle and `out` writable.
 */
enum AlgaeStatus algae_segment(const struct AlgaeStack *corrected,
                               const char *config_json,
                               struct AlgaeSegmentation **out);

/**
 * # Safety
 * `seg` must be null or a handle not yet freed.
 */
void algae_segmentation_free(struct AlgaeSegmentation *seg);

/**
 * Number of organisms and the width of a feature row (5 + bands).
 *
 * # Safety
 * Output pointers must be writable.
 */
enum AlgaeStatus algae_segmentation_dims(const struct AlgaeSegmentation *seg,
                                         size_t *organisms,
                                         size_t *feature_dim);

/**
 * Component id per pixel (0 background), row-major. Ids of organisms
 * dropped by the minimum-area filter still appear here.
 *
 * # Safety
 * `out` must be writable for `len` values.
 */
enum AlgaeStatus algae_segmentation_labels(const struct AlgaeSegmentation *seg,
                                           uint32_t *out,
                                           size_t len);

/**
 * Component id of each organism, in feature-row order.
 *
 * # Safety
 * `out` must be writable for `len` values.
 */
enum AlgaeStatus algae_segmentation_ids(const struct AlgaeSegmentation *seg,
                                        uint32_t *out,
                                        size_t len);

/**
 * Row-major feature matrix: area, convex area, eccentricity, equivalent
 * diameter, extent, then one mean intensity per band.
 *
 * # Safety
 * `out` must be writable for `len` doubles.
 */
enum AlgaeStatus algae_segmentation_features(const struct AlgaeSegmentation *seg,
                                             double *out,
                                             size_t len);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum AlgaeStatus algae_model_load(const char *path, struct AlgaeModel **out);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void algae_model_free(struct AlgaeModel *model);

/**
 * Width the model consumes and number of classes it predicts.
 *
 * # Safety
 * Output pointers must be writable.
 */
enum AlgaeStatus algae_model_dims(const struct AlgaeModel *model,
                                  size_t *input_dim,
                                  size_t *num_classes);

/**
 * Classifies `rows` feature rows of width `dim`. Rows may be in the model's
 * own layout (`dim` equal to its input width) or full rows as produced by
 * [`algae_segmentation_features`]. `probs` may be null; otherwise it
 * receives `rows * num_classes` probabilities.
 *
 * # Safety
 * `features` must hold `rows * dim` doubles, `labels` `rows` slots and
 * `probs`, when non-null, `rows * num_classes` slots.
 */
enum AlgaeStatus algae_model_predict(const struct AlgaeModel *model,
                                     const double *features,
                                     size_t rows,
                                     size_t dim,
                                     uint32_t *labels,
                                     double *probs);

/**
 * Otsu on a histogram: the last background bin of the optimal split.
 *
 * # Safety
 * `hist` must hold `bins` values and `out_bin` be writable.
 */
enum AlgaeStatus algae_otsu_bin(const uint64_t *hist, size_t bins, size_t *out_bin);

/**
 * Two-sided paired t-test of `a` against `b`. `t` is infinite when the
 * differences have zero spread and nonzero mean.
 *
 * # Safety
 * `a` and `b` must hold `n` doubles; outputs must be writable.
 */
enum AlgaeStatus algae_paired_t_test(const double *a,
                                     const double *b,
                                     size_t n,
                                     double alpha,
                                     double *t,
                                     double *p_value,
                                     bool *reject);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ALGAE_FFI_H */
