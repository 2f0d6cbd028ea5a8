#ifndef DDLEARN_H
#define DDLEARN_H

/* Generated by cbindgen from ddlearn-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum DdlStatus {
  DdlStatus_Ok = 0,
  DdlStatus_NullArgument = 1,
  DdlStatus_InvalidArgument = 2,
  DdlStatus_DataError = 3,
  DdlStatus_NumericError = 4,
  DdlStatus_IoError = 5,
  DdlStatus_InternalError = 6,
} DdlStatus;

/**
 * Classification loss selector.
 */
typedef enum DdlLoss {
  DdlLoss_Square = 0,
  DdlLoss_Exponential = 1,
  DdlLoss_Logistic = 2,
  DdlLoss_SmoothHinge = 3,
} DdlLoss;

/**
 * Dictionary initialization selector.
 */
typedef enum DdlInit {
  DdlInit_FromSamples = 0,
  DdlInit_GaussianRandom = 1,
} DdlInit;

/**
 * Inference mode selector.
 */
typedef enum DdlMode {
  DdlMode_FastTsc = 0,
  DdlMode_FullDsc = 1,
} DdlMode;

/**
 * Opaque trained-model handle.
 */
typedef struct DdlModelHandle DdlModelHandle;

/**
 * Training hyperparameters. `ridge < 0` selects the default (`1e-6 * N`);
 * `hinge_rho`/`hinge_eps` only matter for the smooth hinge loss.
 */
typedef struct DdlTrainConfig {
  uint32_t k;
  uint32_t t;
  enum DdlLoss loss;
  double hinge_rho;
  double hinge_eps;
  uint32_t q_max;
  uint32_t p_max;
  double stop_rel_change;
  double ridge;
  enum DdlInit init;
  uint64_t seed;
  /**
   * Nonzero trains the decoupled baseline instead of the joint model.
   */
  uint8_t baseline;
} DdlTrainConfig;

/**
 * Prediction options mirroring the library's inference settings.
 */
typedef struct DdlPredictOptions {
  enum DdlMode mode;
  /**
   * Nonzero encodes over the identity-augmented dictionary.
   */
  uint8_t robust;
  uint32_t t_test;
  uint32_t e_budget;
} DdlPredictOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ddl_version(void);

/**
 * Last error message for this thread, or NULL when none was recorded.
 * Free the returned string with `ddl_string_free`.
 */
char *ddl_last_error_message(void);

/**
 * Frees a string previously returned by this library.
 *
 * # Safety
 * `s` must be NULL or a pointer returned by `ddl_last_error_message`,
 * not yet freed.
 */
void ddl_string_free(char *s);

/**
 * Frees a model handle. NULL is a no-op.
 *
 * # Safety
 * `handle` must be NULL or a pointer returned by a model-producing
 * function of this library, not yet freed.
 */
void ddl_model_free(struct DdlModelHandle *handle);

/**
 * Loads a model file into a new handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum DdlStatus ddl_model_load(const char *path, struct DdlModelHandle **out);

/**
 * Saves the handle's model to a file.
 *
 * # Safety
 * `handle` must be a live handle; `path` a NUL-terminated string.
 */
enum DdlStatus ddl_model_save(const struct DdlModelHandle *handle, const char *path);

/**
 * Reports the model dimensions. Any output pointer may be NULL to skip it.
 *
 * # Safety
 * `handle` must be a live handle; non-NULL outputs must be writable.
 */
enum DdlStatus ddl_model_dims(const struct DdlModelHandle *handle,
                              uint32_t *out_d,
                              uint32_t *out_k,
                              uint32_t *out_c,
                              uint32_t *out_t);

/**
 * Trains a model from raw arrays. `samples` is column-major `d x n`
 * (sample `i` occupies `samples[i*d .. (i+1)*d]`); `labels` holds `n`
 * class indices below `class_count`.
 *
 * # Safety
 * `samples` must point to `d * n` doubles, `labels` to `n` u32 values,
 * and `out` must be a valid pointer.
 */
enum DdlStatus ddl_train_from_arrays(const double *samples,
                                     uintptr_t d,
                                     uintptr_t n,
                                     const uint32_t *labels,
                                     uint32_t class_count,
                                     struct DdlTrainConfig config,
                                     struct DdlModelHandle **out);

/**
 * Predicts the class of one sample. `out_scores`, when non-NULL, receives
 * `C` per-class hypothesis scores.
 *
 * # Safety
 * `sample` must point to `len` doubles; `out_class` must be valid;
 * `out_scores` must be NULL or point to `C` writable doubles.
 */
enum DdlStatus ddl_model_predict(const struct DdlModelHandle *handle,
                                 const double *sample,
                                 uintptr_t len,
                                 struct DdlPredictOptions options,
                                 uint32_t *out_class,
                                 double *out_scores);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DDLEARN_H */
