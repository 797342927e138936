/* Generated by cbindgen from crates/ffi; do not edit by hand. */

#ifndef MICRONAS_H
#define MICRONAS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum MnasStatus {
  MNAS_STATUS_OK = 0,
  MNAS_STATUS_NULL_POINTER = 1,
  MNAS_STATUS_INVALID_ARGUMENT = 2,
  MNAS_STATUS_IO = 3,
  MNAS_STATUS_FORMAT = 4,
  MNAS_STATUS_SHAPE = 5,
  MNAS_STATUS_DATA = 6,
  MNAS_STATUS_BUFFER_TOO_SMALL = 7,
  MNAS_STATUS_PANIC = 8,
  MNAS_STATUS_INTERNAL = 9,
} MnasStatus;

// A loaded tree ensemble.
typedef struct MnasEnsemble MnasEnsemble;

// A loaded network.
typedef struct MnasModel MnasModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread, or NULL.
// The pointer stays valid until the next call into this library from the
// same thread.
const char *mnas_last_error(void);

// Library version as a static NUL-terminated string.
const char *mnas_version(void);

// Loads a network file (dense or sparse).
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum MnasStatus mnas_model_load(const char *path, struct MnasModel **out);

// Loads a network from an in-memory file image.
//
// # Safety
// `data` must point to `len` readable bytes and `out` must be valid.
enum MnasStatus mnas_model_load_bytes(const uint8_t *data, size_t len, struct MnasModel **out);

// Writes the model; `sparse` selects the bitmap-compressed layout.
//
// # Safety
// `model` must come from a load call and `path` be NUL-terminated.
enum MnasStatus mnas_model_save(const struct MnasModel *model, const char *path, bool sparse);

// Releases a model. NULL is ignored.
//
// # Safety
// `model` must be NULL or a handle not yet freed.
void mnas_model_free(struct MnasModel *model);

// Input shape per example. Sequence models report `length` timesteps of
// `channels` values; flat models report `length = 0` and the feature
// count in `channels`.
//
// # Safety
// All pointers must be valid.
enum MnasStatus mnas_model_input_shape(const struct MnasModel *model,
                                       size_t *length,
                                       size_t *channels);

// Total and nonzero parameter counts, and memory in KB (nonzero × 4 / 1024).
//
// # Safety
// All pointers must be valid.
enum MnasStatus mnas_model_stats(const struct MnasModel *model,
                                 size_t *total_params,
                                 size_t *nonzero_params,
                                 double *memory_kb);

// Fall probabilities for `batch` examples laid out row-major as
// `batch × length × channels` (or `batch × features` for flat models).
// `output` receives `batch` values.
//
// # Safety
// `input` must hold `batch` examples and `output` room for `batch` floats.
enum MnasStatus mnas_model_predict(const struct MnasModel *model,
                                   const float *input,
                                   size_t batch,
                                   float *output);

// Writes the architecture text (one layer per line) into `buf`.
// `needed` receives the size including the terminating NUL, so a call with
// `capacity = 0` can be used to size the buffer.
//
// # Safety
// `buf` must have `capacity` writable bytes; `needed` may be NULL.
enum MnasStatus mnas_model_describe(const struct MnasModel *model,
                                    char *buf,
                                    size_t capacity,
                                    size_t *needed);

// Memory estimate in KB for an architecture in the text format.
//
// # Safety
// `spec_text` must be NUL-terminated and `memory_kb` valid.
enum MnasStatus mnas_estimate_memory(const char *spec_text, double *memory_kb);

// Loads a tree-ensemble file.
//
// # Safety
// `path` must be NUL-terminated and `out` valid.
enum MnasStatus mnas_ensemble_load(const char *path, struct MnasEnsemble **out);

// Releases an ensemble. NULL is ignored.
//
// # Safety
// `ensemble` must be NULL or a handle not yet freed.
void mnas_ensemble_free(struct MnasEnsemble *ensemble);

// Per-sample class (0 ADL, 1 fall) for `n` rows of 6 values each.
//
// # Safety
// `samples` must hold `6 × n` doubles and `labels` room for `n` bytes.
enum MnasStatus mnas_ensemble_predict(const struct MnasEnsemble *ensemble,
                                      const double *samples,
                                      size_t n,
                                      uint8_t *labels);

// Majority vote over 120-prediction windows with a 12-sample hop.
// `written` receives the window count; `output` must have room for it
// (`(n - 120) / 12 + 1`).
//
// # Safety
// `predictions` must hold `n` bytes and `output` `capacity` bytes.
enum MnasStatus mnas_smooth_predictions(const uint8_t *predictions,
                                        size_t n,
                                        uint8_t *output,
                                        size_t capacity,
                                        size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MICRONAS_H */
