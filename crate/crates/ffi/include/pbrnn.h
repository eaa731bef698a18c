#ifndef PBRNN_H
#define PBRNN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

#define PBRNN_OK 0

#define PBRNN_ERR_NULL -1

#define PBRNN_ERR_ARGUMENT -2

#define PBRNN_ERR_SHAPE -3

#define PBRNN_ERR_FORMAT -4

#define PBRNN_ERR_IO -5

/**
 * The statistic is undefined for this matrix (e.g. an empty row).
 */
#define PBRNN_ERR_UNDEFINED -6

#define PBRNN_ERR_VERIFICATION -7

#define PBRNN_ERR_PANIC -8

/**
 * A square error matrix; rows classified, columns reference.
 */
typedef struct PbrnnMatrix PbrnnMatrix;

/**
 * A trained classifier loaded from a checkpoint.
 */
typedef struct PbrnnModel PbrnnModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *pbrnn_last_error_message(void);

/**
 * Loads a checkpoint file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must point to writable
 * storage for one handle.
 */
int32_t pbrnn_model_load(const char *path, struct PbrnnModel **out);

/**
 * Loads a checkpoint from memory.
 *
 * # Safety
 * `bytes` must point to `len` readable bytes; `out` as in
 * [`pbrnn_model_load`].
 */
int32_t pbrnn_model_load_bytes(const uint8_t *bytes, uintptr_t len, struct PbrnnModel **out);

/**
 * # Safety
 * `model` must be null or a handle from `pbrnn_model_load*` not yet freed.
 */
void pbrnn_model_free(struct PbrnnModel *model);

/**
 * Values per datum (window pixels × bands); 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uintptr_t pbrnn_model_input_dim(const struct PbrnnModel *model);

/**
 * Datums per sample; 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uintptr_t pbrnn_model_seq_len(const struct PbrnnModel *model);

/**
 * # Safety
 * `model` must be null or a live handle.
 */
uintptr_t pbrnn_model_num_classes(const struct PbrnnModel *model);

/**
 * System code: 0 pb-rnn, 1 pixel-rnn, 2 pixel-nn-single,
 * 3 pixel-nn-multi, 4 patch-nn-single, 5 patch-nn-multi; -1 for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
int32_t pbrnn_model_mode(const struct PbrnnModel *model);

/**
 * Classifies one sample given as `seq_len` consecutive datums of
 * `input_dim` values (a masked datum is all zeros). Writes the class to
 * `class_out` and, when `probs_out` is non-null, the `num_classes`
 * posterior probabilities.
 *
 * # Safety
 * `values` must point to `len` doubles; `probs_out` (if non-null) to
 * `probs_len` writable doubles; `class_out` to one writable `uint32_t`.
 */
int32_t pbrnn_model_classify(const struct PbrnnModel *model,
                             const double *values,
                             uintptr_t len,
                             double *probs_out,
                             uintptr_t probs_len,
                             uint32_t *class_out);

/**
 * A `k`×`k` matrix of zeros with classes named `0..k`.
 *
 * # Safety
 * `out` must point to writable storage for one handle.
 */
int32_t pbrnn_matrix_new(uintptr_t k, struct PbrnnMatrix **out);

/**
 * A `k`×`k` matrix from row-major counts (row = classified class).
 *
 * # Safety
 * `counts` must point to `k*k` readable values; `out` as above.
 */
int32_t pbrnn_matrix_from_counts(const uint64_t *counts, uintptr_t k, struct PbrnnMatrix **out);

/**
 * # Safety
 * `matrix` must be null or a live handle.
 */
void pbrnn_matrix_free(struct PbrnnMatrix *matrix);

/**
 * Adds one observation: classified as `classified`, reference `reference`.
 *
 * # Safety
 * `matrix` must be a live handle.
 */
int32_t pbrnn_matrix_add(struct PbrnnMatrix *matrix, uintptr_t classified, uintptr_t reference);

/**
 * Overall accuracy as a fraction.
 *
 * # Safety
 * `matrix` must be a live handle; `out` writable.
 */
int32_t pbrnn_matrix_overall_accuracy(const struct PbrnnMatrix *matrix, double *out);

/**
 * Cohen's kappa; `PBRNN_ERR_UNDEFINED` when chance agreement is total.
 *
 * # Safety
 * `matrix` must be a live handle; `out` writable.
 */
int32_t pbrnn_matrix_overall_kappa(const struct PbrnnMatrix *matrix, double *out);

/**
 * Producer's accuracy, user's accuracy and conditional kappa of one
 * class. An undefined value is written as NaN.
 *
 * # Safety
 * `matrix` must be a live handle; the three outputs writable.
 */
int32_t pbrnn_matrix_class_stats(const struct PbrnnMatrix *matrix,
                                 uintptr_t class_,
                                 double *producer_out,
                                 double *user_out,
                                 double *kappa_out);

/**
 * Total count of the matrix, or 0 for a null handle.
 *
 * # Safety
 * `matrix` must be null or a live handle.
 */
uint64_t pbrnn_matrix_total(const struct PbrnnMatrix *matrix);

/**
 * Recomputes the bundled published tables; `PBRNN_ERR_VERIFICATION`
 * names the failing ones in the last-error message.
 */
int32_t pbrnn_verify_tables(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PBRNN_H */
