#ifndef DIALECT_REFINE_H
#define DIALECT_REFINE_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DrStatus {
  DR_STATUS_OK = 0,
  DR_STATUS_NULL_POINTER = 1,
  DR_STATUS_INVALID_UTF8 = 2,
  DR_STATUS_IO = 3,
  DR_STATUS_INVALID_ARGUMENT = 4,
  DR_STATUS_BUFFER_TOO_SMALL = 5,
  DR_STATUS_METRIC = 6,
  DR_STATUS_PANIC = 7,
} DrStatus;

typedef enum DrEmbeddingMode {
  DR_EMBEDDING_MODE_LOGIT = 0,
  DR_EMBEDDING_MODE_RAW = 1,
} DrEmbeddingMode;

/**
 * Loaded BM25 index.
 */
typedef struct DrBm25 DrBm25;

/**
 * Loaded classifier or ensemble.
 */
typedef struct DrClassifier DrClassifier;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *dr_last_error(void);

/**
 * Library version as a static string.
 */
const char *dr_version(void);

/**
 * Loads a model file written by `train` or `ensemble-search`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a writable pointer.
 */
enum DrStatus dr_classifier_load(const char *path, struct DrClassifier **out_handle);

/**
 * # Safety
 * `h` must be null or a handle from [`dr_classifier_load`] not yet freed.
 */
void dr_classifier_free(struct DrClassifier *h);

/**
 * Number of labels, or 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live classifier handle.
 */
size_t dr_classifier_num_labels(const struct DrClassifier *h);

/**
 * Label `i` as a string owned by the handle, or null when out of range.
 *
 * # Safety
 * `h` must be null or a live classifier handle.
 */
const char *dr_classifier_label(const struct DrClassifier *h, size_t i);

/**
 * Writes the posterior into `posterior[0..len]` and the predicted label index.
 *
 * # Safety
 * `posterior` must point to `len` writable doubles; `label_out` may be null.
 */
enum DrStatus dr_classifier_predict(const struct DrClassifier *h,
                                    const char *input,
                                    double *posterior,
                                    size_t len,
                                    size_t *label_out);

/**
 * DFS of hypothesis vs reference and source in the classifier's embedding space.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` writable.
 */
enum DrStatus dr_classifier_dfs(const struct DrClassifier *h,
                                const char *hypothesis,
                                const char *reference,
                                const char *source,
                                enum DrEmbeddingMode mode,
                                double *dfs_out);

/**
 * DFS over raw embedding vectors of length `dim`.
 *
 * # Safety
 * Each vector must point to `dim` readable doubles; `out` writable.
 */
enum DrStatus dr_dfs(const double *e_h,
                     const double *e_r,
                     const double *e_s,
                     size_t dim,
                     double epsilon,
                     double *dfs_out);

/**
 * Sentence-level chrF++ (0–100).
 *
 * # Safety
 * Strings must be NUL-terminated; `out` writable.
 */
enum DrStatus dr_chrf_pp(const char *hypothesis, const char *reference, double *score_out);

/**
 * Sentence-level BLEU (0–100), whitespace tokens, floor smoothing.
 *
 * # Safety
 * Strings must be NUL-terminated; `out` writable.
 */
enum DrStatus dr_bleu(const char *hypothesis, const char *reference, double *score_out);

/**
 * Normalized edit distance `2d / (|a| + |b| + d)` over characters.
 *
 * # Safety
 * Strings must be NUL-terminated; `out` writable.
 */
enum DrStatus dr_normalized_levenshtein(const char *a, const char *b, double *distance_out);

/**
 * Loads a BM25 index written by `index`.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` writable.
 */
enum DrStatus dr_bm25_load(const char *path, struct DrBm25 **out_handle);

/**
 * # Safety
 * `h` must be null or a handle from [`dr_bm25_load`] not yet freed.
 */
void dr_bm25_free(struct DrBm25 *h);

/**
 * Number of indexed documents, or 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live index handle.
 */
size_t dr_bm25_len(const struct DrBm25 *h);

/**
 * Id of document `doc`, owned by the handle; null when out of range.
 *
 * # Safety
 * `h` must be null or a live index handle.
 */
const char *dr_bm25_doc_id(const struct DrBm25 *h, size_t doc);

/**
 * Top-`k` documents for `query`. Writes up to `k` document numbers and
 * scores and the number written to `count_out`.
 *
 * # Safety
 * `docs_out` and `scores_out` must point to `k` writable slots.
 */
enum DrStatus dr_bm25_top_k(const struct DrBm25 *h,
                            const char *query,
                            size_t k,
                            size_t *docs_out,
                            double *scores_out,
                            size_t *count_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIALECT_REFINE_H */
