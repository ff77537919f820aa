#ifndef GCAN_FUSION_H
#define GCAN_FUSION_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum GfStatus {
  GF_STATUS_OK = 0,
  GF_STATUS_NULL_POINTER = 1,
  GF_STATUS_INVALID_ARGUMENT = 2,
  GF_STATUS_SHAPE = 3,
  GF_STATUS_NON_FINITE = 4,
  GF_STATUS_EMPTY = 5,
  GF_STATUS_PARSE = 6,
  GF_STATUS_VALIDATION = 7,
  GF_STATUS_DEPENDENCY = 8,
  GF_STATUS_CHECKPOINT = 9,
  GF_STATUS_IO = 10,
  GF_STATUS_UTF8 = 11,
  GF_STATUS_PANIC = 12,
} GfStatus;

/**
 * Opaque corpus graph.
 */
typedef struct GfGraph GfGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a
 * successful call. Valid until the next call on the same thread.
 */
const char *gf_last_error_message(void);

/**
 * Cleans one text. The result must be released with [`gf_string_free`].
 *
 * # Safety
 * `text` must be a nul-terminated string and `out` writable.
 */
enum GfStatus gf_clean_text(const char *text, char **out);

/**
 * # Safety
 * `s` must come from this library, or be null.
 */
void gf_string_free(char *s);

/**
 * Builds the corpus graph over `n_docs` raw documents. Documents are
 * cleaned and tokenized the same way as in training.
 *
 * # Safety
 * `docs` must hold `n_docs` nul-terminated strings and `out` be writable.
 */
enum GfStatus gf_graph_build(const char *const *docs,
                             size_t n_docs,
                             size_t window_len,
                             size_t min_freq,
                             struct GfGraph **out);

/**
 * Node counts: documents first, then words.
 *
 * # Safety
 * `graph` must come from [`gf_graph_build`]; outputs must be writable.
 */
enum GfStatus gf_graph_size(const struct GfGraph *graph, size_t *num_docs, size_t *num_words);

/**
 * Entry `(i, j)` of the raw adjacency, or of the normalized one when
 * `normalized` is true.
 *
 * # Safety
 * `graph` must come from [`gf_graph_build`] and `out` be writable.
 */
enum GfStatus gf_graph_entry(const struct GfGraph *graph,
                             size_t i,
                             size_t j,
                             bool normalized,
                             double *out);

/**
 * # Safety
 * `graph` must come from [`gf_graph_build`], or be null.
 */
void gf_graph_free(struct GfGraph *graph);

/**
 * Inverse-support loss weights for the four sub-categories.
 *
 * # Safety
 * `counts` must hold 4 values and `out` room for 4.
 */
enum GfStatus gf_class_weights(const uint64_t *counts, uint64_t total, double *out);

/**
 * F1-weighted soft vote. `probs` is `[folds][samples][classes]`, `f1`
 * has one entry per fold, `out` receives `[samples][classes]`.
 *
 * # Safety
 * Buffers must have the stated sizes.
 */
enum GfStatus gf_soft_vote(const double *probs,
                           const double *f1,
                           size_t folds,
                           size_t samples,
                           size_t classes,
                           double *out);

/**
 * Majority vote: a label is set iff at least half of the models set it.
 * `votes` is `[models][samples][classes]` of 0/1 bytes.
 *
 * # Safety
 * Buffers must have the stated sizes.
 */
enum GfStatus gf_hard_vote(const uint8_t *votes,
                           size_t models,
                           size_t samples,
                           size_t classes,
                           uint8_t *out);

/**
 * Two-sided Mann-Whitney U test. `exact` is set to 1 when the p-value
 * came from full enumeration and 0 for the normal approximation.
 *
 * # Safety
 * `x` and `y` must hold `nx` and `ny` values; outputs must be writable.
 */
enum GfStatus gf_mann_whitney_u(const double *x,
                                size_t nx,
                                const double *y,
                                size_t ny,
                                double *u,
                                double *p_two_sided,
                                uint8_t *exact);

/**
 * Macro and support-weighted F1 over `[samples][classes]` 0/1 labels.
 *
 * # Safety
 * Buffers must have the stated sizes; outputs must be writable.
 */
enum GfStatus gf_f1(const uint8_t *pred,
                    const uint8_t *truth,
                    size_t samples,
                    size_t classes,
                    double *macro_f1,
                    double *weighted_f1);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GCAN_FUSION_H */
