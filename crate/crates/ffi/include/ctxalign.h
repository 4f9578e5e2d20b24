#ifndef CTXALIGN_H
#define CTXALIGN_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Similarity codes accepted by [`ctx_evaluate`] and [`ctx_retrieve`].
 */
#define CTX_SIM_COSINE 0

#define CTX_SIM_CSLS 1

/**
 * Retrieval mode codes accepted by [`ctx_evaluate`].
 */
#define CTX_MODE_CONTEXTUAL 0

#define CTX_MODE_NON_CONTEXTUAL 1

/**
 * Result of every fallible call.
 */
typedef enum CtxStatus {
  CTX_STATUS_OK = 0,
  CTX_STATUS_NULL_POINTER = 1,
  CTX_STATUS_INVALID_ARGUMENT = 2,
  CTX_STATUS_DATA_ERROR = 3,
  CTX_STATUS_NUMERIC_ERROR = 4,
  CTX_STATUS_PANIC = 5,
} CtxStatus;

/**
 * A tokenized parallel corpus with word pairs.
 */
typedef struct CtxCorpus CtxCorpus;

/**
 * Per-token contextual vectors for one side of a corpus.
 */
typedef struct CtxEmbeddings CtxEmbeddings;

/**
 * A fine-tuned vector mapper.
 */
typedef struct CtxMapper CtxMapper;

/**
 * An orthogonal map.
 */
typedef struct CtxRotation CtxRotation;

/**
 * Bidirectional retrieval accuracy.
 */
typedef struct CtxRetrievalSummary {
  double mean_accuracy;
  double src_to_tgt;
  double tgt_to_src;
  uint64_t evaluated;
} CtxRetrievalSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ctx_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ctx_version(void);

/**
 * Loads a CTXE embeddings file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CtxStatus ctx_embeddings_load(const char *path, struct CtxEmbeddings **out);

/**
 * Builds embeddings from a row-major buffer of `total_tokens × dim`
 * values, split into sentences by `lengths[0..num_sentences]`.
 *
 * # Safety
 * `data` must hold `dim × sum(lengths)` doubles, `lengths` must hold
 * `num_sentences` entries, and `out` must be writable.
 */
enum CtxStatus ctx_embeddings_from_buffer(const double *data,
                                          size_t dim,
                                          const size_t *lengths,
                                          size_t num_sentences,
                                          struct CtxEmbeddings **out);

/**
 * Writes embeddings in the CTXE format.
 *
 * # Safety
 * `emb` must be a live handle; `path` a NUL-terminated string.
 */
enum CtxStatus ctx_embeddings_save(const struct CtxEmbeddings *emb, const char *path);

/**
 * Vector dimension, or 0 for NULL.
 *
 * # Safety
 * `emb` must be NULL or a live handle.
 */
size_t ctx_embeddings_dim(const struct CtxEmbeddings *emb);

/**
 * Number of sentences, or 0 for NULL.
 *
 * # Safety
 * `emb` must be NULL or a live handle.
 */
size_t ctx_embeddings_num_sentences(const struct CtxEmbeddings *emb);

/**
 * Number of token vectors, or 0 for NULL.
 *
 * # Safety
 * `emb` must be NULL or a live handle.
 */
size_t ctx_embeddings_total_tokens(const struct CtxEmbeddings *emb);

/**
 * Copies the vector of one token into `out[0..dim]`.
 *
 * # Safety
 * `emb` must be a live handle and `out` must hold `dim` doubles.
 */
enum CtxStatus ctx_embeddings_vector(const struct CtxEmbeddings *emb,
                                     size_t sentence,
                                     size_t token,
                                     double *out);

/**
 * # Safety
 * `emb` must be NULL or a handle not yet freed.
 */
void ctx_embeddings_free(struct CtxEmbeddings *emb);

/**
 * Loads a tokenized parallel corpus and its Pharaoh word pairs.
 *
 * # Safety
 * All strings must be NUL-terminated; `out` must be writable.
 */
enum CtxStatus ctx_corpus_load(const char *src_text,
                               const char *tgt_text,
                               const char *pairs,
                               const char *src_language,
                               const char *tgt_language,
                               struct CtxCorpus **out);

/**
 * Number of sentence pairs, or 0 for NULL.
 *
 * # Safety
 * `corpus` must be NULL or a live handle.
 */
size_t ctx_corpus_len(const struct CtxCorpus *corpus);

/**
 * Number of word pairs, or 0 for NULL.
 *
 * # Safety
 * `corpus` must be NULL or a live handle.
 */
size_t ctx_corpus_num_pairs(const struct CtxCorpus *corpus);

/**
 * # Safety
 * `corpus` must be NULL or a handle not yet freed.
 */
void ctx_corpus_free(struct CtxCorpus *corpus);

/**
 * Fits the orthogonal map taking source word-pair vectors onto their
 * target counterparts.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum CtxStatus ctx_rotation_fit(const struct CtxEmbeddings *src,
                                const struct CtxEmbeddings *tgt,
                                const struct CtxCorpus *corpus,
                                struct CtxRotation **out);

/**
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum CtxStatus ctx_rotation_load(const char *path, struct CtxRotation **out);

/**
 * # Safety
 * `w` must be a live handle; `path` must be NUL-terminated.
 */
enum CtxStatus ctx_rotation_save(const struct CtxRotation *w, const char *path);

/**
 * Copies the `dim × dim` matrix, row-major, into `out`.
 *
 * # Safety
 * `w` must be a live handle and `out` must hold `dim²` doubles.
 */
enum CtxStatus ctx_rotation_matrix(const struct CtxRotation *w, double *out);

/**
 * Matrix dimension, or 0 for NULL.
 *
 * # Safety
 * `w` must be NULL or a live handle.
 */
size_t ctx_rotation_dim(const struct CtxRotation *w);

/**
 * Applies the rotation to every vector, producing new embeddings.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum CtxStatus ctx_rotation_apply(const struct CtxRotation *w,
                                  const struct CtxEmbeddings *emb,
                                  struct CtxEmbeddings **out);

/**
 * # Safety
 * `w` must be NULL or a handle not yet freed.
 */
void ctx_rotation_free(struct CtxRotation *w);

/**
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum CtxStatus ctx_mapper_load(const char *path, struct CtxMapper **out);

/**
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum CtxStatus ctx_mapper_apply(const struct CtxMapper *m,
                                const struct CtxEmbeddings *emb,
                                struct CtxEmbeddings **out);

/**
 * # Safety
 * `m` must be NULL or a handle not yet freed.
 */
void ctx_mapper_free(struct CtxMapper *m);

/**
 * Bidirectional word retrieval over the corpus's word pairs.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum CtxStatus ctx_evaluate(const struct CtxEmbeddings *src,
                            const struct CtxEmbeddings *tgt,
                            const struct CtxCorpus *corpus,
                            int32_t sim,
                            size_t k,
                            int32_t mode_code,
                            struct CtxRetrievalSummary *out);

/**
 * Nearest candidate for each query row. `queries` is `num_queries × dim`
 * and `candidates` is `num_candidates × dim`, both row-major. Writes the
 * winning candidate row and its score for every query.
 *
 * # Safety
 * Buffers must have the stated sizes; `out_index` and `out_score` must
 * hold `num_queries` entries.
 */
enum CtxStatus ctx_retrieve(const double *queries,
                            size_t num_queries,
                            const double *candidates,
                            size_t num_candidates,
                            size_t dim,
                            int32_t sim,
                            size_t k,
                            size_t *out_index,
                            double *out_score);

/**
 * Runs the full pipeline from a JSON config. `out_dir` may be NULL to
 * use the config's output directory. `out` may be NULL; otherwise it
 * receives the post-alignment summary (or the base one when the config
 * does not align).
 *
 * # Safety
 * `config_json` must be NUL-terminated; `out_dir` NULL or NUL-terminated.
 */
enum CtxStatus ctx_run_pipeline(const char *config_json,
                                const char *out_dir,
                                struct CtxRetrievalSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTXALIGN_H */
