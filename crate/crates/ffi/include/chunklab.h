/* SPDX-License-Identifier: Apache-2.0 */

#ifndef CHUNKLAB_H
#define CHUNKLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

/**
 * Resume from an existing `cells.jsonl`.
 */
#define CLX_RUN_RESUME 1

/**
 * Force the offline stub generator.
 */
#define CLX_RUN_STUB_GENERATOR 2

typedef enum ClxStatus {
  CLX_STATUS_OK = 0,
  CLX_STATUS_NULL_ARGUMENT = 1,
  CLX_STATUS_INVALID_UTF8 = 2,
  CLX_STATUS_IO = 3,
  CLX_STATUS_SCHEMA = 4,
  CLX_STATUS_DUPLICATE_ID = 5,
  CLX_STATUS_EMPTY_FILE = 6,
  CLX_STATUS_DOMAIN = 7,
  CLX_STATUS_LOOKUP = 8,
  CLX_STATUS_INTEGRITY = 9,
  CLX_STATUS_EMBEDDING = 10,
  CLX_STATUS_TRANSPORT = 11,
  CLX_STATUS_GENERATION = 12,
  CLX_STATUS_CONFIG = 13,
  CLX_STATUS_UNDEFINED_METRIC = 14,
  CLX_STATUS_INDEX_FORMAT = 15,
  CLX_STATUS_PANIC = 99,
} ClxStatus;

/**
 * Loaded documents.
 */
typedef struct ClxCorpus ClxCorpus;

/**
 * A searchable index, plus its chunks when built in-process.
 */
typedef struct ClxIndex ClxIndex;

/**
 * Mean and percentile interval of a bootstrap.
 */
typedef struct ClxMetricSummary {
  double mean;
  double ci_low;
  double ci_high;
  size_t n;
  size_t bootstrap_b;
  uint64_t seed;
  double level;
} ClxMetricSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version; static storage, do not free.
 */
const char *clx_version(void);

/**
 * Copy of the last error on this thread, or NULL. Free with `clx_string_free`.
 */
char *clx_last_error_message(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, freed at most once.
 */
void clx_string_free(char *s);

/**
 * Token count under the default tokenizer.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out_count` must be writable.
 */
enum ClxStatus clx_count_tokens(const char *text, size_t *out_count);

/**
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum ClxStatus clx_normalize_answer(const char *text, char **out);

/**
 * Writes 1 when `predicted` matches any of the `n_gold` answers after normalization.
 *
 * # Safety
 * `gold` must point to `n_gold` NUL-terminated strings.
 */
enum ClxStatus clx_exact_match(const char *predicted,
                               const char *const *gold,
                               size_t n_gold,
                               uint8_t *out);

/**
 * `1 / (1 - r)` for overlap ratio `r` in [0, 1).
 *
 * # Safety
 * `out` must be writable.
 */
enum ClxStatus clx_expected_chunk_inflation(double r, double *out);

/**
 * # Safety
 * `values` must point to `n` doubles; `out` must be writable.
 */
enum ClxStatus clx_bootstrap_ci(const double *values,
                                size_t n,
                                size_t resamples,
                                double level,
                                uint64_t seed,
                                struct ClxMetricSummary *out);

/**
 * Interval over the mean of `a[i] - b[i]`; `out_zero_in_interval` may be NULL.
 *
 * # Safety
 * `a` and `b` must each point to `n` doubles; `out` must be writable.
 */
enum ClxStatus clx_paired_delta_ci(const double *a,
                                   const double *b,
                                   size_t n,
                                   size_t resamples,
                                   double level,
                                   uint64_t seed,
                                   struct ClxMetricSummary *out,
                                   bool *out_zero_in_interval);

/**
 * Loads a documents JSONL file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum ClxStatus clx_corpus_load(const char *path, struct ClxCorpus **out);

/**
 * Number of documents, or 0 for NULL.
 *
 * # Safety
 * `corpus` must be NULL or a live handle.
 */
size_t clx_corpus_len(const struct ClxCorpus *corpus);

/**
 * # Safety
 * `corpus` must be NULL or a handle from `clx_corpus_load`, freed at most once.
 */
void clx_corpus_free(struct ClxCorpus *corpus);

/**
 * Chunks every document and writes the records, text inlined, as JSON Lines.
 * `method` is one of "token", "sentence", "semantic", "code".
 *
 * # Safety
 * `corpus` must be a live handle, `method` a NUL-terminated string and `out_jsonl` writable.
 */
enum ClxStatus clx_chunk_corpus(const struct ClxCorpus *corpus,
                                const char *method,
                                size_t size,
                                double overlap,
                                char **out_jsonl);

/**
 * Chunks the corpus and builds a BM25 index over the chunks.
 *
 * # Safety
 * `corpus` must be a live handle, `method` a NUL-terminated string and `out` writable.
 */
enum ClxStatus clx_index_build(const struct ClxCorpus *corpus,
                               const char *method,
                               size_t size,
                               double overlap,
                               struct ClxIndex **out);

/**
 * Loads an index file; the handle carries no chunk text.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum ClxStatus clx_index_load(const char *path, struct ClxIndex **out);

/**
 * # Safety
 * `index` must be a live handle and `path` a NUL-terminated string.
 */
enum ClxStatus clx_index_save(const struct ClxIndex *index, const char *path);

/**
 * Number of indexed chunks, or 0 for NULL.
 *
 * # Safety
 * `index` must be NULL or a live handle.
 */
size_t clx_index_len(const struct ClxIndex *index);

/**
 * Top-`k` hits for a text query as a JSON array of `{"chunk_id", "score"}`,
 * plus `"text"` when the handle holds chunk text.
 *
 * # Safety
 * `index` must be a live BM25 handle, `query` a NUL-terminated string and `out_json` writable.
 */
enum ClxStatus clx_index_search(const struct ClxIndex *index,
                                const char *query,
                                size_t k,
                                char **out_json);

/**
 * # Safety
 * `index` must be NULL or a handle from this library, freed at most once.
 */
void clx_index_free(struct ClxIndex *index);

/**
 * Runs the experiment grid and writes report files into `out_dir`.
 * `out_cells` (may be NULL) receives the number of cells in the report.
 *
 * # Safety
 * `config_path` and `out_dir` must be NUL-terminated strings.
 */
enum ClxStatus clx_run_grid(const char *config_path,
                            const char *out_dir,
                            uint32_t flags,
                            size_t *out_cells);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHUNKLAB_H */
