#ifndef SPANFLOW_H
#define SPANFLOW_H

/* Generated with cbindgen; edit cbindgen.toml, not this file. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result codes for every FFI call.
 */
typedef enum SpanflowStatus {
  SpanflowStatus_Ok = 0,
  SpanflowStatus_InvalidInput = 1,
  SpanflowStatus_RuntimeError = 2,
  SpanflowStatus_Panic = 3,
} SpanflowStatus;

/**
 * Opaque trained model: checkpoint parameters plus vocabulary and config.
 */
typedef struct SpanflowModel SpanflowModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a NUL-terminated static string.
 */
const char *spanflow_version(void);

/**
 * Message of the last error on this thread, or null. Free with
 * `spanflow_string_free`.
 */
char *spanflow_last_error(void);

/**
 * Free a string returned by this library. Null is ignored.
 */
void spanflow_string_free(char *ptr);

/**
 * Segment token JSONL (one page) into span JSONL.
 *
 * `gap_factor` <= 0 selects the default; `line_tol` <= 0 derives it from
 * the page.
 */
SpanflowStatus spanflow_segment_jsonl(const char *tokens_jsonl,
                                      double gap_factor,
                                      double line_tol,
                                      char **out_spans_jsonl);

/**
 * Build the reading-pattern graph of one page; returns graph JSON with
 * vertices, directional edges, and sparse hop triplets.
 */
SpanflowStatus spanflow_graph_json(const char *tokens_jsonl,
                                   char **out_graph_json);

/**
 * Load a trained checkpoint (JSON text) into an opaque model handle.
 */
SpanflowStatus spanflow_model_load(const char *checkpoint_json,
                                   SpanflowModel **out_model);

/**
 * Free a model handle. Null is ignored.
 */
void spanflow_model_free(SpanflowModel *model);

/**
 * Embedding dimension of a loaded model.
 */
size_t spanflow_model_dim(const SpanflowModel *model);

/**
 * Embed one page of tokens; returns CSV with header
 * span_id,page_id,e0..e{d-1}.
 */
SpanflowStatus spanflow_model_embed_page(const SpanflowModel *model,
                                         const char *tokens_jsonl,
                                         char **out_embeddings_csv);

/**
 * Attention-rollout overlay SVG for one query span of one page.
 */
SpanflowStatus spanflow_model_rollout_svg(const SpanflowModel *model,
                                          const char *tokens_jsonl,
                                          size_t query_span,
                                          char **out_svg);

/**
 * Generate a synthetic paired-page corpus in memory and return its token
 * JSONL for the given page of the given pair (page is 1 or 2). Mainly for
 * binding smoke tests.
 */
SpanflowStatus spanflow_synth_page_jsonl(uint64_t seed,
                                         size_t pair_index,
                                         uint32_t page,
                                         char **out_tokens_jsonl);

#ifdef __cplusplus
}  // extern "C"
#endif // __cplusplus

#endif  /* SPANFLOW_H */
