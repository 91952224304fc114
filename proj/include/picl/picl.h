/* SPDX-License-Identifier: Apache-2.0 */

/*
 * C interface to the picl engine: proactive in-context demonstration
 * insertion during reasoning, plus the zero-shot and static baselines and
 * the evaluation harness.
 *
 * Structured values cross the boundary as UTF-8 JSON strings. Strings
 * returned through `char**` out-parameters are owned by the caller and must
 * be released with picl_string_free. On any result other than PICL_OK the
 * message for the calling thread is available from picl_last_error.
 */

#ifndef PICL_PICL_H
#define PICL_PICL_H

#include <stddef.h>

#if defined(_WIN32)
#define PICL_API __declspec(dllexport)
#else
#define PICL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct picl_engine picl_engine_t;

typedef enum picl_result {
    PICL_OK = 0,
    PICL_ERR_NULL_POINTER = 1,
    PICL_ERR_INVALID_ARGUMENT = 2,
    PICL_ERR_INVALID_CONFIG = 3,
    PICL_ERR_IO = 4,
    PICL_ERR_PARSE = 5,
    PICL_ERR_BACKEND = 6,
    PICL_ERR_RETRIEVAL = 7,
    /* The run finished but its transcript is marked failed; the transcript
       is still returned. */
    PICL_ERR_RUN_FAILED = 8,
    PICL_ERR_INTERNAL = 9
} picl_result_t;

PICL_API const char* picl_version(void);
PICL_API const char* picl_result_string(picl_result_t result);

/* Message of the last failed call on this thread, or "" if none. */
PICL_API const char* picl_last_error(void);

PICL_API void picl_string_free(char* s);

/* Full default configuration as JSON. */
PICL_API picl_result_t picl_config_default(char** out_json);

/*
 * Checks a configuration (a JSON object overlaid on the defaults). Writes
 * a JSON array of {"field","constraint"} violations to *errors_json; the
 * array is empty and the result PICL_OK when the config is valid, and the
 * result is PICL_ERR_INVALID_CONFIG otherwise.
 */
PICL_API picl_result_t picl_config_validate(const char* config_json, char** errors_json);

/* Builds an engine from a configuration JSON object (may be NULL or "{}"). */
PICL_API picl_result_t picl_engine_create(const char* config_json, picl_engine_t** out);
PICL_API void picl_engine_destroy(picl_engine_t* engine);

/*
 * Loads a demonstration pool (JSONL) and builds its indexes. *report_json
 * (optional) receives {"demos","cache_hit","embedder_calls","sidecar"}.
 */
PICL_API picl_result_t picl_engine_load_pool(picl_engine_t* engine, const char* path, char** report_json);

/*
 * Runs one query, given as {"id","question"}, in the configured mode.
 * *transcript_json receives the transcript even when the result is
 * PICL_ERR_RUN_FAILED.
 */
PICL_API picl_result_t picl_engine_run(picl_engine_t* engine, const char* query_json, char** transcript_json);

/*
 * Evaluates a JSONL dataset. options_json: {"modes":[...],"workers":n},
 * both optional (default: the configured mode, one worker). *out_json
 * receives {"report":{...},"items_csv":"...","transcripts":[...]}.
 */
PICL_API picl_result_t picl_engine_evaluate(picl_engine_t* engine, const char* dataset_path,
                                            const char* options_json, char** out_json);

/*
 * Sweeps "r" (max interventions) or "k" (demonstrations per insertion)
 * over `values`. *csv_out receives the table; *reports_json (optional)
 * receives a JSON array of the per-value reports.
 */
PICL_API picl_result_t picl_engine_sweep(picl_engine_t* engine, const char* dataset_path, const char* parameter,
                                         const int* values, size_t n_values, int workers, char** csv_out,
                                         char** reports_json);

/*
 * Per-token entropy of zero-shot generations over a dataset, as CSV.
 * *rows (optional) receives the number of data rows.
 */
PICL_API picl_result_t picl_engine_export_entropy(picl_engine_t* engine, const char* dataset_path, char** csv_out,
                                                  size_t* rows);

/*
 * Precomputes the embedding cache next to a pool file using the embedder
 * named in the configuration. *report_json as for picl_engine_load_pool.
 */
PICL_API picl_result_t picl_pool_embed(const char* config_json, const char* pool_path, char** report_json);

#ifdef __cplusplus
}
#endif

#endif /* PICL_PICL_H */
