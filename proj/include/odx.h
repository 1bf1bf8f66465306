/*
 * odx — unsupervised outlier scoring with dimension-level feedback.
 *
 * C interface to the odx core: opaque handles, integer status codes, and a
 * JSON-request pipeline entry point. Every function returns ODX_OK (0) on
 * success or a non-zero status; odx_last_error() describes the most recent
 * failure on the calling thread. Strings returned through char** out
 * parameters are owned by the caller and released with odx_string_free().
 */

#ifndef ODX_H
#define ODX_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define ODX_API __declspec(dllexport)
#else
#define ODX_API __attribute__((visibility("default")))
#endif

/* Status codes; identical to the CLI exit codes. */
enum {
    ODX_OK = 0,
    ODX_ERROR_CONFIG = 2,  /* malformed request, bad parameters */
    ODX_ERROR_DATA = 3,    /* unreadable or inconsistent inputs */
    ODX_ERROR_NUMERIC = 4, /* divergence, non-finite values */
};

typedef struct odx_dataset odx_dataset;
typedef struct odx_autoencoder odx_autoencoder;

ODX_API const char* odx_version(void);

/* Message for the last failing call on this thread; empty string if none. */
ODX_API const char* odx_last_error(void);

ODX_API void odx_string_free(char* s);

/* ------------------------------------------------------------------------ */
/* datasets                                                                  */

/* Loads a numeric CSV (header row required). id_column may be NULL to use
 * 0-based row indices as ids. */
ODX_API int odx_dataset_load_csv(const char* path, const char* id_column,
                                 odx_dataset** out);

/* Builds a dataset from row-major values; ids may be NULL. */
ODX_API int odx_dataset_create(const char* const* column_names, int64_t n_cols,
                               const char* const* ids, int64_t n_rows,
                               const double* values_row_major, odx_dataset** out);

ODX_API void odx_dataset_free(odx_dataset* dataset);

ODX_API int64_t odx_dataset_rows(const odx_dataset* dataset);
ODX_API int64_t odx_dataset_cols(const odx_dataset* dataset);
ODX_API const char* odx_dataset_column_name(const odx_dataset* dataset, int64_t col);
ODX_API const char* odx_dataset_id(const odx_dataset* dataset, int64_t row);
ODX_API int odx_dataset_value(const odx_dataset* dataset, int64_t row, int64_t col,
                              double* out);

/* ------------------------------------------------------------------------ */
/* detectors (each standardizes the data internally)                         */

/* config_json keys (all optional): encoding_dim, hidden_layers,
 * learning_rate, epochs, batch_size, seed. Pass NULL or "{}" for defaults. */
ODX_API int odx_autoencoder_train(const odx_dataset* dataset, const char* config_json,
                                  odx_autoencoder** out);

ODX_API void odx_autoencoder_free(odx_autoencoder* model);

/* Reconstruction-error outlier scores, one per observation. */
ODX_API int odx_autoencoder_scores(const odx_autoencoder* model,
                                   const odx_dataset* dataset, double* scores);

/* Signed per-dimension deviations (observed - reconstructed, standardized
 * units), row-major n x d. */
ODX_API int odx_autoencoder_deviations(const odx_autoencoder* model,
                                       const odx_dataset* dataset,
                                       double* deviations_row_major);

/* k <= 0 selects the default neighborhood size max(ceil(0.1 n), 50). */
ODX_API int odx_lof_scores(const odx_dataset* dataset, int64_t k, double* scores);

/* trees/subsample <= 0 select the defaults (100 trees, min(256, n)). */
ODX_API int odx_iforest_scores(const odx_dataset* dataset, int64_t trees,
                               int64_t subsample, uint64_t seed, double* scores);

/* Ranks (1 = most outlying; ties by ascending id) and deciles (1..10) for a
 * score vector. Either out array may be NULL. */
ODX_API int odx_rank_scores(const double* scores, const char* const* ids, int64_t n,
                            int64_t* ranks, int64_t* deciles);

/* ------------------------------------------------------------------------ */
/* pipelines                                                                 */

/* Runs one pipeline request, e.g.
 *   {"command":"score","data":"d.csv","out":"run1","seed":7}
 * and returns the response document (request-dependent; commands that write
 * files return {"files":[...],"report":{...}}). See the project README for
 * the command set and config keys. */
ODX_API int odx_pipeline_run(const char* request_json, char** response_json);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* ODX_H */
