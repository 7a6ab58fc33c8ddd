/* SPDX-License-Identifier: Apache-2.0 */
/**
 * @file   mvlstm.h
 * @brief  C interface to the MV-LSTM forecasting library.
 *
 * Every function returns an mvl_status. On failure, mvl_last_error() gives a
 * message for the calling thread. Strings returned through char** are owned
 * by the caller and released with mvl_string_free().
 */

#ifndef MVLSTM_H
#define MVLSTM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MVL_API __declspec(dllexport)
#else
#define MVL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  MVL_OK = 0,
  MVL_ERR_INVALID_ARGUMENT = 1, /**< null pointer or out-of-range argument */
  MVL_ERR_CONFIG = 2,           /**< bad or incomplete configuration */
  MVL_ERR_IO = 3,               /**< file missing, unreadable or malformed */
  MVL_ERR_DIMENSION = 4,        /**< shape mismatch, e.g. data vs checkpoint */
  MVL_ERR_CONTRACT = 5,         /**< precondition violated */
  MVL_ERR_NUMERIC = 6,          /**< non-finite loss or metric */
  MVL_ERR_INTERNAL = 7
} mvl_status;

typedef struct mvl_config mvl_config;
typedef struct mvl_model mvl_model;

MVL_API const char *mvl_version(void);
MVL_API const char *mvl_status_name(mvl_status status);
/** Message of the last failed call on this thread ("" if none). */
MVL_API const char *mvl_last_error(void);
MVL_API void mvl_string_free(char *s);

/* Configuration ---------------------------------------------------------- */

/** Defaults; target_column and window_T still unset. */
MVL_API mvl_status mvl_config_new(mvl_config **out);
/** Parses a JSON object; unknown keys and wrong types fail here, missing
 *  required fields only at mvl_config_validate() / mvl_train(). */
MVL_API mvl_status mvl_config_from_json(const char *json, mvl_config **out);
MVL_API mvl_status mvl_config_from_file(const char *path, mvl_config **out);
/** Sets one field; `json_value` is a JSON literal such as "0.01" or "\"y\"". */
MVL_API mvl_status mvl_config_set(mvl_config *cfg, const char *key,
                                  const char *json_value);
MVL_API mvl_status mvl_config_validate(const mvl_config *cfg);
MVL_API mvl_status mvl_config_to_json(const mvl_config *cfg, char **out);
MVL_API void mvl_config_free(mvl_config *cfg);
/** Name of the i-th accepted config key, or NULL past the end. */
MVL_API const char *mvl_config_key(size_t i);

/* Synthetic data --------------------------------------------------------- */

/**
 * Writes `length - 100` rows of x0..x{n_exo-1},y to `csv_path` and the
 * ground-truth manifest to `manifest_path` (may be NULL). `gains`, when not
 * NULL, overrides the two coupling gains.
 */
MVL_API mvl_status mvl_generate(uint64_t seed, size_t length, size_t n_exo,
                                const double *gains, const char *csv_path,
                                const char *manifest_path);

/* Training and evaluation ------------------------------------------------ */

/**
 * Trains on `data_path` and writes the best-validation checkpoint and the
 * per-epoch log (log_path may be NULL).
 */
MVL_API mvl_status mvl_train(const mvl_config *cfg, const char *data_path,
                             const char *checkpoint_path, const char *log_path,
                             double *best_valid_rmse);

MVL_API mvl_status mvl_model_load(const char *checkpoint_path,
                                  mvl_model **out);
/** {"variant", "n_vars", "d_per_variable", "parameters", "config"} */
MVL_API mvl_status mvl_model_info(const mvl_model *model, char **json);
MVL_API void mvl_model_free(mvl_model *model);

/**
 * Metrics on one split ("train", "valid", "test" or "all") as JSON
 * {rmse, mae, n, split, config}. threads = 0 uses the checkpoint's setting.
 */
MVL_API mvl_status mvl_evaluate(const mvl_model *model, const char *data_path,
                                const char *split, size_t threads,
                                char **metrics_json);

/** Importance report JSON and attention histogram CSV. bins >= 2. */
MVL_API mvl_status mvl_interpret(const mvl_model *model, const char *data_path,
                                 const char *split, size_t bins,
                                 size_t threads, char **report_json,
                                 char **histogram_csv);

/**
 * Finite-difference check of a fresh model's loss on one random sequence.
 * `corrupt` is added to one analytic gradient entry (0 for a real check).
 */
MVL_API mvl_status mvl_gradcheck(const char *variant, size_t n_vars,
                                 size_t width, size_t steps, uint64_t seed,
                                 double corrupt, double *max_rel_error);

#ifdef __cplusplus
}
#endif

#endif /* MVLSTM_H */
