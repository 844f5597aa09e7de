#ifndef IBAC_IBAC_H
#define IBAC_IBAC_H

#include <stddef.h>
#include <stdint.h>

#if defined(IBAC_BUILDING_LIBRARY)
#define IBAC_API __attribute__((visibility("default")))
#else
#define IBAC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ibac_status {
  IBAC_OK = 0,
  IBAC_ERR_INVALID_ARGUMENT = 1, /* null handle or pointer, bad buffer size */
  IBAC_ERR_CONFIG = 2,
  IBAC_ERR_SHAPE = 3,
  IBAC_ERR_DIVERGENCE = 4,
  IBAC_ERR_FORMAT = 5,
  IBAC_ERR_CHECKSUM = 6,
  IBAC_ERR_VERSION = 7,
  IBAC_ERR_IO = 8,
  IBAC_ERR_UNSUPPORTED = 9,
  IBAC_ERR_DEGENERATE = 10,
  IBAC_ERR_EMPTY = 11,
  IBAC_ERR_NUMERIC = 12,
  IBAC_ERR_PARTIAL = 13, /* sweep finished but some cells failed */
  IBAC_ERR_INTERNAL = 14
} ibac_status;

/* Message of the last failing call on this thread; "" after a success. */
IBAC_API const char* ibac_last_error(void);
IBAC_API const char* ibac_status_name(ibac_status status);
IBAC_API const char* ibac_version(void);

/* Strings returned through char** out-parameters are owned by the caller. */
IBAC_API void ibac_string_free(char* s);

/* ---- datasets ---------------------------------------------------------- */

typedef struct ibac_dataset ibac_dataset;

/* env_json: environment config object; NULL or "{}" gives the defaults. */
IBAC_API ibac_status ibac_dataset_generate(const char* env_json, ibac_dataset** out);
/* reduction: "first", "mean" or "sum"; NULL means "first". */
IBAC_API ibac_status ibac_dataset_offset(const ibac_dataset* source, size_t k, const char* reduction,
                                         ibac_dataset** out);
IBAC_API ibac_status ibac_dataset_load(const char* path, ibac_dataset** out);
IBAC_API ibac_status ibac_dataset_save(const ibac_dataset* dataset, const char* path);
IBAC_API ibac_status ibac_dataset_shape(const ibac_dataset* dataset, size_t* n, size_t* d_obs, size_t* d_a,
                                        size_t* k);
/* Raw observations, row-major n x d_obs. */
IBAC_API ibac_status ibac_dataset_copy_obs(const ibac_dataset* dataset, double* obs_t, double* obs_next, size_t len);
/* Ground-truth action labels, row-major n x d_a. Evaluation use only. */
IBAC_API ibac_status ibac_dataset_copy_actions(const ibac_dataset* dataset, double* out, size_t len);
IBAC_API void ibac_dataset_free(ibac_dataset* dataset);

/* ---- latent models ----------------------------------------------------- */

typedef struct ibac_model ibac_model;

/* run_json: run config object (kind, model, train sections are used). */
IBAC_API ibac_status ibac_model_train(const ibac_dataset* dataset, const char* run_json, ibac_model** out);
IBAC_API ibac_status ibac_model_load(const char* path, ibac_model** out);
IBAC_API ibac_status ibac_model_save(const ibac_model* model, const char* path);
IBAC_API ibac_status ibac_model_shape(const ibac_model* model, size_t* d_obs, size_t* d_z);
/* Posterior means on the dataset's standardized observations, n x d_z. */
IBAC_API ibac_status ibac_model_latents(const ibac_model* model, const ibac_dataset* dataset, double* out, size_t len);
IBAC_API void ibac_model_free(ibac_model* model);

/* ---- alignment reports ------------------------------------------------- */

typedef struct ibac_report ibac_report;

/* binning_json: NULL or a binning object. */
IBAC_API ibac_status ibac_report_compute(const ibac_model* model, const ibac_dataset* dataset,
                                         const char* binning_json, ibac_report** out);
IBAC_API ibac_status ibac_report_from_matrices(const double* latents, const double* actions, size_t n, size_t d_z,
                                               size_t d_a, const char* binning_json, ibac_report** out);
IBAC_API ibac_status ibac_report_means(const ibac_report* report, double* mean_max_ratio, double* mean_max_abs_r);
IBAC_API ibac_status ibac_report_json(const ibac_report* report, char** out);
IBAC_API ibac_status ibac_report_csv(const ibac_report* report, char** out);
IBAC_API void ibac_report_free(ibac_report* report);

/* ---- commands ------------------------------------------------------------
 * Each writes its artifacts and returns a printable summary in *summary
 * (may be NULL). A NULL seed pointer keeps the seed from the config. */

/* seed overrides env.seed */
IBAC_API ibac_status ibac_cmd_gen(const char* config_path, const char* out_path, const uint64_t* seed,
                                  char** summary);
/* out_dir overrides the config's out_dir when non-NULL; seed overrides train.seed */
IBAC_API ibac_status ibac_cmd_train(const char* config_path, const char* dataset_path, const char* out_dir,
                                    const uint64_t* seed, char** summary);
/* config_path (optional) supplies the binning; identity_debug != 0 uses the
 * dataset's actions as latents */
IBAC_API ibac_status ibac_cmd_analyze(const char* checkpoint_path, const char* dataset_path, const char* config_path,
                                      const char* out_dir, int identity_debug, char** summary);
/* seed overrides train.seed as the base of per-cell seeds */
IBAC_API ibac_status ibac_cmd_sweep(const char* config_path, const char* out_dir, const uint64_t* seed,
                                    char** summary);
/* head_kind / m (m == 0: every non-evaluation row) / seed override the
 * config's head section when non-NULL */
IBAC_API ibac_status ibac_cmd_head(const char* checkpoint_path, const char* dataset_path, const char* config_path,
                                   const char* head_kind, const size_t* m, const uint64_t* seed, const char* out_dir,
                                   char** summary);
IBAC_API ibac_status ibac_cmd_report(const char* sweep_csv, const char* out_path, char** summary);

#ifdef __cplusplus
}
#endif

#endif
