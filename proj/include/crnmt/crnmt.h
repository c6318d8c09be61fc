/*
 * C interface to the crnmt translation toolkit.
 *
 * Objects are opaque handles created and destroyed through this API. Every
 * fallible call returns a crnmt_status; on failure crnmt_last_error() holds
 * a message for the calling thread. Strings returned through char** out
 * parameters are owned by the caller and released with crnmt_string_free.
 */
#ifndef CRNMT_CRNMT_H_
#define CRNMT_CRNMT_H_

#include <stddef.h>
#include <stdint.h>

#if defined(CRNMT_BUILDING_LIBRARY)
#define CRNMT_API __attribute__((visibility("default")))
#else
#define CRNMT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as process exit codes for the command-line tool. */
typedef enum crnmt_status {
  CRNMT_OK = 0,
  CRNMT_ERR_USAGE = 1,   /* bad configuration value or argument */
  CRNMT_ERR_DATA = 2,    /* unreadable or malformed corpus / checkpoint */
  CRNMT_ERR_NUMERIC = 3, /* non-finite training loss */
  CRNMT_ERR_INTERNAL = 4
} crnmt_status;

typedef struct crnmt_config crnmt_config;
typedef struct crnmt_model crnmt_model;

typedef void (*crnmt_log_fn)(const char* message, void* user_data);

typedef struct crnmt_bleu_report {
  double bleu; /* 0..100 */
  double precisions[4];
  size_t matches[4];
  size_t totals[4];
  double brevity_penalty;
  size_t hyp_length;
  size_t ref_length;
} crnmt_bleu_report;

CRNMT_API const char* crnmt_version(void);
CRNMT_API const char* crnmt_last_error(void);
CRNMT_API void crnmt_string_free(char* s);

/* ---- configuration ---------------------------------------------------- */

CRNMT_API crnmt_status crnmt_config_create(crnmt_config** out);
CRNMT_API void crnmt_config_destroy(crnmt_config* config);
CRNMT_API crnmt_status crnmt_config_apply_preset(crnmt_config* config, const char* name);
CRNMT_API crnmt_status crnmt_config_set(crnmt_config* config, const char* key, const char* value);
CRNMT_API crnmt_status crnmt_config_get(const crnmt_config* config, const char* key, char** out);
/* Applies a `key = value` file. The file's `preset` entry, if any, is applied
 * before its other entries unless ignore_preset is nonzero. */
CRNMT_API crnmt_status crnmt_config_load_file(crnmt_config* config, const char* path, int ignore_preset);
CRNMT_API crnmt_status crnmt_config_validate(const crnmt_config* config);
/* One `key = value` line per setting. */
CRNMT_API crnmt_status crnmt_config_describe(const crnmt_config* config, char** out);

/* ---- training --------------------------------------------------------- */

/* Splits the corpus, builds vocabularies, trains, and writes the
 * best-validation checkpoint into out_dir. */
CRNMT_API crnmt_status crnmt_train(const crnmt_config* config, const char* data_path, const char* out_dir,
                                   crnmt_log_fn log, void* user_data);

/* ---- models ----------------------------------------------------------- */

CRNMT_API crnmt_status crnmt_model_load(const char* checkpoint_dir, crnmt_model** out);
CRNMT_API void crnmt_model_destroy(crnmt_model* model);
/* The configuration recorded in the checkpoint, as `key = value` lines. */
CRNMT_API crnmt_status crnmt_model_describe(const crnmt_model* model, char** out);

/* Translates `count` source sentences. *out_lines receives `count` strings of
 * space-separated target tokens; free with crnmt_lines_free. max_len 0 uses
 * the checkpoint's max_decode_len. */
CRNMT_API crnmt_status crnmt_translate(const crnmt_model* model, const char* const* sentences, size_t count,
                                       size_t max_len, char*** out_lines);
CRNMT_API void crnmt_lines_free(char** lines, size_t count);

/* Scores the model on a parallel TSV file. */
CRNMT_API crnmt_status crnmt_evaluate(const crnmt_model* model, const char* tsv_path, int swap_columns,
                                      size_t max_len, crnmt_bleu_report* out);

/* ---- scoring ---------------------------------------------------------- */

/* Corpus BLEU of tokenized hypothesis / reference strings. */
CRNMT_API crnmt_status crnmt_bleu(const char* const* hypotheses, const char* const* references, size_t count,
                                  crnmt_bleu_report* out);
CRNMT_API crnmt_status crnmt_bleu_report_format(const crnmt_bleu_report* report, char** out);
/* CSV header and row: the model's configuration fields, then p1..p4, BP, BLEU. */
CRNMT_API crnmt_status crnmt_bleu_report_csv(const crnmt_model* model, const crnmt_bleu_report* report,
                                             char** header, char** row);

/* ---- ablation --------------------------------------------------------- */

/* Trains one model per (depth, position embedding, seed) and reports
 * validation loss and test BLEU. pos_flags entries are 0 (off) or 1 (on).
 * n_seeds 0 uses the configuration's seed. */
CRNMT_API crnmt_status crnmt_ablate(const crnmt_config* config, const char* data_path, const size_t* depths,
                                    size_t n_depths, const int* pos_flags, size_t n_pos, const uint64_t* seeds,
                                    size_t n_seeds, char** table, char** csv, crnmt_log_fn log, void* user_data);

#ifdef __cplusplus
}
#endif

#endif /* CRNMT_CRNMT_H_ */
