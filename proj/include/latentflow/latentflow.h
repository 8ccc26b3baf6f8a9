#ifndef LATENTFLOW_H
#define LATENTFLOW_H

/* C interface to the latentflow library.
 *
 * Every call returns an lf_status; on failure the message is available from
 * lf_last_error() on the calling thread until the next failing call.
 * Strings returned through char** are owned by the caller and released with
 * lf_string_free. Config text is key=value lines (or a JSON object); keys not
 * given take their defaults. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lf_status {
    LF_OK = 0,
    LF_INVALID_ARGUMENT = 1,
    LF_DOMAIN = 2,
    LF_UNSUPPORTED_CONDITION = 3,
    LF_DIVERGENCE = 4,
    LF_TRAINING_DIVERGED = 5,
    LF_INVALID_CONFIG = 6,
    LF_IO = 7,
    LF_DEGENERATE_TRAJECTORY = 8,
    LF_INTERNAL = 99
} lf_status;

/* Class label meaning "no condition". */
#define LF_NULL_LABEL (-1)

const char* lf_last_error(void);
const char* lf_status_name(lf_status s);
void lf_string_free(char* s);

/* Latent sets: `count` sequences of shape L x d, row-major per sequence. */
typedef struct lf_latents lf_latents;

lf_status lf_latents_create(size_t count, size_t length, size_t channels, const double* values, lf_latents** out);
/* .csv is read as CSV, anything else as LSEQ binary. */
lf_status lf_latents_load(const char* path, lf_latents** out);
lf_status lf_latents_save(const lf_latents* latents, const char* path);
void lf_latents_destroy(lf_latents* latents);
size_t lf_latents_count(const lf_latents* latents);
size_t lf_latents_length(const lf_latents* latents);
size_t lf_latents_channels(const lf_latents* latents);
/* Pointer to the L*d values of item i, valid until the set is destroyed. */
const double* lf_latents_item(const lf_latents* latents, size_t i);

/* Velocity fields. */
typedef struct lf_field lf_field;

/* Per-class Gaussian oracle: mu holds classes * channels values, sigma the
 * same; sequences of any length are accepted. */
lf_status lf_field_create_oracle(size_t classes, size_t channels, const double* mu, const double* sigma,
                                 lf_field** out);
lf_status lf_field_load_checkpoint(const char* path, int use_ema, lf_field** out);
/* Classifier-free guidance around `inner`; inner stays owned by the caller. */
lf_status lf_field_create_guided(const lf_field* inner, double gamma, lf_field** out);
void lf_field_destroy(lf_field* field);
/* Sequence shape a trained field expects; the oracle has none (LF_INVALID_ARGUMENT). */
lf_status lf_field_shape(const lf_field* field, size_t* length, size_t* channels);
/* Evaluates v(z, t, label) into out (L*d values); adds to *nfe when given. */
lf_status lf_field_eval(const lf_field* field, const double* z, size_t length, size_t channels, double t,
                        int64_t label, double* out, size_t* nfe);

/* Configuration. `overrides` holds `n` strings of the form key=value applied
 * on top of `config_text`. The resolved config is returned as key=value text. */
lf_status lf_config_resolve(const char* config_text, const char* const* overrides, size_t n, char** resolved_text);
/* *has = 1 when config_text sets `key` explicitly. */
lf_status lf_config_has(const char* config_text, const char* key, int* has);
lf_status lf_config_to_json(const char* config_text, char** json);
lf_status lf_content_hash(const void* bytes, size_t size, char** hex);
lf_status lf_content_hash_file(const char* path, char** hex);
/* Run manifest JSON; metrics_json may be NULL. */
lf_status lf_manifest(const char* command, const char* config_text, const char* const* input_paths, size_t n_inputs,
                      const char* metrics_json, double wall_clock_s, size_t nfe_total, char** json);

/* Synthetic dataset from the data.* keys; returns latents and labels
 * (labels has room for the count, or is NULL). When paths are given, writes
 * the LSEQ file and its JSON sidecar. */
lf_status lf_make_dataset(const char* config_text, lf_latents** out, int64_t** labels, const char* lseq_path,
                          const char* sidecar_path);
lf_status lf_load_dataset(const char* lseq_path, const char* sidecar_path, lf_latents** out, int64_t** labels);
void lf_labels_free(int64_t* labels);

/* Pipelines. Each writes a JSON report (metrics and NFE totals) to *report. */

/* Trains on the dataset at data_path (with sidecar labels), or on a synthetic
 * dataset from the data.* keys when data_path is NULL. */
lf_status lf_train(const char* config_text, const char* data_path, const char* sidecar_path,
                   const char* checkpoint_out, const char* log_csv_path, char** report);

/* Generates `count` samples under `label` with the solver.* keys. */
lf_status lf_generate(const lf_field* field, const char* config_text, int64_t label, size_t count, size_t length,
                      size_t channels, const char* trajectory_csv, lf_latents** out, char** report);

/* method: "ddim" or "regularized"; inversion uses the invert.* keys. */
lf_status lf_invert(const lf_field* field, const char* config_text, const lf_latents* input, int64_t label,
                    const char* method, lf_latents** out, char** report);

lf_status lf_edit(const lf_field* field, const char* config_text, const lf_latents* input, int64_t label_orig,
                  int64_t label_edit, const char* method, lf_latents** out, char** report);

/* frechet against reference; lpaps against originals (may be NULL);
 * adherence when classifier data and labels are given (target labels per
 * generated item, or a single label when n_gen_labels == 1). */
lf_status lf_eval(const lf_latents* generated, const lf_latents* reference, const lf_latents* originals,
                  const lf_latents* classifier_data, const int64_t* classifier_labels, const int64_t* gen_labels,
                  size_t n_gen_labels, char** report);

/* sweep: "t-edit", "nfe", "lambda-kl" or "cfg"; grid is comma separated.
 * The field is the unguided model; guidance.scale applies to the edits.
 * Writes the sweep CSV and, when svg_path is non-NULL, a line plot. */
lf_status lf_ablate(const lf_field* field, const char* config_text, const char* sweep, const char* grid,
                    size_t samples, size_t threads, const char* csv_path, const char* svg_path, char** report);

/* Largest binned deviation of the scalar oracle over flow steps 0.1..0.9. */
lf_status lf_oracle_check(double mu, double sigma, size_t samples, uint64_t seed, double* max_deviation);

#ifdef __cplusplus
}
#endif

#endif
