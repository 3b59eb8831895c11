#ifndef CCT_CCT_H_
#define CCT_CCT_H_

/* C interface to the contrastive co-training library.
 *
 * Every fallible call returns a cct_status. On failure the message is
 * available from cct_last_error() until the next call on the same thread.
 * Strings returned through char** out-parameters are heap-allocated and must
 * be released with cct_string_free(). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CCT_API __declspec(dllexport)
#else
#define CCT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cct_status {
  CCT_OK = 0,
  CCT_ERR_INVALID_SPEC = 1,
  CCT_ERR_INVALID_DATA = 2,
  CCT_ERR_INVALID_INPUT = 3,
  CCT_ERR_NUMERIC_FAILURE = 4,
  CCT_ERR_UNDEFINED_METRIC = 5,
  CCT_ERR_FORMAT = 6,
  CCT_ERR_IO = 7,
  CCT_ERR_INTERNAL = 8
} cct_status;

typedef struct cct_manifest cct_manifest;
typedef struct cct_dataset cct_dataset;

CCT_API const char* cct_version(void);
CCT_API const char* cct_last_error(void);
CCT_API const char* cct_status_name(cct_status status);
CCT_API void cct_string_free(char* s);

/* Log callback; level is 0 debug, 1 info, 2 warn, 3 error. NULL restores the
 * default stderr sink. */
typedef void (*cct_log_fn)(int level, const char* message, void* user);
CCT_API void cct_set_log_callback(cct_log_fn fn, void* user);

/* ---- run manifests ---------------------------------------------------- */

CCT_API cct_status cct_manifest_new(cct_manifest** out);
CCT_API cct_status cct_manifest_load(const char* path, cct_manifest** out);
CCT_API cct_status cct_manifest_save(const cct_manifest* m, const char* path);
CCT_API void cct_manifest_free(cct_manifest* m);

/* Keys are dotted paths into the manifest JSON, e.g. "train.loss.lambda".
 * The value is parsed as JSON when possible and taken as a string
 * otherwise. Unknown keys are rejected. */
CCT_API cct_status cct_manifest_set(cct_manifest* m, const char* key, const char* value);
CCT_API cct_status cct_manifest_get(const cct_manifest* m, const char* key, char** out);
CCT_API cct_status cct_manifest_to_json(const cct_manifest* m, char** out);

typedef struct cct_run_summary {
  int num_seeds;
  int final_epoch;
  double mean_accuracy;
  double std_accuracy;
} cct_run_summary;

CCT_API cct_status cct_run_experiment(const cct_manifest* m, const char* out_dir,
                                      cct_run_summary* summary);

/* format: "table", "csv" or "json". */
CCT_API cct_status cct_summarize(const char* const* dirs, size_t count, const char* format,
                                 char** out);
CCT_API cct_status cct_plot(const char* dir, int* images_written);

/* ---- noise ------------------------------------------------------------ */

/* kind: "none", "symmetric" or "pairflip". out holds num_classes^2 doubles,
 * row-major. */
CCT_API cct_status cct_transition_matrix(const char* kind, double tau, int num_classes,
                                         double* out);
/* corrupted may be NULL. */
CCT_API cct_status cct_apply_noise(const char* kind, double tau, int num_classes, uint64_t seed,
                                   const int* labels, size_t count, int* noisy_labels,
                                   unsigned char* corrupted);

/* ---- datasets --------------------------------------------------------- */

typedef struct cct_dataset_info {
  size_t train_size;
  size_t test_size;
  int num_classes;
  int channels;
  int height;
  int width;
  char checksum[32];
} cct_dataset_info;

/* kind: "mnist", "cifar10" or "synthetic". path may be NULL or empty to use
 * $CCT_DATA_DIR. */
CCT_API cct_status cct_dataset_load(const char* kind, const char* path, cct_dataset** out);
CCT_API cct_status cct_dataset_info_get(const cct_dataset* d, cct_dataset_info* info);
CCT_API cct_status cct_dataset_train_labels(const cct_dataset* d, int* out, size_t capacity);
CCT_API void cct_dataset_free(cct_dataset* d);

#ifdef __cplusplus
}
#endif

#endif /* CCT_CCT_H_ */
