/*
 * C ABI over the dataset reader and batch loader, for foreign-function
 * clients (e.g. a ctypes/cffi wrapper feeding an external training loop).
 *
 * Every function returns 0 on success or a negative status; the message of
 * the last failure on the calling thread is available from
 * df_last_error(). Buffers passed in are owned by the caller and receive
 * copies.
 */
#ifndef DEMOFORGE_C_API_H_
#define DEMOFORGE_C_API_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define DF_API __attribute__((visibility("default")))
#else
#define DF_API
#endif

enum df_status {
  DF_OK = 0,
  DF_END_OF_EPOCH = 1,
  DF_ERR_INVALID_ARGUMENT = -1,
  DF_ERR_MISSING_FILE = -2,
  DF_ERR_MISSING_SHARD = -3,
  DF_ERR_CHECKSUM_MISMATCH = -4,
  DF_ERR_VERSION_UNSUPPORTED = -5,
  DF_ERR_INDEX_OUT_OF_RANGE = -6,
  DF_ERR_CLOSED = -7,
  DF_ERR_DATA = -8,
  DF_ERR_INTERNAL = -9
};

typedef struct df_dataset df_dataset;
typedef struct df_iterator df_iterator;

typedef struct df_batch_spec {
  size_t batch_size;
  int shuffle;
  uint64_t seed;
  size_t prefetch_depth;
  int drop_last;
  uint64_t epoch;
} df_batch_spec;

/* Observation layout: 4 x 256 x 256 float32, CHW (R, G, B in [0,1], depth m). */
DF_API size_t df_obs_floats(void);
DF_API size_t df_action_dim(void);

DF_API int df_open(const char* manifest_path, df_dataset** out);
DF_API int df_count(const df_dataset* ds, size_t* out);
/* mean and std each receive df_action_dim() doubles. */
DF_API int df_stats(const df_dataset* ds, double* mean, double* std);
/* obs receives df_obs_floats() floats, act df_action_dim() floats. */
DF_API int df_get_item(const df_dataset* ds, size_t index, float* obs, float* act);
DF_API int df_close(df_dataset* ds);

DF_API int df_iter_new(const df_dataset* ds, const df_batch_spec* spec, df_iterator** out);
/* Fills up to spec.batch_size samples; *n_out receives the batch size.
   Returns DF_END_OF_EPOCH (and *n_out = 0) once the epoch is exhausted. */
DF_API int df_iter_next(df_iterator* it, float* obs, float* act, size_t* n_out);
DF_API void df_iter_free(df_iterator* it);

DF_API const char* df_last_error(void);

#ifdef __cplusplus
}
#endif

#endif /* DEMOFORGE_C_API_H_ */
