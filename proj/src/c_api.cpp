#include "demoforge/c_api.h"

#include <algorithm>
#include <cstring>
#include <memory>
#include <string>

#include "demoforge/dataloader.hpp"
#include "demoforge/dataset.hpp"

using demoforge::DatasetHandle;
using demoforge::Error;
using demoforge::ErrorCode;

struct df_dataset {
  DatasetHandle handle;
  bool open = true;
};

struct df_iterator {
  DatasetHandle handle;  // keeps the shards mapped while iterating
  std::unique_ptr<demoforge::BatchIterator<DatasetHandle>> it;
};

namespace {

thread_local std::string g_last_error;

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return DF_ERR_INVALID_ARGUMENT;
    case ErrorCode::MissingFile: return DF_ERR_MISSING_FILE;
    case ErrorCode::MissingShard: return DF_ERR_MISSING_SHARD;
    case ErrorCode::ChecksumMismatch: return DF_ERR_CHECKSUM_MISMATCH;
    case ErrorCode::VersionUnsupported: return DF_ERR_VERSION_UNSUPPORTED;
    case ErrorCode::IndexOutOfRange: return DF_ERR_INDEX_OUT_OF_RANGE;
    default: return DF_ERR_DATA;
  }
}

template <typename F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_for(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DF_ERR_INTERNAL;
  }
}

int fail(int status, const char* msg) {
  g_last_error = msg;
  return status;
}

}  // namespace

extern "C" {

size_t df_obs_floats(void) { return demoforge::kObsSize; }
size_t df_action_dim(void) { return demoforge::kActionDim; }

int df_open(const char* manifest_path, df_dataset** out) {
  if (!manifest_path || !out) return fail(DF_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    auto ds = std::make_unique<df_dataset>();
    ds->handle = demoforge::open_dataset(manifest_path);
    *out = ds.release();
    return DF_OK;
  });
}

int df_count(const df_dataset* ds, size_t* out) {
  if (!ds || !out) return fail(DF_ERR_INVALID_ARGUMENT, "null argument");
  if (!ds->open) return fail(DF_ERR_CLOSED, "dataset is closed");
  *out = ds->handle.size();
  return DF_OK;
}

int df_stats(const df_dataset* ds, double* mean, double* std) {
  if (!ds || !mean || !std) return fail(DF_ERR_INVALID_ARGUMENT, "null argument");
  if (!ds->open) return fail(DF_ERR_CLOSED, "dataset is closed");
  const auto& s = ds->handle.norm_stats();
  std::copy(s.mean.begin(), s.mean.end(), mean);
  std::copy(s.std.begin(), s.std.end(), std);
  return DF_OK;
}

int df_get_item(const df_dataset* ds, size_t index, float* obs, float* act) {
  if (!ds || !obs || !act) return fail(DF_ERR_INVALID_ARGUMENT, "null argument");
  if (!ds->open) return fail(DF_ERR_CLOSED, "dataset is closed");
  return guarded([&] {
    const auto s = demoforge::get_item(ds->handle, index);
    std::memcpy(obs, s.obs.data(), s.obs.size() * sizeof(float));
    std::memcpy(act, s.act.data(), s.act.size() * sizeof(float));
    return DF_OK;
  });
}

int df_close(df_dataset* ds) {
  if (!ds) return fail(DF_ERR_INVALID_ARGUMENT, "null argument");
  delete ds;
  return DF_OK;
}

int df_iter_new(const df_dataset* ds, const df_batch_spec* spec, df_iterator** out) {
  if (!ds || !spec || !out) return fail(DF_ERR_INVALID_ARGUMENT, "null argument");
  if (!ds->open) return fail(DF_ERR_CLOSED, "dataset is closed");
  return guarded([&] {
    demoforge::BatchSpec bs;
    bs.batch_size = spec->batch_size;
    bs.shuffle = spec->shuffle != 0;
    bs.seed = spec->seed;
    bs.prefetch_depth = spec->prefetch_depth;
    bs.drop_last = spec->drop_last != 0;
    auto it = std::make_unique<df_iterator>();
    it->handle = ds->handle;
    it->it = std::make_unique<demoforge::BatchIterator<DatasetHandle>>(it->handle, bs, spec->epoch);
    *out = it.release();
    return DF_OK;
  });
}

int df_iter_next(df_iterator* it, float* obs, float* act, size_t* n_out) {
  if (!it || !obs || !act || !n_out) return fail(DF_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    auto b = it->it->next();
    if (!b) {
      *n_out = 0;
      return static_cast<int>(DF_END_OF_EPOCH);
    }
    std::memcpy(obs, b->obs.data(), b->obs.size() * sizeof(float));
    std::memcpy(act, b->act.data(), b->act.size() * sizeof(float));
    *n_out = b->size;
    return static_cast<int>(DF_OK);
  });
}

void df_iter_free(df_iterator* it) { delete it; }

const char* df_last_error(void) { return g_last_error.c_str(); }

}  // extern "C"
