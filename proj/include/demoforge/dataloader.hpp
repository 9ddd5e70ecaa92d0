#pragma once

// Deterministic batch iteration over any record source, with an optional
// bounded prefetch queue filled by a background thread.

#include <algorithm>
#include <concepts>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <stop_token>
#include <thread>
#include <vector>

#include "demoforge/dataset.hpp"
#include "demoforge/random.hpp"
#include "demoforge/trajectory.hpp"

namespace demoforge {

inline constexpr int kObsChannels = 4;
inline constexpr std::size_t kObsPlane = static_cast<std::size_t>(kFrameSize) * kFrameSize;
inline constexpr std::size_t kObsSize = kObsChannels * kObsPlane;

/// Anything that yields stored records by global index.
template <typename S>
concept RecordSource = requires(const S& s, std::size_t i) {
  { s.size() } -> std::convertible_to<std::size_t>;
  { s.norm_stats() } -> std::convertible_to<const NormStats&>;
  { s.view(i) } -> std::same_as<RecordView>;
};

/// Records held in memory; same view contract as a DatasetHandle.
class MemoryDataset {
 public:
  MemoryDataset(std::vector<TrainingRecord> records, NormStats stats)
      : records_(std::move(records)), stats_(stats) {}

  explicit MemoryDataset(std::vector<TrainingRecord> records) : records_(std::move(records)) {
    std::vector<Action7> a;
    for (const auto& r : records_) a.push_back(r.action);
    stats_ = a.size() >= 2 ? compute_norm_stats(a) : NormStats::identity();
  }

  std::size_t size() const { return records_.size(); }
  const NormStats& norm_stats() const { return stats_; }
  const TrainingRecord& record(std::size_t i) const { return records_.at(i); }

  RecordView view(std::size_t i) const {
    if (i >= records_.size()) throw Error(ErrorCode::IndexOutOfRange, "record " + std::to_string(i));
    const auto& r = records_[i];
    RecordView v;
    v.trajectory_id = r.trajectory_id;
    v.frame_index = r.frame_index;
    v.action = r.action.to_vec();
    v.rgb = r.rgb.data;
    if (r.depth) v.depth = r.depth->data;
    return v;
  }

 private:
  std::vector<TrainingRecord> records_;
  NormStats stats_;
};

static_assert(RecordSource<DatasetHandle>);
static_assert(RecordSource<MemoryDataset>);

/// CHW float observation: R, G, B in [0,1], then depth in meters (zeros when
/// the record carries no depth).
inline void fill_observation(const RecordView& v, std::span<float> out) {
  for (std::size_t p = 0; p < kObsPlane; ++p) {
    for (int c = 0; c < 3; ++c) out[c * kObsPlane + p] = static_cast<float>(v.rgb[3 * p + c]) / 255.0f;
  }
  if (v.depth.empty()) {
    std::fill(out.begin() + 3 * kObsPlane, out.begin() + 4 * kObsPlane, 0.0f);
  } else {
    std::copy(v.depth.begin(), v.depth.end(), out.begin() + 3 * kObsPlane);
  }
}

inline std::array<float, kActionDim> normalized_action_f32(const ActionVec& raw, const NormStats& s) {
  std::array<float, kActionDim> out;
  for (int i = 0; i < kActionDim; ++i) out[i] = static_cast<float>((raw[i] - s.mean[i]) / s.std[i]);
  return out;
}

struct Sample {
  std::vector<float> obs;  // kObsSize
  std::array<float, kActionDim> act{};
};

template <RecordSource S>
Sample get_item(const S& source, std::size_t global_index) {
  if (global_index >= source.size()) {
    throw Error(ErrorCode::IndexOutOfRange,
                "item " + std::to_string(global_index) + " of " + std::to_string(source.size()));
  }
  const RecordView v = source.view(global_index);
  Sample s;
  s.obs.resize(kObsSize);
  fill_observation(v, s.obs);
  s.act = normalized_action_f32(v.action, source.norm_stats());
  return s;
}

struct BatchSpec {
  std::size_t batch_size = 64;
  bool shuffle = true;
  std::uint64_t seed = 0;
  std::size_t prefetch_depth = 2;
  bool drop_last = false;
};

struct Batch {
  std::size_t size = 0;
  std::vector<float> obs;              // size x 4 x 256 x 256
  std::vector<float> act;              // size x 7, normalized
  std::vector<std::size_t> indices;    // global record indices

  friend bool operator==(const Batch&, const Batch&) = default;
};

/// Visiting order for one epoch: identity, or a Fisher-Yates shuffle seeded
/// with seed ^ epoch.
inline std::vector<std::size_t> epoch_order(std::size_t n, bool shuffle, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (shuffle && n > 1) {
    Rng rng(seed ^ epoch);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  }
  return order;
}

template <RecordSource S>
Batch materialize_batch(const S& source, std::span<const std::size_t> indices) {
  Batch b;
  b.size = indices.size();
  b.indices.assign(indices.begin(), indices.end());
  b.obs.resize(b.size * kObsSize);
  b.act.resize(b.size * kActionDim);
  for (std::size_t k = 0; k < b.size; ++k) {
    const RecordView v = source.view(indices[k]);
    fill_observation(v, std::span<float>(b.obs).subspan(k * kObsSize, kObsSize));
    const auto a = normalized_action_f32(v.action, source.norm_stats());
    std::copy(a.begin(), a.end(), b.act.begin() + static_cast<std::ptrdiff_t>(k * kActionDim));
  }
  return b;
}

/// One epoch of batches. The sequence depends only on (source, spec, epoch);
/// prefetch depth changes latency, never content.
template <RecordSource S>
class BatchIterator {
 public:
  BatchIterator(const S& source, BatchSpec spec, std::uint64_t epoch = 0)
      : source_(&source), spec_(spec), order_(epoch_order(source.size(), spec.shuffle, spec.seed, epoch)) {
    if (spec_.batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch_size must be >= 1");
    std::size_t n = order_.size();
    if (spec_.drop_last) n -= n % spec_.batch_size;
    for (std::size_t s = 0; s < n; s += spec_.batch_size) bounds_.push_back({s, std::min(s + spec_.batch_size, n)});
    if (spec_.prefetch_depth > 0 && !bounds_.empty()) {
      worker_ = std::jthread([this](std::stop_token st) { produce(st); });
    }
  }

  BatchIterator(const BatchIterator&) = delete;
  BatchIterator& operator=(const BatchIterator&) = delete;

  ~BatchIterator() {
    if (worker_.joinable()) {
      {
        std::lock_guard lk(mu_);
        worker_.request_stop();
      }
      cv_.notify_all();
    }
  }

  std::size_t num_batches() const { return bounds_.size(); }

  std::optional<Batch> next() {
    if (consumed_ == bounds_.size()) return std::nullopt;
    if (spec_.prefetch_depth == 0) return make(consumed_++);
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return !queue_.empty() || error_; });
    if (queue_.empty()) std::rethrow_exception(error_);
    Batch b = std::move(queue_.front());
    queue_.pop_front();
    ++consumed_;
    cv_.notify_all();
    return b;
  }

 private:
  Batch make(std::size_t k) const {
    const auto [lo, hi] = bounds_[k];
    return materialize_batch(*source_, std::span<const std::size_t>(order_).subspan(lo, hi - lo));
  }

  void produce(std::stop_token st) {
    for (std::size_t k = 0; k < bounds_.size(); ++k) {
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return queue_.size() < spec_.prefetch_depth || st.stop_requested(); });
        if (st.stop_requested()) return;
      }
      try {
        Batch b = make(k);
        std::lock_guard lk(mu_);
        queue_.push_back(std::move(b));
      } catch (...) {
        std::lock_guard lk(mu_);
        error_ = std::current_exception();
        cv_.notify_all();
        return;
      }
      cv_.notify_all();
    }
  }

  const S* source_;
  BatchSpec spec_;
  std::vector<std::size_t> order_;
  std::vector<std::pair<std::size_t, std::size_t>> bounds_;
  std::size_t consumed_ = 0;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Batch> queue_;
  std::exception_ptr error_;
  std::jthread worker_;  // last: joined before the queue is destroyed
};

template <RecordSource S>
BatchIterator<S> batch_iter(const S& source, const BatchSpec& spec, std::uint64_t epoch = 0) {
  return BatchIterator<S>(source, spec, epoch);
}

}  // namespace demoforge
