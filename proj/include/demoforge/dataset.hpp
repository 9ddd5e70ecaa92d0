#pragma once

// Sharded on-disk training set.
//
//   manifest.json        format_version 1, shard list with CRC-64 checksums,
//                        per-trajectory provenance, NormStats
//   shard_%05d.bin       records: u32 payload length, then
//                          u32 trajectory id, u32 frame index,
//                          7 x f64 action (unnormalized),
//                          256*256*3 u8 rgb (HWC),
//                          [256*256 f32 depth meters, rgbd variant only]
//   shard_%05d.idx       u64 byte offset of each record
//
// All multi-byte values are little-endian.

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "demoforge/crc64.hpp"
#include "demoforge/error.hpp"
#include "demoforge/image.hpp"
#include "demoforge/recording.hpp"
#include "demoforge/trajectory.hpp"

namespace demoforge {

static_assert(std::endian::native == std::endian::little, "shard I/O assumes a little-endian host");

inline constexpr int kManifestVersion = 1;
inline constexpr std::size_t kDefaultShardSize = 1024;
inline constexpr std::size_t kRgbBytes = static_cast<std::size_t>(kFrameSize) * kFrameSize * 3;
inline constexpr std::size_t kDepthBytes = static_cast<std::size_t>(kFrameSize) * kFrameSize * sizeof(float);
inline constexpr std::size_t kRecordHeaderBytes = 4 + 4 + kActionDim * 8;

enum class Variant { RgbOnly, Rgbd };

inline std::string to_string(Variant v) { return v == Variant::Rgbd ? "rgbd" : "rgb_only"; }

inline Variant parse_variant(std::string_view s) {
  if (s == "rgbd") return Variant::Rgbd;
  if (s == "rgb_only" || s == "rgb-only") return Variant::RgbOnly;
  throw Error(ErrorCode::InvalidArgument, "unknown variant '" + std::string(s) + "'");
}

inline std::size_t payload_bytes(Variant v) {
  return kRecordHeaderBytes + kRgbBytes + (v == Variant::Rgbd ? kDepthBytes : 0);
}

struct TrainingRecord {
  std::uint32_t trajectory_id = 0;
  std::uint32_t frame_index = 0;
  Action7 action;
  ImageU8 rgb;                    // kFrameSize^2 x 3
  std::optional<DepthMap> depth;  // kFrameSize^2, meters
};

struct TrajectoryInfo {
  std::uint32_t id = 0;
  std::string source;
  std::string recorder_id;
  std::string task_label;
  std::string home_id;
  std::string env_id;
  std::size_t frame_count = 0;  // raw recorded frames
  double fps = kRecordHz;
  std::size_t records = 0;
};

struct ProcessedTrajectory {
  TrajectoryInfo info;
  std::vector<TrainingRecord> records;
};

struct ShardEntry {
  std::string file;
  std::string index_file;
  std::size_t records = 0;
  std::uint64_t bytes = 0;
  std::uint64_t crc64 = 0;
};

struct GroupCount {
  std::size_t demos = 0;
  std::size_t frames = 0;
  double seconds = 0.0;
};

struct DatasetManifest {
  int format_version = kManifestVersion;
  Variant variant = Variant::Rgbd;
  std::vector<ShardEntry> shards;
  std::size_t total_records = 0;
  std::size_t total_trajectories = 0;
  std::size_t total_frames = 0;
  double total_seconds = 0.0;
  std::map<std::string, GroupCount> per_home;
  std::map<std::string, GroupCount> per_task;
  NormStats norm_stats;
  std::vector<TrajectoryInfo> trajectories;
};

// ---------------------------------------------------------------------------
// manifest json

inline std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json shards = nlohmann::json::array();
  for (const auto& s : m.shards) {
    shards.push_back({{"file", s.file}, {"index", s.index_file}, {"records", s.records}, {"bytes", s.bytes},
                      {"crc64", hex64(s.crc64)}});
  }
  auto groups = [](const std::map<std::string, GroupCount>& g) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : g) j[k] = {{"demos", v.demos}, {"frames", v.frames}, {"seconds", v.seconds}};
    return j;
  };
  nlohmann::json trajs = nlohmann::json::array();
  for (const auto& t : m.trajectories) {
    trajs.push_back({{"id", t.id}, {"source", t.source}, {"recorder_id", t.recorder_id},
                     {"task_label", t.task_label}, {"home_id", t.home_id}, {"env_id", t.env_id},
                     {"frames", t.frame_count}, {"fps", t.fps}, {"records", t.records}});
  }
  return {
      {"format_version", m.format_version},
      {"variant", to_string(m.variant)},
      {"frame_size", kFrameSize},
      {"shards", shards},
      {"total_records", m.total_records},
      {"total_trajectories", m.total_trajectories},
      {"total_frames", m.total_frames},
      {"total_seconds", m.total_seconds},
      {"per_home", groups(m.per_home)},
      {"per_task", groups(m.per_task)},
      {"norm_stats", {{"mean", m.norm_stats.mean}, {"std", m.norm_stats.std}}},
      {"trajectories", trajs},
  };
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kManifestVersion) {
      throw Error(ErrorCode::VersionUnsupported, "manifest format_version " + std::to_string(m.format_version));
    }
    m.variant = parse_variant(j.at("variant").get<std::string>());
    for (const auto& s : j.at("shards")) {
      ShardEntry e;
      e.file = s.at("file").get<std::string>();
      e.index_file = s.at("index").get<std::string>();
      e.records = s.at("records").get<std::size_t>();
      e.bytes = s.at("bytes").get<std::uint64_t>();
      e.crc64 = std::stoull(s.at("crc64").get<std::string>(), nullptr, 16);
      m.shards.push_back(e);
    }
    m.total_records = j.at("total_records").get<std::size_t>();
    m.total_trajectories = j.at("total_trajectories").get<std::size_t>();
    m.total_frames = j.at("total_frames").get<std::size_t>();
    m.total_seconds = j.at("total_seconds").get<double>();
    auto groups = [](const nlohmann::json& g) {
      std::map<std::string, GroupCount> out;
      for (const auto& [k, v] : g.items()) {
        out[k] = {v.at("demos").get<std::size_t>(), v.at("frames").get<std::size_t>(), v.at("seconds").get<double>()};
      }
      return out;
    };
    m.per_home = groups(j.at("per_home"));
    m.per_task = groups(j.at("per_task"));
    m.norm_stats.mean = j.at("norm_stats").at("mean").get<ActionVec>();
    m.norm_stats.std = j.at("norm_stats").at("std").get<ActionVec>();
    for (const auto& t : j.at("trajectories")) {
      TrajectoryInfo info;
      info.id = t.at("id").get<std::uint32_t>();
      info.source = t.at("source").get<std::string>();
      info.recorder_id = t.at("recorder_id").get<std::string>();
      info.task_label = t.at("task_label").get<std::string>();
      info.home_id = t.at("home_id").get<std::string>();
      info.env_id = t.at("env_id").get<std::string>();
      info.frame_count = t.at("frames").get<std::size_t>();
      info.fps = t.at("fps").get<double>();
      info.records = t.at("records").get<std::size_t>();
      m.trajectories.push_back(info);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedMeta, std::string("manifest: ") + e.what());
  }
  return m;
}

// ---------------------------------------------------------------------------
// writing

/// Streams records into fixed-size shards and writes the manifest on finish.
/// One writer per output directory.
class ShardWriter {
 public:
  ShardWriter(std::filesystem::path out_dir, Variant variant, std::size_t shard_size = kDefaultShardSize)
      : dir_(std::move(out_dir)), variant_(variant), shard_size_(shard_size) {
    if (shard_size_ == 0) throw Error(ErrorCode::InvalidArgument, "shard_size must be >= 1");
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::IoFailure, dir_.string() + ": " + ec.message());
    manifest_.variant = variant_;
  }

  void add_trajectory(const ProcessedTrajectory& t) {
    begin_trajectory(t.info);
    for (const auto& r : t.records) add_record(r);
  }

  void begin_trajectory(const TrajectoryInfo& info) {
    manifest_.trajectories.push_back(info);
    manifest_.trajectories.back().records = 0;
  }

  void add_record(const TrainingRecord& r) {
    if (manifest_.trajectories.empty()) throw Error(ErrorCode::InvalidArgument, "add_record before begin_trajectory");
    if (r.rgb.width != kFrameSize || r.rgb.height != kFrameSize || r.rgb.channels != 3) {
      throw Error(ErrorCode::InvalidArgument, "record rgb must be 256x256x3");
    }
    if (variant_ == Variant::Rgbd &&
        (!r.depth || r.depth->width != kFrameSize || r.depth->height != kFrameSize)) {
      throw Error(ErrorCode::InvalidArgument, "rgbd record needs a 256x256 depth map");
    }
    if (!r.action.finite()) {
      throw Error(ErrorCode::NonFiniteAction, "trajectory " + std::to_string(r.trajectory_id) + " frame " +
                                                  std::to_string(r.frame_index) + " has a non-finite action");
    }
    if (!out_.is_open()) open_next_shard();

    const std::uint32_t len = static_cast<std::uint32_t>(payload_bytes(variant_));
    buf_.clear();
    append(&len, 4);
    append(&r.trajectory_id, 4);
    append(&r.frame_index, 4);
    const auto a = r.action.to_vec();
    append(a.data(), sizeof(double) * kActionDim);
    append(r.rgb.data.data(), kRgbBytes);
    if (variant_ == Variant::Rgbd) append(r.depth->data.data(), kDepthBytes);

    offsets_.push_back(current_.bytes);
    out_.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!out_) throw Error(ErrorCode::IoFailure, (dir_ / current_.file).string());
    crc_.update(buf_.data(), buf_.size());
    current_.bytes += buf_.size();
    ++current_.records;
    actions_.push_back(r.action);
    ++manifest_.trajectories.back().records;
    if (current_.records == shard_size_) close_shard();
  }

  DatasetManifest finish() {
    if (out_.is_open()) close_shard();
    if (actions_.empty()) throw Error(ErrorCode::EmptyInput, "no records to write");
    auto& m = manifest_;
    m.total_records = actions_.size();
    m.total_trajectories = m.trajectories.size();
    for (const auto& t : m.trajectories) {
      const double seconds = static_cast<double>(t.frame_count) / t.fps;
      m.total_frames += t.frame_count;
      m.total_seconds += seconds;
      for (auto* g : {&m.per_home[t.home_id], &m.per_task[t.task_label]}) {
        ++g->demos;
        g->frames += t.frame_count;
        g->seconds += seconds;
      }
    }
    m.norm_stats = actions_.size() >= 2 ? compute_norm_stats(actions_) : NormStats::identity();
    std::ofstream out(dir_ / "manifest.json", std::ios::trunc);
    out << manifest_to_json(m).dump(2) << "\n";
    if (!out) throw Error(ErrorCode::IoFailure, (dir_ / "manifest.json").string());
    return m;
  }

 private:
  void append(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }

  void open_next_shard() {
    char name[32];
    std::snprintf(name, sizeof(name), "shard_%05zu", manifest_.shards.size());
    current_ = {std::string(name) + ".bin", std::string(name) + ".idx", 0, 0, 0};
    out_.open(dir_ / current_.file, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error(ErrorCode::IoFailure, (dir_ / current_.file).string());
    crc_ = Crc64{};
    offsets_.clear();
  }

  void close_shard() {
    out_.close();
    if (!out_) throw Error(ErrorCode::IoFailure, (dir_ / current_.file).string());
    std::ofstream idx(dir_ / current_.index_file, std::ios::binary | std::ios::trunc);
    idx.write(reinterpret_cast<const char*>(offsets_.data()),
              static_cast<std::streamsize>(offsets_.size() * sizeof(std::uint64_t)));
    if (!idx) throw Error(ErrorCode::IoFailure, (dir_ / current_.index_file).string());
    current_.crc64 = crc_.value();
    manifest_.shards.push_back(current_);
  }

  std::filesystem::path dir_;
  Variant variant_;
  std::size_t shard_size_;
  DatasetManifest manifest_;
  ShardEntry current_;
  std::ofstream out_;
  Crc64 crc_;
  std::vector<std::uint64_t> offsets_;
  std::vector<std::uint8_t> buf_;
  std::vector<Action7> actions_;
};

inline DatasetManifest write_shards(std::span<const ProcessedTrajectory> trajectories,
                                    const std::filesystem::path& out_dir, Variant variant,
                                    std::size_t shard_size = kDefaultShardSize) {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.records.size();
  if (n == 0) throw Error(ErrorCode::EmptyInput, "no records to write");
  ShardWriter w(out_dir, variant, shard_size);
  for (const auto& t : trajectories) w.add_trajectory(t);
  return w.finish();
}

// ---------------------------------------------------------------------------
// reading

namespace detail {

class MappedFile {
 public:
  MappedFile() = default;
  explicit MappedFile(const std::filesystem::path& path) {
    const int fd = ::open(path.c_str(), O_RDONLY);
    if (fd < 0) throw Error(ErrorCode::MissingShard, path.string());
    struct stat st {};
    if (::fstat(fd, &st) != 0) {
      ::close(fd);
      throw Error(ErrorCode::IoFailure, path.string());
    }
    size_ = static_cast<std::size_t>(st.st_size);
    if (size_ > 0) {
      void* p = ::mmap(nullptr, size_, PROT_READ, MAP_PRIVATE, fd, 0);
      if (p == MAP_FAILED) {
        ::close(fd);
        throw Error(ErrorCode::IoFailure, path.string() + ": mmap failed");
      }
      data_ = static_cast<const std::byte*>(p);
    }
    ::close(fd);
  }
  MappedFile(const MappedFile&) = delete;
  MappedFile& operator=(const MappedFile&) = delete;
  MappedFile(MappedFile&& o) noexcept { *this = std::move(o); }
  MappedFile& operator=(MappedFile&& o) noexcept {
    std::swap(data_, o.data_);
    std::swap(size_, o.size_);
    return *this;
  }
  ~MappedFile() {
    if (data_) ::munmap(const_cast<std::byte*>(data_), size_);
  }

  std::span<const std::byte> bytes() const { return {data_, size_}; }

 private:
  const std::byte* data_ = nullptr;
  std::size_t size_ = 0;
};

}  // namespace detail

/// Zero-copy view of one stored record; valid while the handle lives.
struct RecordView {
  std::uint32_t trajectory_id = 0;
  std::uint32_t frame_index = 0;
  ActionVec action{};
  std::span<const std::uint8_t> rgb;
  std::span<const float> depth;  // empty for rgb_only

  TrainingRecord to_record() const {
    TrainingRecord r;
    r.trajectory_id = trajectory_id;
    r.frame_index = frame_index;
    r.action = Action7::from_vec(action);
    r.rgb = ImageU8(kFrameSize, kFrameSize, 3);
    std::copy(rgb.begin(), rgb.end(), r.rgb.data.begin());
    if (!depth.empty()) {
      r.depth = DepthMap(kFrameSize, kFrameSize);
      std::copy(depth.begin(), depth.end(), r.depth->data.begin());
    }
    return r;
  }
};

/// Read-only, thread-safe view of a dataset. Copies share state. Each shard
/// is checksummed on its first access.
class DatasetHandle {
 public:
  DatasetHandle() = default;

  static DatasetHandle open(const std::filesystem::path& manifest_path) {
    auto path = manifest_path;
    if (std::filesystem::is_directory(path)) path /= "manifest.json";
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedMeta, std::string("manifest: ") + e.what());
    }
    auto impl = std::make_shared<Impl>();
    impl->dir = path.parent_path();
    impl->manifest = manifest_from_json(j);
    const auto& m = impl->manifest;

    std::size_t sum = 0, traj_records = 0;
    for (const auto& s : m.shards) {
      if (!std::filesystem::exists(impl->dir / s.file)) throw Error(ErrorCode::MissingShard, s.file);
      if (!std::filesystem::exists(impl->dir / s.index_file)) throw Error(ErrorCode::MissingShard, s.index_file);
      impl->starts.push_back(sum);
      sum += s.records;
    }
    for (const auto& t : m.trajectories) traj_records += t.records;
    if (sum != m.total_records || traj_records != m.total_records ||
        m.trajectories.size() != m.total_trajectories) {
      throw Error(ErrorCode::CountMismatch, "manifest totals disagree with shard and trajectory counts");
    }
    impl->shards = std::vector<ShardState>(m.shards.size());
    DatasetHandle h;
    h.impl_ = std::move(impl);
    return h;
  }

  bool valid() const { return impl_ != nullptr; }
  std::size_t size() const { return impl_->manifest.total_records; }
  const NormStats& norm_stats() const { return impl_->manifest.norm_stats; }
  Variant variant() const { return impl_->manifest.variant; }
  const DatasetManifest& manifest() const { return impl_->manifest; }
  const std::filesystem::path& directory() const { return impl_->dir; }

  RecordView view(std::size_t global_index) const {
    if (global_index >= size()) {
      throw Error(ErrorCode::IndexOutOfRange,
                  "record " + std::to_string(global_index) + " of " + std::to_string(size()));
    }
    const auto it = std::upper_bound(impl_->starts.begin(), impl_->starts.end(), global_index);
    const std::size_t s = static_cast<std::size_t>(it - impl_->starts.begin()) - 1;
    const ShardState& shard = load(s);
    const std::size_t local = global_index - impl_->starts[s];
    const auto bytes = shard.file.bytes();
    const std::uint64_t off = shard.offsets[local];

    std::uint32_t len;
    std::memcpy(&len, bytes.data() + off, 4);
    const std::byte* p = bytes.data() + off + 4;
    RecordView v;
    std::memcpy(&v.trajectory_id, p, 4);
    std::memcpy(&v.frame_index, p + 4, 4);
    std::memcpy(v.action.data(), p + 8, sizeof(double) * kActionDim);
    p += kRecordHeaderBytes;
    v.rgb = {reinterpret_cast<const std::uint8_t*>(p), kRgbBytes};
    if (variant() == Variant::Rgbd) {
      v.depth = {reinterpret_cast<const float*>(p + kRgbBytes), kDepthBytes / sizeof(float)};
    }
    return v;
  }

  TrainingRecord read(std::size_t global_index) const { return view(global_index).to_record(); }

  /// Forces checksum verification of every shard.
  void verify_all() const {
    for (std::size_t s = 0; s < impl_->shards.size(); ++s) load(s);
  }

 private:
  struct ShardState {
    std::once_flag once;
    detail::MappedFile file;
    std::vector<std::uint64_t> offsets;
    std::exception_ptr error;
  };

  struct Impl {
    std::filesystem::path dir;
    DatasetManifest manifest;
    std::vector<std::size_t> starts;
    std::vector<ShardState> shards;
  };

  const ShardState& load(std::size_t s) const {
    ShardState& st = impl_->shards[s];
    std::call_once(st.once, [&] {
      try {
        const auto& e = impl_->manifest.shards[s];
        st.file = detail::MappedFile(impl_->dir / e.file);
        const auto bytes = st.file.bytes();
        if (bytes.size() != e.bytes || crc64(bytes) != e.crc64) {
          throw Error(ErrorCode::ChecksumMismatch, e.file);
        }
        detail::MappedFile idx(impl_->dir / e.index_file);
        const auto ib = idx.bytes();
        if (ib.size() != e.records * sizeof(std::uint64_t)) {
          throw Error(ErrorCode::CountMismatch, e.index_file + ": record count differs from manifest");
        }
        st.offsets.resize(e.records);
        if (!ib.empty()) std::memcpy(st.offsets.data(), ib.data(), ib.size());
        const std::size_t rec = payload_bytes(impl_->manifest.variant) + 4;
        for (std::size_t i = 0; i < st.offsets.size(); ++i) {
          if ((i > 0 && st.offsets[i] <= st.offsets[i - 1]) || st.offsets[i] + rec > bytes.size()) {
            throw Error(ErrorCode::ChecksumMismatch, e.index_file + ": bad offset table");
          }
          std::uint32_t len;
          std::memcpy(&len, bytes.data() + st.offsets[i], 4);
          if (len + 4 != rec) throw Error(ErrorCode::ChecksumMismatch, e.file + ": record length disagrees with variant");
        }
      } catch (...) {
        st.error = std::current_exception();
      }
    });
    if (st.error) std::rethrow_exception(st.error);
    return st;
  }

  std::shared_ptr<Impl> impl_;
};

inline DatasetHandle open_dataset(const std::filesystem::path& manifest_path) {
  return DatasetHandle::open(manifest_path);
}

/// Rewrites a dataset under another variant. Dropping depth is the only
/// lossless direction; rgbd from rgb_only is rejected.
inline DatasetManifest export_variant(const DatasetHandle& h, const std::filesystem::path& out_dir, Variant variant,
                                      std::size_t shard_size = kDefaultShardSize) {
  if (variant == Variant::Rgbd && h.variant() == Variant::RgbOnly) {
    throw Error(ErrorCode::InvalidArgument, "cannot export rgbd from an rgb_only dataset");
  }
  ShardWriter w(out_dir, variant, shard_size);
  std::size_t g = 0;
  for (const auto& info : h.manifest().trajectories) {
    w.begin_trajectory(info);
    for (std::size_t k = 0; k < info.records; ++k, ++g) {
      auto rec = h.read(g);
      if (variant == Variant::RgbOnly) rec.depth.reset();
      w.add_record(rec);
    }
  }
  return w.finish();
}

// ---------------------------------------------------------------------------
// statistics

struct StatsRow {
  std::string group;  // "home", "task", or "total"
  std::string key;
  std::size_t demos = 0;
  std::size_t frames = 0;
  double minutes = 0.0;
};

struct StatsTable {
  std::vector<StatsRow> rows;
  StatsRow total;
};

inline StatsTable stats_report(const DatasetHandle& h) {
  const auto& m = h.manifest();
  StatsTable t;
  for (const auto& [k, g] : m.per_home) t.rows.push_back({"home", k, g.demos, g.frames, g.seconds / 60.0});
  for (const auto& [k, g] : m.per_task) t.rows.push_back({"task", k, g.demos, g.frames, g.seconds / 60.0});
  t.total = {"total", "all", m.total_trajectories, m.total_frames, m.total_seconds / 60.0};
  return t;
}

inline nlohmann::json stats_to_json(const StatsTable& t) {
  auto row = [](const StatsRow& r) {
    return nlohmann::json{{"group", r.group}, {"key", r.key}, {"demos", r.demos}, {"frames", r.frames},
                          {"minutes", r.minutes}};
  };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) rows.push_back(row(r));
  return {{"rows", rows}, {"total", row(t.total)}};
}

// ---------------------------------------------------------------------------
// quality-control filtering

struct QCRules {
  std::vector<std::string> excluded_ids;  // manual-review rejections
};

struct Rejection {
  RecordingBundle bundle;
  std::vector<std::string> reasons;
};

struct QCFilterResult {
  std::vector<RecordingBundle> kept;
  std::vector<Rejection> rejected;
};

inline QCFilterResult qc_filter(std::span<const RecordingBundle> bundles, const QCRules& rules = {}) {
  QCFilterResult out;
  for (const auto& b : bundles) {
    std::vector<std::string> reasons = validate_bundle(b).failed_checks();
    if (std::find(rules.excluded_ids.begin(), rules.excluded_ids.end(), b.id()) != rules.excluded_ids.end()) {
      reasons.push_back("excluded");
    }
    if (reasons.empty()) {
      out.kept.push_back(b);
    } else {
      out.rejected.push_back({b, std::move(reasons)});
    }
  }
  return out;
}

}  // namespace demoforge
