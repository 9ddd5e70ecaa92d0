#pragma once

// Recording bundles: one demonstration on disk.
//
//   <bundle>/meta.json         capture metadata
//   <bundle>/poses.csv         ts,px,py,pz,qw,qx,qy,qz  (one row per frame)
//   <bundle>/rgb/%06d.png      8-bit RGB
//   <bundle>/depth/%06d.raw    little-endian u16 millimeters, row-major
//   <bundle>/annotations.csv   optional gripper tips: frame_index,ax,ay,bx,by

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "demoforge/error.hpp"
#include "demoforge/image.hpp"
#include "demoforge/se3.hpp"
#include "demoforge/text.hpp"

namespace demoforge {

namespace fs = std::filesystem;

/// Side length of the square model input.
inline constexpr int kFrameSize = 256;

inline constexpr double kQuatNormTolerance = 1e-3;

struct BundleMeta {
  int rgb_width = 1280;
  int rgb_height = 720;
  int depth_width = 256;
  int depth_height = 192;
  double nominal_fps = 30.0;
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
  std::string recorder_id;
  std::string task_label;
  std::string home_id;
  std::string env_id;
  // Optional calibration for tip annotations; absent in plain captures.
  std::optional<double> gripper_max_tip_distance_px;

  friend bool operator==(const BundleMeta&, const BundleMeta&) = default;
};

struct PoseRow {
  double ts = 0.0;
  Vec3 position = Vec3::Zero();
  Quat q;  // as stored, unit norm but not canonicalized

  Pose pose() const { return {position, q}; }

  friend bool operator==(const PoseRow& a, const PoseRow& b) {
    return a.ts == b.ts && a.position == b.position && a.q == b.q;
  }
};

struct TipAnnotation {
  double ax = 0, ay = 0, bx = 0, by = 0;
  friend bool operator==(const TipAnnotation&, const TipAnnotation&) = default;
};

struct RecordingBundle {
  fs::path root_path;
  BundleMeta meta;
  std::size_t frame_count = 0;
  std::vector<PoseRow> pose_rows;
  std::map<std::size_t, TipAnnotation> annotations;

  std::string id() const { return root_path.filename().string(); }
  fs::path rgb_path(std::size_t i) const;
  fs::path depth_path(std::size_t i) const;
};

inline std::string frame_file_name(std::size_t index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu.%s", index, ext);
  return buf;
}

inline fs::path RecordingBundle::rgb_path(std::size_t i) const { return root_path / "rgb" / frame_file_name(i, "png"); }
inline fs::path RecordingBundle::depth_path(std::size_t i) const {
  return root_path / "depth" / frame_file_name(i, "raw");
}

// ---------------------------------------------------------------------------
// metadata

inline nlohmann::json meta_to_json(const BundleMeta& m) {
  nlohmann::json j = {
      {"rgb_width", m.rgb_width},     {"rgb_height", m.rgb_height}, {"depth_width", m.depth_width},
      {"depth_height", m.depth_height}, {"nominal_fps", m.nominal_fps}, {"fx", m.fx},
      {"fy", m.fy},                   {"cx", m.cx},                 {"cy", m.cy},
      {"recorder_id", m.recorder_id}, {"task_label", m.task_label}, {"home_id", m.home_id},
      {"env_id", m.env_id},
  };
  if (m.gripper_max_tip_distance_px) j["gripper_max_tip_distance_px"] = *m.gripper_max_tip_distance_px;
  return j;
}

inline BundleMeta meta_from_json(const nlohmann::json& j) {
  BundleMeta m;
  try {
    m.rgb_width = j.at("rgb_width").get<int>();
    m.rgb_height = j.at("rgb_height").get<int>();
    m.depth_width = j.at("depth_width").get<int>();
    m.depth_height = j.at("depth_height").get<int>();
    m.nominal_fps = j.at("nominal_fps").get<double>();
    m.fx = j.at("fx").get<double>();
    m.fy = j.at("fy").get<double>();
    m.cx = j.at("cx").get<double>();
    m.cy = j.at("cy").get<double>();
    m.recorder_id = j.at("recorder_id").get<std::string>();
    m.task_label = j.at("task_label").get<std::string>();
    m.home_id = j.at("home_id").get<std::string>();
    m.env_id = j.at("env_id").get<std::string>();
    if (j.contains("gripper_max_tip_distance_px")) {
      m.gripper_max_tip_distance_px = j.at("gripper_max_tip_distance_px").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedMeta, e.what());
  }
  if (m.rgb_width <= 0 || m.rgb_height <= 0 || m.depth_width <= 0 || m.depth_height <= 0) {
    throw Error(ErrorCode::MalformedMeta, "image dimensions must be positive");
  }
  if (!(m.nominal_fps > 0.0) || !std::isfinite(m.nominal_fps)) {
    throw Error(ErrorCode::MalformedMeta, "nominal_fps must be positive");
  }
  return m;
}

// ---------------------------------------------------------------------------
// parsing

namespace detail {

inline std::vector<PoseRow> read_pose_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::CountMismatch, "poses.csv is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "ts,px,py,pz,qw,qx,qy,qz") throw Error(ErrorCode::MalformedMeta, "poses.csv: unexpected header '" + line + "'");

  std::vector<PoseRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 8) {
      throw Error(ErrorCode::MalformedMeta, "poses.csv line " + std::to_string(lineno) + ": expected 8 fields");
    }
    double v[8];
    for (int i = 0; i < 8; ++i) {
      auto parsed = parse_double(fields[i]);
      if (!parsed || !std::isfinite(*parsed)) {
        throw Error(ErrorCode::MalformedMeta, "poses.csv line " + std::to_string(lineno) + ": bad number");
      }
      v[i] = *parsed;
    }
    PoseRow row{v[0], {v[1], v[2], v[3]}, {v[4], v[5], v[6], v[7]}};
    const double n = row.q.norm();
    if (std::abs(n - 1.0) > kQuatNormTolerance) {
      throw Error(ErrorCode::MalformedQuaternion,
                  "poses.csv line " + std::to_string(lineno) + ": quaternion norm " + format_double(n));
    }
    // Rows already unit to within rounding are kept verbatim so that a
    // write/parse cycle is a fixed point.
    if (std::abs(n - 1.0) > 1e-12) row.q = {row.q.w / n, row.q.x / n, row.q.y / n, row.q.z / n};
    if (!rows.empty() && !(row.ts > rows.back().ts)) {
      throw Error(ErrorCode::NonMonotonicTimestamps, "poses.csv line " + std::to_string(lineno));
    }
    rows.push_back(row);
  }
  return rows;
}

inline std::map<std::size_t, TipAnnotation> read_annotations_csv(const fs::path& path) {
  std::map<std::size_t, TipAnnotation> out;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 5) throw Error(ErrorCode::MalformedMeta, "annotations.csv: expected 5 fields");
    auto idx = parse_int(f[0]);
    auto ax = parse_double(f[1]), ay = parse_double(f[2]), bx = parse_double(f[3]), by = parse_double(f[4]);
    if (!idx || *idx < 0 || !ax || !ay || !bx || !by) throw Error(ErrorCode::MalformedMeta, "annotations.csv: bad row");
    out[static_cast<std::size_t>(*idx)] = {*ax, *ay, *bx, *by};
  }
  return out;
}

inline std::size_t count_files(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file() ? 1 : 0;
  return n;
}

}  // namespace detail

inline RecordingBundle parse_bundle(const fs::path& path) {
  if (!fs::is_directory(path)) throw Error(ErrorCode::MissingFile, path.string() + " is not a directory");
  for (const char* required : {"meta.json", "poses.csv", "rgb", "depth"}) {
    if (!fs::exists(path / required)) throw Error(ErrorCode::MissingFile, (path / required).string());
  }

  RecordingBundle b;
  b.root_path = path;
  {
    std::ifstream in(path / "meta.json");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedMeta, std::string("meta.json: ") + e.what());
    }
    b.meta = meta_from_json(j);
  }
  b.pose_rows = detail::read_pose_csv(path / "poses.csv");
  b.frame_count = b.pose_rows.size();

  for (std::size_t i = 0; i < b.frame_count; ++i) {
    if (!fs::exists(b.rgb_path(i))) throw Error(ErrorCode::MissingFile, b.rgb_path(i).string());
    if (!fs::exists(b.depth_path(i))) throw Error(ErrorCode::MissingFile, b.depth_path(i).string());
  }
  const std::size_t n_rgb = detail::count_files(path / "rgb");
  const std::size_t n_depth = detail::count_files(path / "depth");
  if (n_rgb != b.frame_count || n_depth != b.frame_count) {
    throw Error(ErrorCode::CountMismatch, std::to_string(b.frame_count) + " pose rows, " + std::to_string(n_rgb) +
                                              " rgb files, " + std::to_string(n_depth) + " depth files");
  }
  if (fs::exists(path / "annotations.csv")) b.annotations = detail::read_annotations_csv(path / "annotations.csv");
  return b;
}

// ---------------------------------------------------------------------------
// writing

inline void write_bundle_text(const fs::path& dir, const BundleMeta& meta, const std::vector<PoseRow>& rows,
                              const std::map<std::size_t, TipAnnotation>& annotations) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "meta.json", std::ios::trunc);
    out << meta_to_json(meta).dump(2) << "\n";
    if (!out) throw Error(ErrorCode::IoFailure, (dir / "meta.json").string());
  }
  {
    std::ofstream out(dir / "poses.csv", std::ios::trunc);
    out << "ts,px,py,pz,qw,qx,qy,qz\n";
    for (const auto& r : rows) {
      out << format_double(r.ts) << ',' << format_double(r.position.x()) << ',' << format_double(r.position.y())
          << ',' << format_double(r.position.z()) << ',' << format_double(r.q.w) << ',' << format_double(r.q.x)
          << ',' << format_double(r.q.y) << ',' << format_double(r.q.z) << '\n';
    }
    if (!out) throw Error(ErrorCode::IoFailure, (dir / "poses.csv").string());
  }
  if (!annotations.empty()) {
    std::ofstream out(dir / "annotations.csv", std::ios::trunc);
    out << "frame_index,ax,ay,bx,by\n";
    for (const auto& [i, a] : annotations) {
      out << i << ',' << format_double(a.ax) << ',' << format_double(a.ay) << ',' << format_double(a.bx) << ','
          << format_double(a.by) << '\n';
    }
  }
}

/// Writes a parsed bundle to a new directory, copying its frame files.
inline void save_bundle(const RecordingBundle& b, const fs::path& dest) {
  write_bundle_text(dest, b.meta, b.pose_rows, b.annotations);
  fs::create_directories(dest / "rgb");
  fs::create_directories(dest / "depth");
  for (std::size_t i = 0; i < b.frame_count; ++i) {
    fs::copy_file(b.rgb_path(i), dest / "rgb" / frame_file_name(i, "png"), fs::copy_options::overwrite_existing);
    fs::copy_file(b.depth_path(i), dest / "depth" / frame_file_name(i, "raw"), fs::copy_options::overwrite_existing);
  }
}

/// Streams frames of a new recording to disk.
class BundleWriter {
 public:
  BundleWriter(fs::path dir, BundleMeta meta) : dir_(std::move(dir)), meta_(std::move(meta)) {
    fs::create_directories(dir_ / "rgb");
    fs::create_directories(dir_ / "depth");
  }

  void add_frame(double ts, const Pose& pose, const ImageU8& rgb, const DepthMm& depth,
                 std::optional<TipAnnotation> tips = std::nullopt) {
    if (rgb.width != meta_.rgb_width || rgb.height != meta_.rgb_height) {
      throw Error(ErrorCode::InvalidArgument, "rgb frame does not match meta dimensions");
    }
    if (depth.width != meta_.depth_width || depth.height != meta_.depth_height) {
      throw Error(ErrorCode::InvalidArgument, "depth frame does not match meta dimensions");
    }
    const std::size_t i = rows_.size();
    write_png_rgb(dir_ / "rgb" / frame_file_name(i, "png"), rgb);
    write_depth_raw(dir_ / "depth" / frame_file_name(i, "raw"), depth);
    rows_.push_back({ts, pose.position, pose.orientation});
    if (tips) annotations_[i] = *tips;
  }

  void finish() { write_bundle_text(dir_, meta_, rows_, annotations_); }

  std::size_t frame_count() const { return rows_.size(); }

 private:
  fs::path dir_;
  BundleMeta meta_;
  std::vector<PoseRow> rows_;
  std::map<std::size_t, TipAnnotation> annotations_;
};

// ---------------------------------------------------------------------------
// quality control

struct QCCheck {
  std::string name;
  bool passed = false;
  bool mandatory = true;
  std::string detail;
};

struct QCReport {
  std::vector<QCCheck> checks;
  std::vector<std::size_t> offending_frames;

  bool passed() const {
    for (const auto& c : checks) {
      if (c.mandatory && !c.passed) return false;
    }
    return true;
  }

  std::vector<std::string> failed_checks() const {
    std::vector<std::string> out;
    for (const auto& c : checks) {
      if (c.mandatory && !c.passed) out.push_back(c.name);
    }
    return out;
  }
};

inline constexpr double kFpsTolerance = 0.20;
inline constexpr double kMinDemoSeconds = 2.0;

/// Content checks: landscape orientation, observed frame rate within 20% of
/// nominal, and at least two seconds of frames. Never throws on bad content.
inline QCReport validate_bundle(const RecordingBundle& b) {
  QCReport r;
  {
    const bool ok = b.meta.rgb_width > b.meta.rgb_height;
    r.checks.push_back({"orientation", ok, true,
                        std::to_string(b.meta.rgb_width) + "x" + std::to_string(b.meta.rgb_height)});
  }

  const std::size_t n = b.pose_rows.size();
  double mean_gap = 0.0;
  if (n >= 2) mean_gap = (b.pose_rows.back().ts - b.pose_rows.front().ts) / static_cast<double>(n - 1);
  {
    const double observed = mean_gap > 0.0 ? 1.0 / mean_gap : 0.0;
    const bool ok = n >= 2 && std::abs(observed - b.meta.nominal_fps) <= kFpsTolerance * b.meta.nominal_fps;
    r.checks.push_back({"fps", ok, true, "observed " + format_double(observed) + " Hz"});
    const double nominal_gap = 1.0 / b.meta.nominal_fps;
    for (std::size_t i = 1; i < n; ++i) {
      const double gap = b.pose_rows[i].ts - b.pose_rows[i - 1].ts;
      if (std::abs(gap - nominal_gap) > 0.5 * nominal_gap) r.offending_frames.push_back(i);
    }
  }
  {
    const double seconds = static_cast<double>(n) * mean_gap;
    r.checks.push_back({"length", n >= 2 && seconds >= kMinDemoSeconds, true, format_double(seconds) + " s"});
  }
  return r;
}

inline nlohmann::json qc_to_json(const QCReport& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"mandatory", c.mandatory}, {"detail", c.detail}});
  }
  return {{"verdict", r.passed() ? "pass" : "fail"}, {"checks", checks}, {"offending_frames", r.offending_frames}};
}

// ---------------------------------------------------------------------------
// decoding

struct FrameRecord {
  std::size_t index = 0;
  double timestamp = 0.0;
  ImageU8 rgb;     // kFrameSize x kFrameSize x 3
  DepthMap depth;  // kFrameSize x kFrameSize, meters, 0 = invalid
  Pose pose;
};

/// Maps a raw capture to model resolution: bilinear RGB (aspect not kept),
/// nearest-neighbor depth converted to meters.
inline FrameRecord to_frame_record(std::size_t index, double ts, const Pose& pose, const ImageU8& raw_rgb,
                                   const DepthMm& raw_depth) {
  FrameRecord f;
  f.index = index;
  f.timestamp = ts;
  f.pose = pose;
  f.rgb = resize_bilinear(raw_rgb, kFrameSize, kFrameSize);
  f.depth = resize_depth_nearest(raw_depth, kFrameSize, kFrameSize);
  return f;
}

inline FrameRecord decode_frame(const RecordingBundle& b, std::size_t index) {
  if (index >= b.frame_count) {
    throw Error(ErrorCode::IndexOutOfRange, "frame " + std::to_string(index) + " of " + std::to_string(b.frame_count));
  }
  ImageU8 rgb = read_png_rgb(b.rgb_path(index));
  if (rgb.width != b.meta.rgb_width || rgb.height != b.meta.rgb_height) {
    throw Error(ErrorCode::CorruptImage, b.rgb_path(index).string() + ": dimensions differ from meta");
  }
  const DepthMm depth = read_depth_raw(b.depth_path(index), b.meta.depth_width, b.meta.depth_height);
  const auto& row = b.pose_rows[index];
  return to_frame_record(index, row.ts, row.pose(), rgb, depth);
}

}  // namespace demoforge
