#pragma once

// Raw 30 Hz trajectories -> control-rate (observation, 7-dim action) pairs.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "demoforge/error.hpp"
#include "demoforge/recording.hpp"
#include "demoforge/se3.hpp"

namespace demoforge {

inline constexpr int kActionDim = 7;
inline constexpr double kRecordHz = 30.0;
inline constexpr double kControlHz = 3.75;
inline constexpr double kStdFloor = 1e-6;

using ActionVec = std::array<double, kActionDim>;

/// Relative motion between two control ticks, expressed in the camera frame
/// of the earlier tick, plus the gripper aperture to reach.
struct Action7 {
  Vec3 dpos = Vec3::Zero();
  AxisAngle drot;
  double gripper = 0.0;

  ActionVec to_vec() const {
    return {dpos.x(), dpos.y(), dpos.z(), drot.rotvec.x(), drot.rotvec.y(), drot.rotvec.z(), gripper};
  }
  static Action7 from_vec(const ActionVec& v) {
    return {{v[0], v[1], v[2]}, {{v[3], v[4], v[5]}}, v[6]};
  }
  Pose as_pose() const { return pose_from(dpos, drot); }

  bool finite() const {
    const auto v = to_vec();
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  }
};

/// Frame stride between control ticks; the rates must divide exactly.
inline std::size_t control_stride(double record_hz, double control_hz) {
  if (!(record_hz > 0.0) || !(control_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "rates must be positive");
  const double ratio = record_hz / control_hz;
  const double stride = std::round(ratio);
  if (stride < 1.0 || std::abs(ratio - stride) > 1e-9) {
    throw Error(ErrorCode::NonIntegerStride, format_double(record_hz) + " Hz / " + format_double(control_hz) + " Hz");
  }
  return static_cast<std::size_t>(stride);
}

inline std::vector<std::size_t> subsample_indices(std::size_t n_frames, double record_hz, double control_hz) {
  if (n_frames < 1) throw Error(ErrorCode::InvalidArgument, "n_frames must be >= 1");
  const std::size_t stride = control_stride(record_hz, control_hz);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n_frames; i += stride) out.push_back(i);
  return out;
}

/// One action per consecutive pair of subsampled frames (t, t + stride). The
/// gripper label is the aperture at the later frame.
inline std::vector<Action7> extract_actions(std::span<const Pose> poses, std::span<const double> apertures,
                                            std::size_t stride) {
  if (poses.size() != apertures.size()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(poses.size()) + " poses vs " + std::to_string(apertures.size()) + " apertures");
  }
  if (stride < 1) throw Error(ErrorCode::InvalidArgument, "stride must be >= 1");
  std::vector<Action7> out;
  for (std::size_t t = 0; t + stride < poses.size(); t += stride) {
    const Pose d = relative_pose(poses[t], poses[t + stride]);
    out.push_back({d.position, quat_to_axis_angle(d.orientation), std::clamp(apertures[t + stride], 0.0, 1.0)});
  }
  return out;
}

inline std::vector<Action7> extract_actions(std::span<const FrameRecord> frames, std::span<const double> apertures,
                                            std::size_t stride) {
  std::vector<Pose> poses;
  poses.reserve(frames.size());
  for (const auto& f : frames) poses.push_back(f.pose);
  return extract_actions(std::span<const Pose>(poses), apertures, stride);
}

// ---------------------------------------------------------------------------
// normalization

struct NormStats {
  ActionVec mean{};
  ActionVec std{};

  static NormStats identity() {
    NormStats s;
    s.std.fill(1.0);
    return s;
  }
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Per-axis population mean and std, gripper included; std floored at 1e-6.
inline NormStats compute_norm_stats(std::span<const Action7> actions) {
  if (actions.size() < 2) throw Error(ErrorCode::TooFewActions, std::to_string(actions.size()) + " actions, need 2");
  NormStats s;
  const double n = static_cast<double>(actions.size());
  for (const auto& a : actions) {
    const auto v = a.to_vec();
    for (int i = 0; i < kActionDim; ++i) s.mean[i] += v[i];
  }
  for (auto& m : s.mean) m /= n;
  for (const auto& a : actions) {
    const auto v = a.to_vec();
    for (int i = 0; i < kActionDim; ++i) s.std[i] += (v[i] - s.mean[i]) * (v[i] - s.mean[i]);
  }
  for (auto& sd : s.std) sd = std::max(std::sqrt(sd / n), kStdFloor);
  return s;
}

inline ActionVec normalize_action(const Action7& a, const NormStats& s) {
  auto v = a.to_vec();
  for (int i = 0; i < kActionDim; ++i) v[i] = (v[i] - s.mean[i]) / s.std[i];
  return v;
}

inline Action7 denormalize_action(const ActionVec& z, const NormStats& s) {
  ActionVec v;
  for (int i = 0; i < kActionDim; ++i) v[i] = z[i] * s.std[i] + s.mean[i];
  v[6] = std::clamp(v[6], 0.0, 1.0);
  return Action7::from_vec(v);
}

inline std::vector<ActionVec> normalize_actions(std::span<const Action7> actions, const NormStats& s) {
  std::vector<ActionVec> out;
  out.reserve(actions.size());
  for (const auto& a : actions) out.push_back(normalize_action(a, s));
  return out;
}

inline std::vector<Action7> denormalize_actions(std::span<const ActionVec> vecs, const NormStats& s) {
  std::vector<Action7> out;
  out.reserve(vecs.size());
  for (const auto& v : vecs) out.push_back(denormalize_action(v, s));
  return out;
}

}  // namespace demoforge
