#pragma once

// Kinematic evaluation: open-loop replay of action sequences, synchronous
// closed-loop episodes in the BeaconReach scene, and synthetic demonstration
// recording.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "demoforge/aperture.hpp"
#include "demoforge/dataloader.hpp"
#include "demoforge/dataset.hpp"
#include "demoforge/policy.hpp"
#include "demoforge/random.hpp"
#include "demoforge/recording.hpp"
#include "demoforge/se3.hpp"
#include "demoforge/trajectory.hpp"

namespace demoforge {

// ---------------------------------------------------------------------------
// open-loop replay

inline std::vector<Pose> open_loop_replay(const Pose& start, std::span<const Action7> actions) {
  std::vector<Pose> poses;
  poses.reserve(actions.size() + 1);
  poses.push_back(start);
  for (const auto& a : actions) poses.push_back(compose_pose(poses.back(), a.as_pose()));
  return poses;
}

/// Rotation angle between two orientations, radians.
inline double rotation_distance(const Quat& a, const Quat& b) {
  return quat_to_axis_angle(a.conjugate() * b).angle();
}

struct ReplayCheck {
  std::size_t actions = 0;
  double max_position_error = 0.0;
  double max_rotation_error = 0.0;
};

/// Extracts control-rate actions from recorded odometry, replays them from
/// the first subsampled pose, and compares with the recorded subsampled poses.
inline ReplayCheck replay_check(std::span<const Pose> recorded, std::size_t stride) {
  std::vector<double> apertures(recorded.size(), 0.0);
  const auto actions = extract_actions(recorded, apertures, stride);
  ReplayCheck out;
  out.actions = actions.size();
  if (recorded.empty()) return out;
  const auto replayed = open_loop_replay(recorded.front(), actions);
  for (std::size_t k = 0; k < replayed.size(); ++k) {
    const Pose& ref = recorded[k * stride];
    out.max_position_error = std::max(out.max_position_error, (replayed[k].position - ref.position).norm());
    out.max_rotation_error =
        std::max(out.max_rotation_error, rotation_distance(replayed[k].orientation, ref.orientation));
  }
  return out;
}

// ---------------------------------------------------------------------------
// BeaconReach scene

/// A bright beacon floating in front of the camera. The gripper tool point
/// sits `grasp_offset` meters along the camera's optical axis; the task is to
/// bring it within `success_radius` of the beacon.
struct BeaconReach {
  Vec3 target{0.0, 0.0, 0.5};
  double success_radius = 0.015;
  bool require_grasp = false;
  double grasp_offset = 0.12;
  double approach_distance = 0.10;

  // native capture
  int rgb_width = 1280;
  int rgb_height = 720;
  int depth_width = 256;
  int depth_height = 192;
  double fx = 900.0, fy = 900.0, cx = 640.0, cy = 360.0;

  // rendering
  double disk_radius_px = 60.0;
  std::array<std::uint8_t, 3> disk_color{255, 210, 40};
  std::array<std::uint8_t, 3> background{0, 0, 0};
  double tip_row = 640.0;
  double tip_max_separation_px = 400.0;
  double tip_radius_px = 22.0;

  /// Start pose centered behind the beacon, looking along +z.
  Pose base_pose() const {
    return {target - Vec3(0.0, 0.0, grasp_offset + approach_distance), Quat::identity()};
  }

  Vec3 tool_point(const Pose& ee) const { return ee.position + rotate(ee.orientation, Vec3(0, 0, grasp_offset)); }

  double distance(const Pose& ee) const { return (tool_point(ee) - target).norm(); }

  /// Offset from the tool point to the beacon, in the camera frame.
  Vec3 tool_offset_in_camera(const Pose& ee) const {
    return rotate(ee.orientation.conjugate(), target - ee.position) - Vec3(0, 0, grasp_offset);
  }

  BundleMeta meta() const {
    BundleMeta m;
    m.rgb_width = rgb_width;
    m.rgb_height = rgb_height;
    m.depth_width = depth_width;
    m.depth_height = depth_height;
    m.nominal_fps = kRecordHz;
    m.fx = fx;
    m.fy = fy;
    m.cx = cx;
    m.cy = cy;
    m.recorder_id = "synthetic";
    m.task_label = "beacon_reach";
    m.home_id = "desk";
    m.env_id = "beacon";
    m.gripper_max_tip_distance_px = tip_max_separation_px;
    return m;
  }
};

struct RawFrame {
  ImageU8 rgb;
  DepthMm depth;
  TipAnnotation tips;
};

/// Renders the scene at native resolution from camera pose `ee` with the
/// gripper opened to `aperture`.
inline RawFrame render_raw(const BeaconReach& env, const Pose& ee, double aperture) {
  RawFrame f;
  f.rgb = ImageU8(env.rgb_width, env.rgb_height, 3);
  for (std::size_t p = 0; p < f.rgb.data.size(); p += 3) {
    f.rgb.data[p] = env.background[0];
    f.rgb.data[p + 1] = env.background[1];
    f.rgb.data[p + 2] = env.background[2];
  }
  f.depth = DepthMm(env.depth_width, env.depth_height);

  const Vec3 t = rotate(ee.orientation.conjugate(), env.target - ee.position);
  if (t.z() > 1e-3) {
    const double u = env.fx * t.x() / t.z() + env.cx;
    const double v = env.fy * t.y() / t.z() + env.cy;
    auto fill_disk = [](int w, int h, double cu, double cv, double rx, double ry, auto&& paint) {
      const int x0 = std::max(0, static_cast<int>(std::floor(cu - rx)));
      const int x1 = std::min(w - 1, static_cast<int>(std::ceil(cu + rx)));
      const int y0 = std::max(0, static_cast<int>(std::floor(cv - ry)));
      const int y1 = std::min(h - 1, static_cast<int>(std::ceil(cv + ry)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double dx = (x + 0.5 - cu) / rx, dy = (y + 0.5 - cv) / ry;
          if (dx * dx + dy * dy <= 1.0) paint(x, y);
        }
      }
    };
    fill_disk(env.rgb_width, env.rgb_height, u, v, env.disk_radius_px, env.disk_radius_px, [&](int x, int y) {
      for (int c = 0; c < 3; ++c) f.rgb.at(x, y, c) = env.disk_color[static_cast<std::size_t>(c)];
    });
    const double sx = static_cast<double>(env.depth_width) / env.rgb_width;
    const double sy = static_cast<double>(env.depth_height) / env.rgb_height;
    const auto range_mm = static_cast<std::uint16_t>(std::clamp(std::lround(t.norm() * 1000.0), 1L, 65535L));
    fill_disk(env.depth_width, env.depth_height, u * sx, v * sy, env.disk_radius_px * sx, env.disk_radius_px * sy,
              [&](int x, int y) { f.depth.at(x, y) = range_mm; });
  }
  f.tips = draw_gripper_tips(f.rgb, env.cx, env.tip_row, aperture, env.tip_max_separation_px, env.tip_radius_px);
  return f;
}

inline FrameRecord render_frame(const BeaconReach& env, const Pose& ee, double aperture, std::size_t index = 0,
                                double ts = 0.0) {
  const RawFrame raw = render_raw(env, ee, aperture);
  return to_frame_record(index, ts, ee, raw.rgb, raw.depth);
}

inline std::vector<float> observation_from_frame(const FrameRecord& f) {
  RecordView v;
  v.rgb = f.rgb.data;
  v.depth = f.depth.data;
  std::vector<float> obs(kObsSize);
  fill_observation(v, obs);
  return obs;
}

// ---------------------------------------------------------------------------
// start grids

/// rows x cols poses offset from `base` in its camera (x, y) plane, centered
/// on the base; orientation unchanged. Row-major order.
inline std::vector<Pose> make_start_grid(int rows, int cols, double dx, double dy, const Pose& base) {
  if (rows < 1 || cols < 1) throw Error(ErrorCode::InvalidArgument, "grid needs at least one row and column");
  std::vector<Pose> out;
  out.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const Vec3 local((c - 0.5 * (cols - 1)) * dx, (r - 0.5 * (rows - 1)) * dy, 0.0);
      out.push_back({base.position + rotate(base.orientation, local), base.orientation});
    }
  }
  return out;
}

inline constexpr double kDefaultGridSpacing = 0.02;
inline constexpr int kDemoGridRows = 4;
inline constexpr int kDemoGridCols = 6;

/// The ten evaluation starts: a 2 x 5 grid at collection spacing.
inline std::vector<Pose> eval10_starts(const Pose& base, double spacing = kDefaultGridSpacing) {
  return make_start_grid(2, 5, spacing, spacing, base);
}

// ---------------------------------------------------------------------------
// episodes

struct SimState {
  Pose ee_pose;
  GripperCommand gripper = GripperCommand::Open;
  std::size_t step = 0;
};

struct PolicyOutput {
  Action7 action;
  GripperCommand gripper = GripperCommand::Open;
};

/// Anything that maps the rendered observation (and, for scripted
/// controllers, the true state) to one action.
template <typename P>
concept EpisodePolicy = requires(P& p, const std::vector<float>& obs, const SimState& s) {
  { p(obs, s) } -> std::convertible_to<PolicyOutput>;
};

/// Learned policy: sees only the observation.
struct SnapshotPolicy {
  const Policy* policy;
  PolicyOutput operator()(const std::vector<float>& obs, const SimState&) const {
    const Prediction p = policy->predict(obs);
    return {p.action, p.gripper};
  }
};

/// Proportional oracle with privileged state: covers `gain` of the remaining
/// tool offset each tick and closes once within the success radius.
struct OraclePolicy {
  const BeaconReach* env;
  double gain = 0.25;
  PolicyOutput operator()(const std::vector<float>&, const SimState& s) const {
    PolicyOutput out;
    out.action.dpos = gain * env->tool_offset_in_camera(s.ee_pose);
    const bool close = env->distance(s.ee_pose) <= env->success_radius;
    out.action.gripper = close ? 0.0 : 1.0;
    out.gripper = close ? GripperCommand::Closed : GripperCommand::Open;
    return out;
  }
};

struct ZeroPolicy {
  PolicyOutput operator()(const std::vector<float>&, const SimState& s) const {
    return {Action7{Vec3::Zero(), {}, s.gripper == GripperCommand::Open ? 1.0 : 0.0}, s.gripper};
  }
};

struct EpisodeResult {
  bool success = false;
  std::size_t steps_used = 0;
  double final_distance = 0.0;
  std::vector<Pose> trajectory;
  std::vector<GripperCommand> gripper;
  std::string diagnostic;
};

inline bool episode_success(const BeaconReach& env, const SimState& s) {
  return env.distance(s.ee_pose) <= env.success_radius &&
         (!env.require_grasp || s.gripper == GripperCommand::Closed);
}

/// Synchronous loop: render, predict, apply exactly one action, repeat.
/// Terminates on success or after max_steps actions.
template <EpisodePolicy P>
EpisodeResult run_episode(const BeaconReach& env, P& policy, const Pose& start, std::size_t max_steps) {
  EpisodeResult r;
  SimState s{start, GripperCommand::Open, 0};
  r.trajectory.push_back(s.ee_pose);
  r.gripper.push_back(s.gripper);
  while (true) {
    if (episode_success(env, s)) {
      r.success = true;
      break;
    }
    if (s.step >= max_steps) break;
    const FrameRecord frame =
        render_frame(env, s.ee_pose, s.gripper == GripperCommand::Open ? 1.0 : 0.0, s.step);
    const PolicyOutput out = policy(observation_from_frame(frame), s);
    if (!out.action.finite()) {
      r.diagnostic = std::string(to_string(ErrorCode::NonFiniteAction)) + " at step " + std::to_string(s.step);
      break;
    }
    s.ee_pose = compose_pose(s.ee_pose, out.action.as_pose());
    s.gripper = out.gripper;
    ++s.step;
    r.trajectory.push_back(s.ee_pose);
    r.gripper.push_back(s.gripper);
  }
  r.steps_used = s.step;
  r.final_distance = env.distance(s.ee_pose);
  return r;
}

struct SuccessTable {
  std::size_t successes = 0;
  std::size_t total = 0;
  std::vector<EpisodeResult> episodes;
};

/// One episode per start; the scene is reset between episodes.
template <EpisodePolicy P>
SuccessTable evaluate_policy(const BeaconReach& env, P& policy, std::span<const Pose> starts, std::size_t max_steps) {
  if (starts.empty()) throw Error(ErrorCode::InvalidArgument, "need at least one start pose");
  SuccessTable t;
  for (const auto& start : starts) {
    t.episodes.push_back(run_episode(env, policy, start, max_steps));
    t.successes += t.episodes.back().success ? 1 : 0;
  }
  t.total = starts.size();
  return t;
}

inline nlohmann::json pose_to_json(const Pose& p) {
  return {{"position", {p.position.x(), p.position.y(), p.position.z()}},
          {"orientation", {p.orientation.w, p.orientation.x, p.orientation.y, p.orientation.z}}};
}

inline nlohmann::json episode_to_json(const EpisodeResult& e, bool with_trajectory = false) {
  nlohmann::json j = {{"success", e.success},
                      {"steps_used", e.steps_used},
                      {"final_distance", e.final_distance},
                      {"diagnostic", e.diagnostic}};
  if (with_trajectory) {
    nlohmann::json traj = nlohmann::json::array();
    for (const auto& p : e.trajectory) traj.push_back(pose_to_json(p));
    j["trajectory"] = traj;
  }
  return j;
}

inline nlohmann::json success_table_to_json(const SuccessTable& t, bool with_trajectories = false) {
  nlohmann::json eps = nlohmann::json::array();
  for (const auto& e : t.episodes) eps.push_back(episode_to_json(e, with_trajectories));
  return {{"successes", t.successes}, {"total", t.total}, {"episodes", eps}};
}

/// `step,px,py,pz,qw,qx,qy,qz,gripper` with gripper 1 = open, 0 = closed.
inline void write_episode_csv(const EpisodeResult& e, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  out << "step,px,py,pz,qw,qx,qy,qz,gripper\n";
  for (std::size_t k = 0; k < e.trajectory.size(); ++k) {
    const auto& p = e.trajectory[k];
    out << k << ',' << format_double(p.position.x()) << ',' << format_double(p.position.y()) << ','
        << format_double(p.position.z()) << ',' << format_double(p.orientation.w) << ','
        << format_double(p.orientation.x) << ',' << format_double(p.orientation.y) << ','
        << format_double(p.orientation.z) << ',' << (e.gripper[k] == GripperCommand::Open ? 1 : 0) << '\n';
  }
  if (!out) throw Error(ErrorCode::IoFailure, path.string());
}

// ---------------------------------------------------------------------------
// synthetic demonstrations

struct DemoGenConfig {
  double record_hz = kRecordHz;
  double control_hz = kControlHz;
  int ticks = 14;  // 113 frames, ~3.7 s
  double gain = 0.25;
  double noise_sigma = 0.0;  // meters, per axis per tick
  std::uint64_t seed = 0;
};

struct DemoPlan {
  std::vector<double> ts;
  std::vector<Pose> poses;
  std::vector<double> apertures;
};

/// Proportional approach at the control rate, linearly interpolated between
/// ticks at the recording rate. The gripper closes over one tick once the
/// tool point is inside the success radius.
inline DemoPlan plan_demo(const BeaconReach& env, const Pose& start, const DemoGenConfig& cfg, Rng& rng) {
  const std::size_t stride = control_stride(cfg.record_hz, cfg.control_hz);
  DemoPlan plan;
  Pose tick_pose = start;
  plan.poses.push_back(start);
  for (int k = 0; k < cfg.ticks; ++k) {
    Vec3 cmd = cfg.gain * env.tool_offset_in_camera(tick_pose);
    if (cfg.noise_sigma > 0.0) {
      cmd += Vec3(rng.normal(0.0, cfg.noise_sigma), rng.normal(0.0, cfg.noise_sigma), rng.normal(0.0, cfg.noise_sigma));
    }
    for (std::size_t j = 1; j <= stride; ++j) {
      const double frac = static_cast<double>(j) / static_cast<double>(stride);
      plan.poses.push_back(compose_pose(tick_pose, Pose(frac * cmd, Quat::identity())));
    }
    tick_pose = plan.poses.back();
  }
  std::optional<std::size_t> close_start;
  for (std::size_t i = 0; i < plan.poses.size(); ++i) {
    plan.ts.push_back(static_cast<double>(i) / cfg.record_hz);
    if (!close_start && env.distance(plan.poses[i]) <= env.success_radius) close_start = i;
    double a = 1.0;
    if (close_start) a = std::max(0.0, 1.0 - static_cast<double>(i - *close_start) / static_cast<double>(stride));
    plan.apertures.push_back(a);
  }
  return plan;
}

/// Writes one recording bundle per start under `out_dir/demo_%03d`, with
/// rendered frames and per-frame gripper-tip annotations.
inline std::vector<std::filesystem::path> gen_synthetic_demos(const BeaconReach& env, std::span<const Pose> starts,
                                                              const DemoGenConfig& cfg,
                                                              const std::filesystem::path& out_dir) {
  Rng rng(cfg.seed);
  std::vector<std::filesystem::path> out;
  for (std::size_t d = 0; d < starts.size(); ++d) {
    char name[32];
    std::snprintf(name, sizeof(name), "demo_%03zu", d);
    const auto dir = out_dir / name;
    std::filesystem::remove_all(dir);
    const DemoPlan plan = plan_demo(env, starts[d], cfg, rng);
    BundleMeta meta = env.meta();
    meta.nominal_fps = cfg.record_hz;
    BundleWriter w(dir, meta);
    for (std::size_t i = 0; i < plan.poses.size(); ++i) {
      const RawFrame raw = render_raw(env, plan.poses[i], plan.apertures[i]);
      w.add_frame(plan.ts[i], plan.poses[i], raw.rgb, raw.depth, raw.tips);
    }
    w.finish();
    out.push_back(dir);
  }
  return out;
}

/// The same demonstrations taken straight to training records, rendering
/// only the control-rate frames. Matches ingesting gen_synthetic_demos output
/// up to the decimal round trip of the annotations.
inline std::vector<ProcessedTrajectory> synthesize_trajectories(const BeaconReach& env, std::span<const Pose> starts,
                                                                const DemoGenConfig& cfg,
                                                                Variant variant = Variant::Rgbd) {
  Rng rng(cfg.seed);
  const std::size_t stride = control_stride(cfg.record_hz, cfg.control_hz);
  std::vector<ProcessedTrajectory> out;
  for (std::size_t d = 0; d < starts.size(); ++d) {
    const DemoPlan plan = plan_demo(env, starts[d], cfg, rng);
    std::vector<Pose> poses;
    std::vector<double> apertures;
    for (std::size_t i = 0; i < plan.poses.size(); i += stride) {
      poses.push_back(plan.poses[i]);
      apertures.push_back(plan.apertures[i]);
    }
    const auto actions = extract_actions(std::span<const Pose>(poses), apertures, 1);
    ProcessedTrajectory t;
    t.info = {static_cast<std::uint32_t>(d), "synthetic", "synthetic", "beacon_reach", "desk", "beacon",
              plan.poses.size(), cfg.record_hz, actions.size()};
    for (std::size_t k = 0; k < actions.size(); ++k) {
      const std::size_t frame = k * stride;
      FrameRecord f = render_frame(env, plan.poses[frame], plan.apertures[frame], frame, plan.ts[frame]);
      TrainingRecord r;
      r.trajectory_id = static_cast<std::uint32_t>(d);
      r.frame_index = static_cast<std::uint32_t>(frame);
      r.action = actions[k];
      r.rgb = std::move(f.rgb);
      if (variant == Variant::Rgbd) r.depth = std::move(f.depth);
      t.records.push_back(std::move(r));
    }
    out.push_back(std::move(t));
  }
  return out;
}

inline MemoryDataset to_memory_dataset(std::vector<ProcessedTrajectory> trajectories) {
  std::vector<TrainingRecord> records;
  for (auto& t : trajectories) {
    for (auto& r : t.records) records.push_back(std::move(r));
  }
  return MemoryDataset(std::move(records));
}

}  // namespace demoforge
