#pragma once

// Recording bundle -> training records, the ingest step between the raw
// capture format and the shard store.

#include <optional>
#include <span>
#include <vector>

#include "demoforge/aperture.hpp"
#include "demoforge/dataset.hpp"
#include "demoforge/recording.hpp"
#include "demoforge/trajectory.hpp"

namespace demoforge {

struct IngestOptions {
  double control_hz = kControlHz;
  Variant variant = Variant::Rgbd;
  const ApertureModel* aperture_model = nullptr;
  std::optional<double> max_tip_distance_px;  // overrides the bundle's meta
};

/// Apertures for the given (already decoded) frames of a bundle.
inline std::vector<double> label_apertures(const RecordingBundle& b, std::span<const FrameRecord> frames,
                                           const IngestOptions& opts) {
  ApertureQuery q;
  q.model = opts.aperture_model;
  q.max_tip_distance_px = opts.max_tip_distance_px.value_or(b.meta.gripper_max_tip_distance_px.value_or(0.0));
  std::vector<double> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    const auto it = b.annotations.find(f.index);
    q.annotation = it == b.annotations.end() ? std::nullopt : std::optional<TipAnnotation>(it->second);
    out.push_back(estimate_aperture(f.rgb, q));
  }
  return out;
}

/// Decodes the control-rate frames of a bundle and pairs each with the
/// action that leads to the next control tick.
inline ProcessedTrajectory process_bundle(const RecordingBundle& b, std::uint32_t trajectory_id,
                                          const IngestOptions& opts = {}) {
  const auto idx = subsample_indices(b.frame_count, b.meta.nominal_fps, opts.control_hz);
  std::vector<FrameRecord> frames;
  frames.reserve(idx.size());
  for (std::size_t i : idx) frames.push_back(decode_frame(b, i));
  const auto apertures = label_apertures(b, frames, opts);
  const auto actions = extract_actions(std::span<const FrameRecord>(frames), apertures, 1);

  ProcessedTrajectory t;
  t.info = {trajectory_id, b.id(),    b.meta.recorder_id, b.meta.task_label, b.meta.home_id,
            b.meta.env_id, b.frame_count, b.meta.nominal_fps, actions.size()};
  for (std::size_t k = 0; k < actions.size(); ++k) {
    TrainingRecord r;
    r.trajectory_id = trajectory_id;
    r.frame_index = static_cast<std::uint32_t>(frames[k].index);
    r.action = actions[k];
    r.rgb = std::move(frames[k].rgb);
    if (opts.variant == Variant::Rgbd) r.depth = std::move(frames[k].depth);
    t.records.push_back(std::move(r));
  }
  return t;
}

}  // namespace demoforge
