#pragma once

// Behavior-cloning policy: a frozen 512-dim RGB encoder next to 512-dim depth
// median pooling, followed by two fully connected layers to the 7-dim
// normalized action.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "demoforge/base64.hpp"
#include "demoforge/dataloader.hpp"
#include "demoforge/error.hpp"
#include "demoforge/random.hpp"
#include "demoforge/trajectory.hpp"

namespace demoforge {

inline constexpr int kEncoderDim = 512;
inline constexpr int kDepthDim = 512;
inline constexpr int kFeatureDim = kEncoderDim + kDepthDim;
inline constexpr int kDefaultHidden = 512;
inline constexpr int kProjectionSide = 32;
inline constexpr int kProjectionInput = 3 * kProjectionSide * kProjectionSide;  // 3072
inline constexpr int kDepthCellRows = 16;  // cells are 16 px tall
inline constexpr int kDepthCellCols = 32;  // and 8 px wide
inline constexpr double kFeatureStdFloor = 1e-6;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// depth pooling

/// Median of the valid (> 0) pixels in each of the 16 x 32 cells; a cell
/// without valid pixels yields 0. Output is row-major over cells.
inline Eigen::VectorXd depth_median_pool(std::span<const float> depth) {
  if (depth.size() != kObsPlane) throw Error(ErrorCode::InvalidArgument, "depth must be 256x256");
  constexpr int ch = kFrameSize / kDepthCellRows;
  constexpr int cw = kFrameSize / kDepthCellCols;
  Eigen::VectorXd out(kDepthDim);
  std::vector<float> cell;
  cell.reserve(ch * cw);
  for (int r = 0; r < kDepthCellRows; ++r) {
    for (int c = 0; c < kDepthCellCols; ++c) {
      cell.clear();
      for (int y = r * ch; y < (r + 1) * ch; ++y) {
        for (int x = c * cw; x < (c + 1) * cw; ++x) {
          const float d = depth[static_cast<std::size_t>(y) * kFrameSize + x];
          if (d > 0.0f) cell.push_back(d);
        }
      }
      double m = 0.0;
      if (!cell.empty()) {
        const std::size_t k = cell.size() / 2;
        std::nth_element(cell.begin(), cell.begin() + static_cast<std::ptrdiff_t>(k), cell.end());
        m = cell[k];
        if (cell.size() % 2 == 0) {
          const float lower = *std::max_element(cell.begin(), cell.begin() + static_cast<std::ptrdiff_t>(k));
          m = 0.5 * (static_cast<double>(lower) + m);
        }
      }
      out(r * kDepthCellCols + c) = m;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// encoders

enum class EncoderKind { RandomProjection, DownsampleFlatten, ExternalFeatures };

inline std::string to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::RandomProjection: return "random_projection";
    case EncoderKind::DownsampleFlatten: return "downsample_flatten";
    case EncoderKind::ExternalFeatures: return "external_features";
  }
  return "unknown";
}

inline EncoderKind parse_encoder_kind(std::string_view s) {
  if (s == "random_projection" || s == "random-projection") return EncoderKind::RandomProjection;
  if (s == "downsample_flatten" || s == "downsample-flatten") return EncoderKind::DownsampleFlatten;
  if (s == "external_features" || s == "external-features") return EncoderKind::ExternalFeatures;
  throw Error(ErrorCode::InvalidArgument, "unknown encoder '" + std::string(s) + "'");
}

struct EncoderSpec {
  EncoderKind kind = EncoderKind::RandomProjection;
  std::uint64_t seed = 0;
  int output_dim = kEncoderDim;

  friend bool operator==(const EncoderSpec&, const EncoderSpec&) = default;
};

/// Mean over 8x8 blocks of each RGB plane of a CHW observation, flattened
/// channel-major (3 x 32 x 32).
inline Eigen::VectorXd downsample_rgb(std::span<const float> obs) {
  constexpr int block = kFrameSize / kProjectionSide;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(kProjectionInput);
  for (int c = 0; c < 3; ++c) {
    const float* plane = obs.data() + static_cast<std::size_t>(c) * kObsPlane;
    for (int y = 0; y < kFrameSize; ++y) {
      const int row = c * kProjectionSide * kProjectionSide + (y / block) * kProjectionSide;
      for (int xpx = 0; xpx < kFrameSize; ++xpx) x(row + xpx / block) += plane[y * kFrameSize + xpx];
    }
  }
  return x / static_cast<double>(block * block);
}

/// Frozen RGB encoder built from an EncoderSpec. Construction draws the
/// projection matrix, so build once and reuse.
class Encoder {
 public:
  explicit Encoder(const EncoderSpec& spec) : spec_(spec) {
    if (spec.output_dim != kEncoderDim) throw Error(ErrorCode::InvalidArgument, "encoder output_dim must be 512");
    if (spec.kind == EncoderKind::RandomProjection) {
      Rng rng(spec.seed);
      projection_.resize(kEncoderDim, kProjectionInput);
      for (Eigen::Index i = 0; i < projection_.size(); ++i) projection_.data()[i] = rng.normal();
      projection_ /= std::sqrt(static_cast<double>(kProjectionInput));
    }
  }

  const EncoderSpec& spec() const { return spec_; }

  /// `obs` is a CHW observation whose first three planes are RGB in [0,1].
  /// `external` is consulted only by the external_features kind.
  Eigen::VectorXd encode(std::span<const float> obs, const Eigen::VectorXd* external = nullptr) const {
    switch (spec_.kind) {
      case EncoderKind::RandomProjection:
        return projection_ * downsample_rgb(obs);
      case EncoderKind::DownsampleFlatten: {
        constexpr int block = kFrameSize / 16;
        Eigen::VectorXd out = Eigen::VectorXd::Zero(kEncoderDim);
        const float* green = obs.data() + kObsPlane;
        for (int y = 0; y < kFrameSize; ++y) {
          for (int x = 0; x < kFrameSize; ++x) out((y / block) * 16 + x / block) += green[y * kFrameSize + x];
        }
        out.head(256) /= static_cast<double>(block * block);
        return out;
      }
      case EncoderKind::ExternalFeatures:
        if (!external || external->size() != kEncoderDim) {
          throw Error(ErrorCode::BadExternalFeatureDim,
                      "expected 512 external features, got " + std::to_string(external ? external->size() : 0));
        }
        return *external;
    }
    return {};
  }

 private:
  EncoderSpec spec_;
  RowMatrix projection_;
};

/// [encoder(rgb) ; median-pooled depth] for one CHW observation.
inline Eigen::VectorXd policy_features(const Encoder& enc, std::span<const float> obs,
                                       const Eigen::VectorXd* external = nullptr) {
  if (obs.size() != kObsSize) throw Error(ErrorCode::InvalidArgument, "observation must be 4x256x256");
  Eigen::VectorXd f(kFeatureDim);
  f.head(kEncoderDim) = enc.encode(obs, external);
  f.tail(kDepthDim) = depth_median_pool(obs.subspan(3 * kObsPlane, kObsPlane));
  return f;
}

// ---------------------------------------------------------------------------
// head

enum class Activation { Relu, Identity };

struct PolicyHead {
  Activation activation = Activation::Relu;
  Eigen::MatrixXd w1;  // in x hidden
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // hidden x 7
  Eigen::VectorXd b2;

  Eigen::Index in_dim() const { return w1.rows(); }
  Eigen::Index hidden() const { return w1.cols(); }
  Eigen::Index param_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

  static PolicyHead zeros(Eigen::Index in, Eigen::Index hidden, Eigen::Index out = kActionDim) {
    return {Activation::Relu, Eigen::MatrixXd::Zero(in, hidden), Eigen::VectorXd::Zero(hidden),
            Eigen::MatrixXd::Zero(hidden, out), Eigen::VectorXd::Zero(out)};
  }

  /// He-normal first layer, scaled-normal output layer, zero biases.
  static PolicyHead init(Eigen::Index in, Eigen::Index hidden, std::uint64_t seed, Eigen::Index out = kActionDim) {
    PolicyHead h = zeros(in, hidden, out);
    Rng rng(seed);
    const double s1 = std::sqrt(2.0 / static_cast<double>(in));
    const double s2 = std::sqrt(1.0 / static_cast<double>(hidden));
    for (Eigen::Index i = 0; i < h.w1.size(); ++i) h.w1.data()[i] = s1 * rng.normal();
    for (Eigen::Index i = 0; i < h.w2.size(); ++i) h.w2.data()[i] = s2 * rng.normal();
    return h;
  }

  /// Visits every parameter block in a fixed order.
  template <typename F>
  void for_each_block(F&& f) {
    f(w1.data(), w1.size());
    f(b1.data(), b1.size());
    f(w2.data(), w2.size());
    f(b2.data(), b2.size());
  }
};

/// Rows of `x` are samples.
struct HeadBatch {
  Eigen::MatrixXd x;  // B x in
  Eigen::MatrixXd t;  // B x out, normalized targets
};

struct HeadForward {
  Eigen::MatrixXd z1;  // pre-activation
  Eigen::MatrixXd h;
  Eigen::MatrixXd y;
};

inline HeadForward head_forward(const PolicyHead& head, const Eigen::MatrixXd& x) {
  HeadForward f;
  f.z1 = (x * head.w1).rowwise() + head.b1.transpose();
  f.h = head.activation == Activation::Relu ? Eigen::MatrixXd(f.z1.cwiseMax(0.0)) : f.z1;
  f.y = (f.h * head.w2).rowwise() + head.b2.transpose();
  return f;
}

/// Mean over batch and output dimensions.
inline double mse_loss(const PolicyHead& head, const HeadBatch& batch) {
  return (head_forward(head, batch.x).y - batch.t).squaredNorm() / static_cast<double>(batch.t.size());
}

struct HeadGrads {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
  double loss = 0.0;
};

inline HeadGrads head_backward(const PolicyHead& head, const HeadBatch& batch) {
  const HeadForward f = head_forward(head, batch.x);
  const Eigen::MatrixXd diff = f.y - batch.t;
  const double n = static_cast<double>(batch.t.size());
  HeadGrads g;
  g.loss = diff.squaredNorm() / n;
  const Eigen::MatrixXd dy = (2.0 / n) * diff;
  g.w2 = f.h.transpose() * dy;
  g.b2 = dy.colwise().sum().transpose();
  Eigen::MatrixXd dh = dy * head.w2.transpose();
  if (head.activation == Activation::Relu) dh = dh.cwiseProduct((f.z1.array() > 0.0).cast<double>().matrix());
  g.w1 = batch.x.transpose() * dh;
  g.b1 = dh.colwise().sum().transpose();
  return g;
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_at_kinks = 0;  // the +/- step straddles a ReLU kink
};

/// Largest relative disagreement between the analytic gradient and central
/// differences over every parameter; the denominator is
/// max(|analytic|, |numeric|, 1e-8). The loss is quadratic in any single
/// parameter between kinks, so the step only trades roundoff against kink
/// crossings. Coordinates whose two probes see different ReLU activation
/// patterns are counted instead of compared.
inline GradCheckReport grad_check_report(const PolicyHead& head_in, const HeadBatch& batch, double step = 1e-4) {
  PolicyHead head = head_in;
  const HeadGrads g = head_backward(head, batch);
  std::vector<const double*> analytic = {g.w1.data(), g.b1.data(), g.w2.data(), g.b2.data()};
  const double n = static_cast<double>(batch.t.size());
  auto probe = [&](Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& active) {
    const HeadForward f = head_forward(head, batch.x);
    active = f.z1.array() > 0.0;
    return (f.y - batch.t).squaredNorm() / n;
  };
  GradCheckReport r;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> act_up, act_down;
  std::size_t block = 0;
  head.for_each_block([&](double* p, Eigen::Index count) {
    const double* a = analytic[block++];
    for (Eigen::Index i = 0; i < count; ++i) {
      const double saved = p[i];
      p[i] = saved + step;
      const double up = probe(act_up);
      p[i] = saved - step;
      const double down = probe(act_down);
      p[i] = saved;
      if (head.activation == Activation::Relu && (act_up != act_down).any()) {
        ++r.skipped_at_kinks;
        continue;
      }
      const double numeric = (up - down) / (2.0 * step);
      const double denom = std::max({std::abs(a[i]), std::abs(numeric), 1e-8});
      r.max_rel_error = std::max(r.max_rel_error, std::abs(a[i] - numeric) / denom);
      ++r.checked;
    }
  });
  return r;
}

inline double grad_check(const PolicyHead& head, const HeadBatch& batch, double step = 1e-4) {
  return grad_check_report(head, batch, step).max_rel_error;
}

// ---------------------------------------------------------------------------
// training

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  int epochs = 50;
  double learning_rate = 3e-5;
  std::size_t batch_size = 64;
  AdamConfig adam;
  std::uint64_t seed = 0;
  int hidden = kDefaultHidden;
  double gripper_threshold = 0.5;
};

class Adam {
 public:
  Adam(const PolicyHead& shape, double lr, AdamConfig cfg) : lr_(lr), cfg_(cfg) {
    m_ = PolicyHead::zeros(shape.in_dim(), shape.hidden(), shape.b2.size());
    v_ = m_;
  }

  void step(PolicyHead& head, const HeadGrads& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto update = [&](auto& p, auto& m, auto& v, const auto& grad) {
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * grad;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
      p.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.eps);
    };
    update(head.w1, m_.w1, v_.w1, g.w1);
    update(head.b1, m_.b1, v_.b1, g.b1);
    update(head.w2, m_.w2, v_.w2, g.w2);
    update(head.b2, m_.b2, v_.b2, g.b2);
  }

 private:
  double lr_;
  AdamConfig cfg_;
  PolicyHead m_, v_;
  long t_ = 0;
};

struct PolicySnapshot {
  EncoderSpec encoder;
  PolicyHead head;
  NormStats norm_stats = NormStats::identity();
  double gripper_threshold = 0.5;
  double control_hz = kControlHz;
  TrainConfig train_config;
};

struct TrainResult {
  PolicySnapshot snapshot;
  std::vector<double> loss_curve;  // per-epoch mean loss
};

/// Per-feature standardization used while training. Folded into the first
/// layer afterwards, so the stored head consumes raw features.
struct FeatureScaling {
  Eigen::VectorXd mean;
  Eigen::VectorXd inv_std;

  static FeatureScaling fit(const Eigen::MatrixXd& feats) {
    FeatureScaling s;
    s.mean = feats.colwise().mean().transpose();
    s.inv_std.resize(feats.cols());
    for (Eigen::Index j = 0; j < feats.cols(); ++j) {
      const double sd = std::sqrt((feats.col(j).array() - s.mean(j)).square().mean());
      s.inv_std(j) = sd > kFeatureStdFloor ? 1.0 / sd : 1.0;
    }
    return s;
  }

  void apply(Eigen::MatrixXd& feats) const {
    feats = (feats.rowwise() - mean.transpose()).array().rowwise() * inv_std.transpose().array();
  }

  /// h(z) with z = (x - mean) * inv_std  ==  h'(x) with the returned weights.
  void fold_into(PolicyHead& head) const {
    head.w1 = inv_std.asDiagonal() * head.w1;
    head.b1 -= (mean.transpose() * head.w1).transpose();
  }
};

/// Supplies external 512-dim features by global record index.
using FeatureProvider = std::function<Eigen::VectorXd(std::size_t)>;

/// Encodes every record of a source into the 1024-dim head input.
template <RecordSource S>
Eigen::MatrixXd encode_source(const S& source, const Encoder& enc, const FeatureProvider& external = {}) {
  Eigen::MatrixXd feats(static_cast<Eigen::Index>(source.size()), kFeatureDim);
  std::vector<float> obs(kObsSize);
  for (std::size_t i = 0; i < source.size(); ++i) {
    fill_observation(source.view(i), obs);
    std::optional<Eigen::VectorXd> ext;
    if (external) ext = external(i);
    feats.row(static_cast<Eigen::Index>(i)) = policy_features(enc, obs, ext ? &*ext : nullptr).transpose();
  }
  return feats;
}

/// Minibatch Adam on MSE over normalized targets. The encoder is frozen, so
/// features are computed once; minibatches follow the loader's seeded
/// epoch order.
template <RecordSource S>
TrainResult train_policy(const S& source, const EncoderSpec& encoder_spec, const TrainConfig& cfg,
                         const FeatureProvider& external = {}) {
  if (source.size() == 0) throw Error(ErrorCode::EmptyDataset, "no records to train on");
  if (cfg.epochs < 1 || !(cfg.learning_rate > 0.0) || cfg.batch_size < 1 || cfg.hidden < 1) {
    throw Error(ErrorCode::InvalidArgument, "invalid training configuration");
  }
  const Encoder enc(encoder_spec);
  Eigen::MatrixXd feats = encode_source(source, enc, external);
  const auto n = static_cast<Eigen::Index>(source.size());
  const FeatureScaling scaling = FeatureScaling::fit(feats);
  scaling.apply(feats);
  Eigen::MatrixXd targets(n, kActionDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto a = normalize_action(Action7::from_vec(source.view(static_cast<std::size_t>(i)).action),
                                    source.norm_stats());
    for (int k = 0; k < kActionDim; ++k) targets(i, k) = a[k];
  }

  TrainResult r;
  r.snapshot.encoder = encoder_spec;
  r.snapshot.norm_stats = source.norm_stats();
  r.snapshot.gripper_threshold = cfg.gripper_threshold;
  r.snapshot.train_config = cfg;
  PolicyHead& head = r.snapshot.head;
  head = PolicyHead::init(kFeatureDim, cfg.hidden, cfg.seed);
  Adam opt(head, cfg.learning_rate, cfg.adam);

  HeadBatch batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(source.size(), true, cfg.seed, static_cast<std::uint64_t>(epoch));
    double total = 0.0;
    for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch_size) {
      const std::size_t hi = std::min(lo + cfg.batch_size, order.size());
      const auto bs = static_cast<Eigen::Index>(hi - lo);
      batch.x.resize(bs, kFeatureDim);
      batch.t.resize(bs, kActionDim);
      for (Eigen::Index k = 0; k < bs; ++k) {
        batch.x.row(k) = feats.row(static_cast<Eigen::Index>(order[lo + k]));
        batch.t.row(k) = targets.row(static_cast<Eigen::Index>(order[lo + k]));
      }
      const HeadGrads g = head_backward(head, batch);
      if (!std::isfinite(g.loss)) {
        throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + ", batch starting at " +
                                                  std::to_string(lo) + ": loss " + format_double(g.loss));
      }
      total += g.loss * static_cast<double>(bs);
      opt.step(head, g);
    }
    r.loss_curve.push_back(total / static_cast<double>(n));
  }
  scaling.fold_into(head);
  return r;
}

// ---------------------------------------------------------------------------
// inference

enum class GripperCommand { Open, Closed };

inline std::string to_string(GripperCommand c) { return c == GripperCommand::Open ? "open" : "closed"; }

struct Prediction {
  Action7 action;
  GripperCommand gripper = GripperCommand::Open;
  ActionVec normalized{};
};

/// Open iff the denormalized gripper value is at or above the threshold.
inline GripperCommand gripper_command(double gripper, double threshold) {
  return gripper >= threshold ? GripperCommand::Open : GripperCommand::Closed;
}

/// A snapshot bound to its materialized encoder. Inference is const and
/// thread-safe.
class Policy {
 public:
  explicit Policy(PolicySnapshot snap) : snap_(std::move(snap)), enc_(std::make_shared<Encoder>(snap_.encoder)) {}

  const PolicySnapshot& snapshot() const { return snap_; }
  const Encoder& encoder() const { return *enc_; }

  ActionVec forward(std::span<const float> obs, const Eigen::VectorXd* external = nullptr) const {
    const Eigen::VectorXd f = policy_features(*enc_, obs, external);
    return forward_features(f);
  }

  ActionVec forward_features(const Eigen::VectorXd& f) const {
    const HeadForward out = head_forward(snap_.head, f.transpose());
    ActionVec v;
    for (int k = 0; k < kActionDim; ++k) v[k] = out.y(0, k);
    return v;
  }

  Prediction predict(std::span<const float> obs, const Eigen::VectorXd* external = nullptr) const {
    return predict_from_normalized(forward(obs, external));
  }

  Prediction predict_from_normalized(const ActionVec& z) const {
    Prediction p;
    p.normalized = z;
    p.action = denormalize_action(z, snap_.norm_stats);
    p.gripper = gripper_command(p.action.gripper, snap_.gripper_threshold);
    return p;
  }

 private:
  PolicySnapshot snap_;
  std::shared_ptr<const Encoder> enc_;
};

inline ActionVec policy_forward(std::span<const float> obs, const Policy& policy) { return policy.forward(obs); }

inline Prediction predict_action(const Policy& policy, std::span<const float> obs) { return policy.predict(obs); }

// ---------------------------------------------------------------------------
// snapshot file: JSON with base64 little-endian f64 blobs, row-major

inline constexpr int kSnapshotVersion = 1;

namespace detail {

inline nlohmann::json matrix_blob(const Eigen::MatrixXd& m) {
  const RowMatrix rm = m;
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(rm.size()) * sizeof(double));
  std::memcpy(bytes.data(), rm.data(), bytes.size());
  return {{"shape", {m.rows(), m.cols()}}, {"dtype", "f64le"}, {"data", base64_encode(bytes)}};
}

inline Eigen::MatrixXd matrix_from_blob(const nlohmann::json& j) {
  const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  if (shape.size() != 2 || j.at("dtype").get<std::string>() != "f64le") {
    throw Error(ErrorCode::MalformedMeta, "snapshot: bad weight blob header");
  }
  const auto bytes = base64_decode(j.at("data").get<std::string>());
  if (bytes.size() != static_cast<std::size_t>(shape[0] * shape[1]) * sizeof(double)) {
    throw Error(ErrorCode::MalformedMeta, "snapshot: weight blob size disagrees with shape");
  }
  RowMatrix rm(shape[0], shape[1]);
  if (!bytes.empty()) std::memcpy(rm.data(), bytes.data(), bytes.size());
  return rm;
}

}  // namespace detail

inline nlohmann::json snapshot_to_json(const PolicySnapshot& s) {
  const auto& c = s.train_config;
  return {
      {"format_version", kSnapshotVersion},
      {"encoder", {{"kind", to_string(s.encoder.kind)}, {"seed", s.encoder.seed}, {"output_dim", s.encoder.output_dim}}},
      {"head",
       {{"activation", s.head.activation == Activation::Relu ? "relu" : "identity"},
        {"w1", detail::matrix_blob(s.head.w1)},
        {"b1", detail::matrix_blob(s.head.b1)},
        {"w2", detail::matrix_blob(s.head.w2)},
        {"b2", detail::matrix_blob(s.head.b2)}}},
      {"norm_stats", {{"mean", s.norm_stats.mean}, {"std", s.norm_stats.std}}},
      {"gripper_threshold", s.gripper_threshold},
      {"control_hz", s.control_hz},
      {"train_config",
       {{"epochs", c.epochs},
        {"learning_rate", c.learning_rate},
        {"batch_size", c.batch_size},
        {"hidden", c.hidden},
        {"seed", c.seed},
        {"optimizer", {{"name", "adam"}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}}}},
  };
}

inline PolicySnapshot snapshot_from_json(const nlohmann::json& j) {
  PolicySnapshot s;
  try {
    if (j.at("format_version").get<int>() != kSnapshotVersion) {
      throw Error(ErrorCode::VersionUnsupported, "snapshot format_version " + j.at("format_version").dump());
    }
    const auto& e = j.at("encoder");
    s.encoder = {parse_encoder_kind(e.at("kind").get<std::string>()), e.at("seed").get<std::uint64_t>(),
                 e.at("output_dim").get<int>()};
    const auto& h = j.at("head");
    s.head.activation = h.at("activation").get<std::string>() == "identity" ? Activation::Identity : Activation::Relu;
    s.head.w1 = detail::matrix_from_blob(h.at("w1"));
    s.head.b1 = detail::matrix_from_blob(h.at("b1"));
    s.head.w2 = detail::matrix_from_blob(h.at("w2"));
    s.head.b2 = detail::matrix_from_blob(h.at("b2"));
    if (s.head.b1.size() != s.head.w1.cols() || s.head.w2.rows() != s.head.w1.cols() ||
        s.head.b2.size() != s.head.w2.cols()) {
      throw Error(ErrorCode::MalformedMeta, "snapshot: inconsistent head shapes");
    }
    s.norm_stats.mean = j.at("norm_stats").at("mean").get<ActionVec>();
    s.norm_stats.std = j.at("norm_stats").at("std").get<ActionVec>();
    s.gripper_threshold = j.at("gripper_threshold").get<double>();
    s.control_hz = j.at("control_hz").get<double>();
    const auto& c = j.at("train_config");
    s.train_config.epochs = c.at("epochs").get<int>();
    s.train_config.learning_rate = c.at("learning_rate").get<double>();
    s.train_config.batch_size = c.at("batch_size").get<std::size_t>();
    s.train_config.hidden = c.at("hidden").get<int>();
    s.train_config.seed = c.at("seed").get<std::uint64_t>();
    const auto& o = c.at("optimizer");
    s.train_config.adam = {o.at("beta1").get<double>(), o.at("beta2").get<double>(), o.at("eps").get<double>()};
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::MalformedMeta, std::string("snapshot: ") + ex.what());
  }
  return s;
}

inline void save_snapshot(const PolicySnapshot& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  out << snapshot_to_json(s).dump(2) << "\n";
  if (!out) throw Error(ErrorCode::IoFailure, path.string());
}

inline PolicySnapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedMeta, std::string("snapshot: ") + e.what());
  }
  return snapshot_from_json(j);
}

}  // namespace demoforge
