#pragma once

// Gripper aperture: tip-distance labels from annotations, and a small dense
// regressor (32x32 grayscale -> 64 ReLU -> sigmoid) for unannotated frames.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "demoforge/error.hpp"
#include "demoforge/image.hpp"
#include "demoforge/random.hpp"
#include "demoforge/recording.hpp"

namespace demoforge {

inline constexpr int kApertureInputSide = 32;
inline constexpr int kApertureHidden = 64;
inline constexpr std::size_t kMinApertureSamples = 50;

struct ApertureModel {
  Eigen::MatrixXd w1;  // 1024 x 64
  Eigen::VectorXd b1;  // 64
  Eigen::VectorXd w2;  // 64
  double b2 = 0.0;
  double max_tip_distance_px = 1.0;
};

/// 32x32 grayscale in [0,1], row-major.
inline Eigen::VectorXd aperture_features(const ImageU8& rgb) {
  const ImageU8 square =
      (rgb.width % kApertureInputSide == 0 && rgb.height % kApertureInputSide == 0)
          ? rgb
          : resize_bilinear(rgb, kFrameSize, kFrameSize);
  const ImageU8 gray = to_grayscale(square);
  const auto v = area_downsample(gray, kApertureInputSide, kApertureInputSide, 0);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double predict_aperture(const ApertureModel& m, const Eigen::VectorXd& x) {
  const Eigen::VectorXd h = (m.w1.transpose() * x + m.b1).cwiseMax(0.0);
  return std::clamp(sigmoid(h.dot(m.w2) + m.b2), 0.0, 1.0);
}

inline double predict_aperture(const ApertureModel& m, const ImageU8& rgb) {
  return predict_aperture(m, aperture_features(rgb));
}

struct ApertureQuery {
  std::optional<TipAnnotation> annotation;
  const ApertureModel* model = nullptr;
  // Tip separation of a fully open gripper, in the annotation's pixel frame.
  double max_tip_distance_px = 0.0;
};

/// Annotation wins over the model when both are present.
inline double estimate_aperture(const ImageU8& frame_rgb, const ApertureQuery& q) {
  if (q.annotation) {
    const double max_px = q.max_tip_distance_px > 0.0 ? q.max_tip_distance_px
                          : q.model                  ? q.model->max_tip_distance_px
                                                     : 0.0;
    if (!(max_px > 0.0)) throw Error(ErrorCode::InvalidArgument, "max_tip_distance_px must be positive");
    const auto& a = *q.annotation;
    const double d = std::hypot(a.ax - a.bx, a.ay - a.by);
    const double v = d / max_px;
    return std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
  }
  if (q.model) return predict_aperture(*q.model, frame_rgb);
  throw Error(ErrorCode::NoEstimatorAvailable, "need a tip annotation or an aperture model");
}

// ---------------------------------------------------------------------------
// training

struct ApertureFitConfig {
  double val_split = 0.2;
  int epochs = 150;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  double max_tip_distance_px = 1.0;
};

struct ApertureFitResult {
  ApertureModel model;
  double val_mse = 0.0;
  std::vector<double> train_loss;
};

/// Adam on MSE after a seeded train/validation split. Deterministic for a
/// fixed seed.
inline ApertureFitResult fit_aperture_regressor(std::span<const std::pair<ImageU8, double>> labeled,
                                                const ApertureFitConfig& cfg = {}) {
  if (labeled.size() < kMinApertureSamples) {
    throw Error(ErrorCode::TooFewSamples,
                std::to_string(labeled.size()) + " labeled frames, need " + std::to_string(kMinApertureSamples));
  }
  const int d = kApertureInputSide * kApertureInputSide;
  const int n = static_cast<int>(labeled.size());

  Rng rng(cfg.seed);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);

  const int n_val = std::clamp(static_cast<int>(std::lround(cfg.val_split * n)), 1, n - 1);
  const int n_train = n - n_val;
  Eigen::MatrixXd x(d, n);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x.col(i) = aperture_features(labeled[order[i]].first);
    y(i) = std::clamp(labeled[order[i]].second, 0.0, 1.0);
  }

  ApertureModel m;
  m.max_tip_distance_px = cfg.max_tip_distance_px;
  m.w1.resize(d, kApertureHidden);
  m.b1 = Eigen::VectorXd::Zero(kApertureHidden);
  m.w2.resize(kApertureHidden);
  const double s1 = std::sqrt(2.0 / d);
  const double s2 = std::sqrt(1.0 / kApertureHidden);
  for (Eigen::Index i = 0; i < m.w1.size(); ++i) m.w1.data()[i] = s1 * rng.normal();
  for (Eigen::Index i = 0; i < m.w2.size(); ++i) m.w2(i) = s2 * rng.normal();

  // Adam state, one slot per parameter block.
  Eigen::MatrixXd mw1 = Eigen::MatrixXd::Zero(d, kApertureHidden), vw1 = mw1;
  Eigen::VectorXd mb1 = Eigen::VectorXd::Zero(kApertureHidden), vb1 = mb1;
  Eigen::VectorXd mw2 = Eigen::VectorXd::Zero(kApertureHidden), vw2 = mw2;
  double mb2 = 0.0, vb2 = 0.0;
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;

  ApertureFitResult result;
  std::vector<int> train_idx(n_train);
  for (int i = 0; i < n_train; ++i) train_idx[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = n_train - 1; i > 0; --i) std::swap(train_idx[i], train_idx[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    double epoch_loss = 0.0;
    for (int start = 0; start < n_train; start += cfg.batch_size) {
      const int bs = std::min(cfg.batch_size, n_train - start);
      Eigen::MatrixXd xb(d, bs);
      Eigen::VectorXd yb(bs);
      for (int j = 0; j < bs; ++j) {
        xb.col(j) = x.col(train_idx[start + j]);
        yb(j) = y(train_idx[start + j]);
      }
      const Eigen::MatrixXd pre = (m.w1.transpose() * xb).colwise() + m.b1;
      const Eigen::MatrixXd h = pre.cwiseMax(0.0);
      Eigen::VectorXd p = (h.transpose() * m.w2).array() + m.b2;
      p = p.unaryExpr([](double z) { return sigmoid(z); });
      const Eigen::VectorXd err = p - yb;
      epoch_loss += err.squaredNorm();

      // d(mean sq err)/dz through the sigmoid
      const Eigen::VectorXd dz = (2.0 / bs) * err.cwiseProduct(p.cwiseProduct((1.0 - p.array()).matrix()));
      const Eigen::VectorXd gw2 = h * dz;
      const double gb2 = dz.sum();
      Eigen::MatrixXd dh = m.w2 * dz.transpose();
      dh = dh.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
      const Eigen::MatrixXd gw1 = xb * dh.transpose();
      const Eigen::VectorXd gb1 = dh.rowwise().sum();

      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      auto adam = [&](auto& param, auto& mom, auto& var, const auto& g) {
        mom = beta1 * mom + (1.0 - beta1) * g;
        var = beta2 * var + (1.0 - beta2) * g.cwiseProduct(g);
        param.array() -= cfg.learning_rate * (mom.array() / c1) / ((var.array() / c2).sqrt() + eps);
      };
      adam(m.w1, mw1, vw1, gw1);
      adam(m.b1, mb1, vb1, gb1);
      adam(m.w2, mw2, vw2, gw2);
      mb2 = beta1 * mb2 + (1.0 - beta1) * gb2;
      vb2 = beta2 * vb2 + (1.0 - beta2) * gb2 * gb2;
      m.b2 -= cfg.learning_rate * (mb2 / c1) / (std::sqrt(vb2 / c2) + eps);
    }
    result.train_loss.push_back(epoch_loss / n_train);
  }

  double val = 0.0;
  for (int i = n_train; i < n; ++i) {
    const double e = predict_aperture(m, Eigen::VectorXd(x.col(i))) - y(i);
    val += e * e;
  }
  result.val_mse = val / n_val;
  result.model = std::move(m);
  return result;
}

// ---------------------------------------------------------------------------
// serialization

inline nlohmann::json aperture_model_to_json(const ApertureModel& m) {
  auto flat = [](const Eigen::MatrixXd& a) {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(a.size()));
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      for (Eigen::Index c = 0; c < a.cols(); ++c) v.push_back(a(r, c));
    }
    return v;
  };
  return {
      {"format_version", 1},
      {"input", {kApertureInputSide, kApertureInputSide}},
      {"max_tip_distance_px", m.max_tip_distance_px},
      {"layers",
       {{{"shape", {m.w1.rows(), m.w1.cols()}}, {"activation", "relu"}, {"weights", flat(m.w1)},
         {"bias", std::vector<double>(m.b1.data(), m.b1.data() + m.b1.size())}},
        {{"shape", {m.w2.size(), 1}}, {"activation", "sigmoid"}, {"weights", flat(m.w2)}, {"bias", {m.b2}}}}},
  };
}

inline ApertureModel aperture_model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != 1) throw Error(ErrorCode::VersionUnsupported, "aperture model version");
    ApertureModel m;
    m.max_tip_distance_px = j.at("max_tip_distance_px").get<double>();
    const auto& l1 = j.at("layers").at(0);
    const auto& l2 = j.at("layers").at(1);
    const auto s1 = l1.at("shape").get<std::vector<int>>();
    const auto s2 = l2.at("shape").get<std::vector<int>>();
    if (s1.size() != 2 || s2.size() != 2 || s1[0] != kApertureInputSide * kApertureInputSide ||
        s2[0] != s1[1] || s2[1] != 1) {
      throw Error(ErrorCode::MalformedMeta, "aperture model: inconsistent layer shapes");
    }
    const auto w1 = l1.at("weights").get<std::vector<double>>();
    const auto b1 = l1.at("bias").get<std::vector<double>>();
    const auto w2 = l2.at("weights").get<std::vector<double>>();
    const auto b2 = l2.at("bias").get<std::vector<double>>();
    if (w1.size() != static_cast<std::size_t>(s1[0] * s1[1]) || b1.size() != static_cast<std::size_t>(s1[1]) ||
        w2.size() != static_cast<std::size_t>(s2[0]) || b2.size() != 1) {
      throw Error(ErrorCode::MalformedMeta, "aperture model: weight counts do not match shapes");
    }
    m.w1 = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(w1.data(), s1[0], s1[1]);
    m.b1 = Eigen::Map<const Eigen::VectorXd>(b1.data(), s1[1]);
    m.w2 = Eigen::Map<const Eigen::VectorXd>(w2.data(), s2[0]);
    m.b2 = b2[0];
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedMeta, std::string("aperture model: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// synthetic tip imagery

/// Draws two filled tip markers symmetric about `center_x`, separated by
/// aperture * max_separation_px.
inline TipAnnotation draw_gripper_tips(ImageU8& img, double center_x, double row_y, double aperture,
                                       double max_separation_px, double radius_px,
                                       std::array<std::uint8_t, 3> color = {255, 255, 255}) {
  const double half = 0.5 * std::clamp(aperture, 0.0, 1.0) * max_separation_px;
  const TipAnnotation tips{center_x - half, row_y, center_x + half, row_y};
  const double r2 = radius_px * radius_px;
  for (const auto [tx, ty] : {std::pair{tips.ax, tips.ay}, std::pair{tips.bx, tips.by}}) {
    const int x0 = std::max(0, static_cast<int>(std::floor(tx - radius_px)));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(tx + radius_px)));
    const int y0 = std::max(0, static_cast<int>(std::floor(ty - radius_px)));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(ty + radius_px)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - tx, dy = y + 0.5 - ty;
        if (dx * dx + dy * dy <= r2) {
          for (int c = 0; c < img.channels; ++c) img.at(x, y, c) = color[static_cast<std::size_t>(c % 3)];
        }
      }
    }
  }
  return tips;
}

/// A 256x256 frame with two tip dots at a random separation over a noisy
/// background; the label is the separation over `max_separation_px`.
inline std::pair<ImageU8, double> synth_tip_sample(Rng& rng, double max_separation_px = 160.0) {
  ImageU8 img(kFrameSize, kFrameSize, 3);
  for (auto& px : img.data) px = static_cast<std::uint8_t>(40 + rng.below(40));
  const double aperture = rng.uniform();
  const double cx = 128.0 + rng.uniform(-6.0, 6.0);
  const double cy = 200.0 + rng.uniform(-6.0, 6.0);
  draw_gripper_tips(img, cx, cy, aperture, max_separation_px, 9.0);
  return {std::move(img), aperture};
}

}  // namespace demoforge
