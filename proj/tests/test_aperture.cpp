#include <gtest/gtest.h>

#include "demoforge/aperture.hpp"
#include "demoforge/random.hpp"

using namespace demoforge;

namespace {

ApertureModel tiny_model(double b2) {
  ApertureModel m;
  m.w1 = Eigen::MatrixXd::Zero(kApertureInputSide * kApertureInputSide, kApertureHidden);
  m.b1 = Eigen::VectorXd::Zero(kApertureHidden);
  m.w2 = Eigen::VectorXd::Zero(kApertureHidden);
  m.b2 = b2;
  m.max_tip_distance_px = 100.0;
  return m;
}

std::vector<std::pair<ImageU8, double>> samples(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<ImageU8, double>> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(synth_tip_sample(rng));
  return out;
}

}  // namespace

TEST(Aperture, AnnotationDistanceOverMax) {
  const ImageU8 img(8, 8, 3);
  ApertureQuery q;
  q.max_tip_distance_px = 100.0;
  q.annotation = TipAnnotation{10, 10, 10, 10};
  EXPECT_EQ(estimate_aperture(img, q), 0.0);
  q.annotation = TipAnnotation{0, 0, 60, 80};
  EXPECT_DOUBLE_EQ(estimate_aperture(img, q), 1.0);
  q.annotation = TipAnnotation{0, 0, 30, 40};
  EXPECT_DOUBLE_EQ(estimate_aperture(img, q), std::hypot(30.0, 40.0) / 100.0);
  q.annotation = TipAnnotation{0, 0, 300, 0};
  EXPECT_EQ(estimate_aperture(img, q), 1.0);
}

TEST(Aperture, AnnotationWinsOverModel) {
  const ImageU8 img(256, 256, 3);
  const ApertureModel m = tiny_model(0.0);  // predicts sigmoid(0) = 0.5
  ApertureQuery q;
  q.model = &m;
  EXPECT_DOUBLE_EQ(estimate_aperture(img, q), 0.5);
  q.annotation = TipAnnotation{0, 0, 20, 0};
  EXPECT_DOUBLE_EQ(estimate_aperture(img, q), 0.2);  // model's max_tip_distance_px
}

TEST(Aperture, NoEstimator) {
  try {
    estimate_aperture(ImageU8(4, 4, 3), ApertureQuery{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoEstimatorAvailable);
  }
}

TEST(Aperture, TooFewSamples) {
  const auto s = samples(49, 1);
  try {
    fit_aperture_regressor(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewSamples);
  }
}

TEST(Aperture, ConstantLabelsFitConstant) {
  auto s = samples(60, 2);
  for (auto& [img, y] : s) y = 0.5;
  ApertureFitConfig cfg;
  cfg.epochs = 60;
  const auto r = fit_aperture_regressor(s, cfg);
  EXPECT_LT(r.val_mse, 1e-4);
}

TEST(Aperture, DeterministicUnderSeed) {
  const auto s = samples(80, 3);
  ApertureFitConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 9;
  const auto a = fit_aperture_regressor(s, cfg);
  const auto b = fit_aperture_regressor(s, cfg);
  EXPECT_EQ(a.val_mse, b.val_mse);
  EXPECT_TRUE(a.model.w1 == b.model.w1);
  EXPECT_TRUE(a.model.w2 == b.model.w2);
}

TEST(Aperture, LearnsTipSeparation) {
  const auto s = samples(300, 4);
  ApertureFitConfig cfg;
  cfg.epochs = 80;
  const auto r = fit_aperture_regressor(s, cfg);
  EXPECT_LT(r.val_mse, 0.035);
  EXPECT_LT(r.train_loss.back(), r.train_loss.front());
}

TEST(Aperture, JsonRoundTrip) {
  const auto s = samples(60, 5);
  ApertureFitConfig cfg;
  cfg.epochs = 2;
  cfg.max_tip_distance_px = 160.0;
  const auto r = fit_aperture_regressor(s, cfg);
  const auto j = aperture_model_to_json(r.model);
  const ApertureModel back = aperture_model_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_TRUE(back.w1 == r.model.w1);
  EXPECT_TRUE(back.b1 == r.model.b1);
  EXPECT_TRUE(back.w2 == r.model.w2);
  EXPECT_EQ(back.b2, r.model.b2);
  EXPECT_EQ(back.max_tip_distance_px, 160.0);
  EXPECT_EQ(predict_aperture(back, s[0].first), predict_aperture(r.model, s[0].first));

  auto bad = j;
  bad["format_version"] = 2;
  EXPECT_THROW(aperture_model_from_json(bad), Error);
  bad = j;
  bad["layers"][0]["weights"].erase(0);
  EXPECT_THROW(aperture_model_from_json(bad), Error);
}

TEST(Aperture, DrawnTipsMatchAnnotation) {
  ImageU8 img(100, 50, 3);
  const TipAnnotation t = draw_gripper_tips(img, 50, 25, 0.5, 40, 3);
  EXPECT_DOUBLE_EQ(t.ax, 40.0);
  EXPECT_DOUBLE_EQ(t.bx, 60.0);
  EXPECT_EQ(img.at(40, 25, 0), 255);
  EXPECT_EQ(img.at(50, 25, 0), 0);
}
