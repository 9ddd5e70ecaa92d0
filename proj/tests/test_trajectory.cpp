#include <numbers>

#include <gtest/gtest.h>

#include "demoforge/trajectory.hpp"
#include "test_util.hpp"

using namespace demoforge;

namespace {

Eigen::Matrix4d homogeneous(const Pose& p) {
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  t.topLeftCorner<3, 3>() =
      Eigen::Quaterniond(p.orientation.w, p.orientation.x, p.orientation.y, p.orientation.z).toRotationMatrix();
  t.topRightCorner<3, 1>() = p.position;
  return t;
}

Eigen::MatrixXd as_matrix(std::span<const Action7> actions) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(actions.size()), kActionDim);
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const auto v = actions[i].to_vec();
    for (int k = 0; k < kActionDim; ++k) m(static_cast<Eigen::Index>(i), k) = v[k];
  }
  return m;
}

std::vector<Action7> random_actions(Rng& rng, std::size_t n) {
  std::vector<Action7> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({Vec3(rng.normal(0.01, 0.02), rng.normal(-0.3, 0.001), rng.normal(2.0, 5.0)),
                   {Vec3(rng.normal(0, 0.1), rng.normal(0.2, 0.05), rng.normal(0, 1e-3))},
                   rng.uniform()});
  }
  return out;
}

}  // namespace

TEST(Stride, ThirtyToControlRateIsEight) {
  EXPECT_EQ(control_stride(30.0, 3.75), 8u);
  EXPECT_EQ(control_stride(30.0, 30.0), 1u);
  EXPECT_EQ(control_stride(60.0, 3.75), 16u);
}

TEST(Stride, NonIntegerRatioIsRejected) {
  EXPECT_THROW(control_stride(30.0, 4.0), Error);
  try {
    control_stride(30.0, 7.0);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonIntegerStride);
  }
  EXPECT_THROW(control_stride(30.0, 60.0), Error);
}

TEST(Stride, SubsampleIndices) {
  EXPECT_EQ(subsample_indices(17, 30.0, 3.75), (std::vector<std::size_t>{0, 8, 16}));
  EXPECT_EQ(subsample_indices(16, 30.0, 3.75), (std::vector<std::size_t>{0, 8}));
  EXPECT_EQ(subsample_indices(1, 30.0, 3.75), (std::vector<std::size_t>{0}));
}

TEST(Actions, MatchHomogeneousOracle) {
  Rng rng(41);
  std::vector<Pose> poses;
  std::vector<double> aperture;
  for (int i = 0; i < 41; ++i) {
    poses.push_back(testutil::random_pose(rng));
    aperture.push_back(rng.uniform(-0.2, 1.2));
  }
  const auto actions = extract_actions(std::span<const Pose>(poses), aperture, 8);
  ASSERT_EQ(actions.size(), 5u);
  for (std::size_t k = 0; k < actions.size(); ++k) {
    const Eigen::Matrix4d d = homogeneous(poses[8 * k]).inverse() * homogeneous(poses[8 * k + 8]);
    EXPECT_LT((actions[k].dpos - d.topRightCorner<3, 1>()).norm(), 1e-12);
    const Eigen::AngleAxisd aa(Eigen::Matrix3d(d.topLeftCorner<3, 3>()));
    if (aa.angle() < 3.1) EXPECT_LT((actions[k].drot.rotvec - aa.angle() * aa.axis()).norm(), 1e-9);
    EXPECT_EQ(actions[k].gripper, std::clamp(aperture[8 * k + 8], 0.0, 1.0));
  }
}

TEST(Actions, TooShortYieldsNone) {
  std::vector<Pose> poses(8);
  std::vector<double> ap(8, 1.0);
  EXPECT_TRUE(extract_actions(std::span<const Pose>(poses), ap, 8).empty());
  poses.resize(9);
  ap.resize(9, 1.0);
  EXPECT_EQ(extract_actions(std::span<const Pose>(poses), ap, 8).size(), 1u);
}

TEST(Actions, LengthMismatch) {
  std::vector<Pose> poses(10);
  std::vector<double> ap(9, 1.0);
  try {
    extract_actions(std::span<const Pose>(poses), ap, 8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
  }
}

TEST(Actions, VectorLayout) {
  const Action7 a{Vec3(1, 2, 3), {Vec3(4, 5, 6)}, 0.5};
  EXPECT_EQ(a.to_vec(), (ActionVec{1, 2, 3, 4, 5, 6, 0.5}));
  EXPECT_EQ(Action7::from_vec(a.to_vec()).to_vec(), a.to_vec());
  Action7 bad = a;
  bad.dpos.y() = std::nan("");
  EXPECT_FALSE(bad.finite());
  EXPECT_TRUE(a.finite());
}

TEST(Norm, StatsMatchPopulationOracle) {
  Rng rng(42);
  const auto actions = random_actions(rng, 257);
  const NormStats s = compute_norm_stats(actions);
  const Eigen::MatrixXd m = as_matrix(actions);
  const Eigen::RowVectorXd mean = m.colwise().mean();
  const Eigen::RowVectorXd sd = ((m.rowwise() - mean).array().square().colwise().sum() / m.rows()).sqrt();
  for (int k = 0; k < kActionDim; ++k) {
    EXPECT_NEAR(s.mean[k], mean(k), 1e-12);
    EXPECT_NEAR(s.std[k], sd(k), 1e-12);
  }
}

TEST(Norm, NormalizedSetIsStandard) {
  Rng rng(43);
  const auto actions = random_actions(rng, 500);
  const NormStats s = compute_norm_stats(actions);
  const auto z = normalize_actions(actions, s);
  for (int k = 0; k < kActionDim; ++k) {
    double m = 0, v = 0;
    for (const auto& r : z) m += r[k];
    m /= z.size();
    for (const auto& r : z) v += (r[k] - m) * (r[k] - m);
    EXPECT_LE(std::abs(m), 1e-10);
    EXPECT_LE(std::abs(std::sqrt(v / z.size()) - 1.0), 1e-9);
  }
  const auto back = denormalize_actions(z, s);
  for (std::size_t i = 0; i < actions.size(); ++i) {
    for (int k = 0; k < kActionDim; ++k) EXPECT_NEAR(back[i].to_vec()[k], actions[i].to_vec()[k], 1e-12);
  }
}

TEST(Norm, ConstantAxisIsFloored) {
  std::vector<Action7> a(4, Action7{Vec3(0.1, 0, 0), {}, 1.0});
  a[1].dpos.x() = 0.3;
  const NormStats s = compute_norm_stats(a);
  EXPECT_EQ(s.std[1], kStdFloor);
  EXPECT_EQ(s.std[6], kStdFloor);
  EXPECT_GT(s.std[0], kStdFloor);
  const auto z = normalize_action(a[0], s);
  EXPECT_EQ(z[1], 0.0);
}

TEST(Norm, TooFewActions) {
  std::vector<Action7> one(1);
  try {
    compute_norm_stats(one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewActions);
  }
}

TEST(Norm, DenormalizeClampsGripper) {
  const NormStats s = NormStats::identity();
  ActionVec z{};
  z[6] = 3.0;
  EXPECT_EQ(denormalize_action(z, s).gripper, 1.0);
  z[6] = -3.0;
  EXPECT_EQ(denormalize_action(z, s).gripper, 0.0);
}

TEST(Stride, TwentyFiveFramesGiveThreePairs) {
  const auto idx = subsample_indices(25, 30.0, 3.75);
  EXPECT_EQ(idx, (std::vector<std::size_t>{0, 8, 16, 24}));
  std::vector<Pose> poses(25);
  std::vector<double> ap(25, 1.0);
  EXPECT_EQ(extract_actions(std::span<const Pose>(poses), ap, 8).size(), 3u);
}

TEST(Actions, StaticTrajectory) {
  const Pose p(Vec3(0.2, -0.1, 0.4), axis_angle_to_quat({Vec3(0.1, 0.2, 0.3)}));
  std::vector<Pose> poses(33, p);
  std::vector<double> ap(33, 1.0);
  for (const auto& a : extract_actions(std::span<const Pose>(poses), ap, 8)) {
    for (int k = 0; k < 6; ++k) EXPECT_NEAR(a.to_vec()[k], 0.0, 1e-15);
    EXPECT_EQ(a.gripper, 1.0);
  }
  std::vector<Pose> upright(17, Pose(Vec3(0.2, -0.1, 0.4), Quat::identity()));
  std::vector<double> ap17(17, 1.0);
  for (const auto& a : extract_actions(std::span<const Pose>(upright), ap17, 8)) {
    EXPECT_EQ(a.to_vec(), (ActionVec{0, 0, 0, 0, 0, 0, 1.0}));
  }
}

TEST(Actions, ConstantVelocityAlongZ) {
  std::vector<Pose> poses;
  for (int i = 0; i < 33; ++i) poses.push_back({Vec3(0, 0, 0.03 * i), Quat::identity()});
  std::vector<double> ap(33, 1.0);
  for (const auto& a : extract_actions(std::span<const Pose>(poses), ap, 8)) {
    EXPECT_LT((a.dpos - Vec3(0, 0, 0.24)).norm(), 1e-12);
    EXPECT_LT(a.drot.rotvec.norm(), 1e-12);
  }
}

TEST(Actions, SteadyYawRate) {
  const double deg = std::numbers::pi / 180.0;
  std::vector<Pose> poses;
  for (int i = 0; i < 33; ++i) {
    const Eigen::Quaterniond q(Eigen::AngleAxisd(i * deg, Eigen::Vector3d::UnitZ()));
    poses.push_back({Vec3(0.1, 0, 0), Quat{q.w(), q.x(), q.y(), q.z()}});
  }
  std::vector<double> ap(33, 0.0);
  for (const auto& a : extract_actions(std::span<const Pose>(poses), ap, 8)) {
    EXPECT_LT((a.drot.rotvec - Vec3(0, 0, 8 * deg)).norm(), 1e-12);
    EXPECT_LT(a.dpos.norm(), 1e-12);
  }
}

TEST(Norm, TwoSampleHandExample) {
  std::vector<Action7> a(2);
  a[0].dpos.x() = 1.0;
  a[1].dpos.x() = 3.0;
  const NormStats s = compute_norm_stats(a);
  EXPECT_DOUBLE_EQ(s.mean[0], 2.0);
  EXPECT_DOUBLE_EQ(s.std[0], 1.0);
  EXPECT_DOUBLE_EQ(normalize_action(a[0], s)[0], -1.0);
  EXPECT_DOUBLE_EQ(normalize_action(a[1], s)[0], 1.0);
  Action7 at_mean;
  at_mean.dpos.x() = 2.0;
  for (double z : normalize_action(at_mean, s)) EXPECT_EQ(z, 0.0);
}
