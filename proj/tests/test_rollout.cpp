#include <fstream>
#include <limits>
#include <numbers>

#include <gtest/gtest.h>

#include "demoforge/pipeline.hpp"
#include "demoforge/rollout.hpp"
#include "test_util.hpp"

using namespace demoforge;
using testutil::TempDir;

namespace {

struct NanPolicy {
  PolicyOutput operator()(const std::vector<float>&, const SimState&) const {
    PolicyOutput o;
    o.action.dpos.x() = std::numeric_limits<double>::quiet_NaN();
    return o;
  }
};

}  // namespace

TEST(Replay, ExtractedActionsReproduceSubsampledPoses) {
  Rng rng(91);
  std::vector<Pose> poses{testutil::random_pose(rng)};
  for (int i = 1; i < 97; ++i) {
    const Pose step(Vec3(rng.normal(0, 0.01), rng.normal(0, 0.01), rng.normal(0, 0.01)),
                    axis_angle_to_quat({Vec3(rng.normal(0, 0.02), rng.normal(0, 0.02), rng.normal(0, 0.02))}));
    poses.push_back(compose_pose(poses.back(), step));
  }
  const ReplayCheck c = replay_check(poses, 8);
  EXPECT_EQ(c.actions, 12u);
  EXPECT_LE(c.max_position_error, 1e-9);
  EXPECT_LE(c.max_rotation_error, 1e-9);

  std::vector<double> ap(poses.size(), 1.0);
  const auto actions = extract_actions(std::span<const Pose>(poses), ap, 8);
  const auto replayed = open_loop_replay(poses.front(), actions);
  ASSERT_EQ(replayed.size(), 13u);
  EXPECT_LT((replayed.back().position - poses[96].position).norm(), 1e-9);
}

TEST(Replay, RotationDistance) {
  const Quat a = axis_angle_to_quat({Vec3(0, 0, 0.3)});
  const Quat b = axis_angle_to_quat({Vec3(0, 0, -0.2)});
  EXPECT_NEAR(rotation_distance(a, b), 0.5, 1e-12);
  EXPECT_NEAR(rotation_distance(a, a), 0.0, 1e-12);
}

TEST(Grid, DemoGridShapeAndSpacing) {
  const BeaconReach env;
  const auto g = make_start_grid(kDemoGridRows, kDemoGridCols, 0.02, 0.02, env.base_pose());
  ASSERT_EQ(g.size(), 24u);
  EXPECT_NEAR(g[1].position.x() - g[0].position.x(), 0.02, 1e-12);
  EXPECT_NEAR(g[6].position.y() - g[0].position.y(), 0.02, 1e-12);
  Vec3 mean = Vec3::Zero();
  for (const auto& p : g) mean += p.position / 24.0;
  EXPECT_LT((mean - env.base_pose().position).norm(), 1e-12);
  EXPECT_THROW(make_start_grid(0, 3, 0.02, 0.02, env.base_pose()), Error);
}

TEST(Grid, EvalStartsDifferFromDemoStarts) {
  const BeaconReach env;
  const auto demo = make_start_grid(4, 6, 0.02, 0.02, env.base_pose());
  const auto eval = eval10_starts(env.base_pose());
  ASSERT_EQ(eval.size(), 10u);
  for (const auto& e : eval) {
    for (const auto& d : demo) EXPECT_GT((e.position - d.position).norm(), 0.005);
  }
}

TEST(Scene, Geometry) {
  const BeaconReach env;
  const Pose base = env.base_pose();
  EXPECT_NEAR(env.distance(base), env.approach_distance, 1e-12);
  EXPECT_LT((env.tool_offset_in_camera(base) - Vec3(0, 0, 0.10)).norm(), 1e-12);
  const Pose turned(base.position, axis_angle_to_quat({Vec3(0, 0, std::numbers::pi / 2)}));
  const Pose moved(turned.position + Vec3(0.03, 0, 0), turned.orientation);
  // +x in the world is -y in a camera yawed by 90 degrees
  EXPECT_LT((env.tool_offset_in_camera(moved) - Vec3(0, 0.03, 0.10)).norm(), 1e-12);
}

TEST(Scene, RenderShowsBeaconAndTips) {
  const BeaconReach env;
  const RawFrame f = render_raw(env, env.base_pose(), 1.0);
  EXPECT_EQ(f.rgb.at(640, 360, 0), env.disk_color[0]);
  EXPECT_EQ(f.rgb.at(640, 360, 2), env.disk_color[2]);
  EXPECT_EQ(f.rgb.at(10, 10, 0), 0);
  EXPECT_EQ(f.depth.at(128, 96), 220);  // 0.22 m to the beacon
  EXPECT_EQ(f.depth.at(5, 5), 0);
  EXPECT_DOUBLE_EQ(f.tips.bx - f.tips.ax, env.tip_max_separation_px);
  const FrameRecord fr = render_frame(env, env.base_pose(), 0.0);
  EXPECT_EQ(fr.rgb.width, 256);
  const auto obs = observation_from_frame(fr);
  EXPECT_EQ(obs.size(), kObsSize);
  EXPECT_FLOAT_EQ(obs[3 * kObsPlane + 128 * 256 + 128], 0.22f);
}

TEST(Episode, OracleSucceedsEverywhere) {
  BeaconReach env;
  OraclePolicy oracle{&env, 0.25};
  const auto starts = eval10_starts(env.base_pose());
  const SuccessTable t = evaluate_policy(env, oracle, starts, 30);
  EXPECT_EQ(t.successes, 10u);
  for (const auto& e : t.episodes) {
    EXPECT_LE(e.final_distance, env.success_radius);
    EXPECT_EQ(e.trajectory.size(), e.steps_used + 1);
  }
  env.require_grasp = true;
  OraclePolicy grasping{&env, 0.25};
  EXPECT_EQ(evaluate_policy(env, grasping, starts, 30).successes, 10u);
}

TEST(Episode, ZeroPolicyTimesOut) {
  const BeaconReach env;
  ZeroPolicy zero;
  const auto starts = eval10_starts(env.base_pose());
  const SuccessTable t = evaluate_policy(env, zero, starts, 5);
  EXPECT_EQ(t.successes, 0u);
  EXPECT_EQ(t.total, 10u);
  for (const auto& e : t.episodes) EXPECT_EQ(e.steps_used, 5u);
  const auto j = success_table_to_json(t);
  EXPECT_EQ(j.at("successes"), 0);
  EXPECT_EQ(j.at("episodes").size(), 10u);
}

TEST(Episode, NonFiniteActionEndsEpisode) {
  const BeaconReach env;
  NanPolicy nan;
  const EpisodeResult r = run_episode(env, nan, env.base_pose(), 10);
  EXPECT_FALSE(r.success);
  EXPECT_EQ(r.steps_used, 0u);
  EXPECT_NE(r.diagnostic.find("NonFiniteAction"), std::string::npos);
}

TEST(Episode, CsvHasOneRowPerPose) {
  TempDir tmp;
  const BeaconReach env;
  OraclePolicy oracle{&env, 0.25};
  const EpisodeResult r = run_episode(env, oracle, env.base_pose(), 30);
  write_episode_csv(r, tmp / "e.csv");
  std::ifstream in(tmp / "e.csv");
  std::string line;
  std::size_t rows = 0;
  std::getline(in, line);
  EXPECT_EQ(line, "step,px,py,pz,qw,qx,qy,qz,gripper");
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, r.trajectory.size());
}

TEST(Demos, PlanShape) {
  const BeaconReach env;
  Rng rng(0);
  const DemoPlan p = plan_demo(env, env.base_pose(), DemoGenConfig{}, rng);
  ASSERT_EQ(p.poses.size(), 113u);
  EXPECT_DOUBLE_EQ(p.ts[30], 1.0);
  EXPECT_EQ(p.apertures.front(), 1.0);
  EXPECT_EQ(p.apertures.back(), 0.0);
  EXPECT_LE(env.distance(p.poses.back()), env.success_radius);
  const auto closing = std::find_if(p.apertures.begin(), p.apertures.end(), [](double a) { return a < 1.0; });
  ASSERT_NE(closing, p.apertures.end());
  const auto k = static_cast<std::size_t>(closing - p.apertures.begin()) - 1;
  EXPECT_LE(env.distance(p.poses[k]), env.success_radius);
  EXPECT_EQ(p.apertures[k + 8], 0.0);
}

TEST(Demos, NoiseIsSeeded) {
  const BeaconReach env;
  DemoGenConfig cfg;
  cfg.noise_sigma = 0.002;
  Rng a(5), b(5), c(6);
  const auto pa = plan_demo(env, env.base_pose(), cfg, a);
  const auto pb = plan_demo(env, env.base_pose(), cfg, b);
  const auto pc = plan_demo(env, env.base_pose(), cfg, c);
  EXPECT_EQ(pa.poses.back().position, pb.poses.back().position);
  EXPECT_NE(pa.poses.back().position, pc.poses.back().position);
}

TEST(Demos, FilesIngestToInMemoryRecords) {
  TempDir tmp;
  const BeaconReach env;
  const auto starts = make_start_grid(1, 2, 0.02, 0.02, env.base_pose());
  DemoGenConfig cfg;
  cfg.noise_sigma = 0.001;
  cfg.seed = 3;
  const auto dirs = gen_synthetic_demos(env, starts, cfg, tmp.path());
  ASSERT_EQ(dirs.size(), 2u);
  const auto mem = synthesize_trajectories(env, starts, cfg);
  for (std::size_t d = 0; d < 2; ++d) {
    const auto b = parse_bundle(dirs[d]);
    EXPECT_TRUE(validate_bundle(b).passed());
    EXPECT_EQ(b.frame_count, 113u);
    const auto t = process_bundle(b, static_cast<std::uint32_t>(d));
    ASSERT_EQ(t.records.size(), mem[d].records.size());
    for (std::size_t k = 0; k < t.records.size(); ++k) {
      const auto& x = t.records[k];
      const auto& y = mem[d].records[k];
      EXPECT_EQ(x.frame_index, y.frame_index);
      EXPECT_EQ(x.rgb, y.rgb);
      EXPECT_EQ(*x.depth, *y.depth);
      for (int i = 0; i < kActionDim; ++i) EXPECT_NEAR(x.action.to_vec()[i], y.action.to_vec()[i], 1e-12);
    }
  }
}
