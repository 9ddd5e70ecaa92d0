#include <gtest/gtest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "test_util.hpp"

using demoforge::cli::run_cli;
using testutil::TempDir;

namespace {

struct Run {
  int rc;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int rc = run_cli(args, out, err);
  return {rc, out.str(), err.str()};
}

nlohmann::json run_json(std::vector<std::string> args) {
  args.insert(args.begin(), {"--json", "--no-timestamps"});
  const auto r = run(args);
  EXPECT_EQ(r.rc, 0) << r.err;
  return nlohmann::json::parse(r.out);
}

}  // namespace

TEST(Cli, HelpForEverySubcommand) {
  for (const char* sub : {"ingest", "validate", "stats", "export", "train", "replay", "rollout", "demo-gen"}) {
    const auto r = run({sub, "--help"});
    EXPECT_EQ(r.rc, 0) << sub;
    EXPECT_FALSE(r.out.empty()) << sub;
  }
  EXPECT_EQ(run({"--help"}).rc, 0);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).rc, 1);
  EXPECT_EQ(run({"frobnicate"}).rc, 1);
  EXPECT_EQ(run({"train"}).rc, 1);
  EXPECT_EQ(run({"--json", "--quiet", "stats", "x"}).rc, 1);
  EXPECT_EQ(run({"demo-gen", "--grid", "4by6", "--out", "x"}).rc, 1);
}

TEST(Cli, DataErrors) {
  TempDir tmp;
  const auto missing = run({"stats", (tmp.path() / "nope").string()});
  EXPECT_EQ(missing.rc, 2) << missing.err;
  EXPECT_NE(missing.err.find("error"), std::string::npos);

  const auto bundle = tmp.path() / "short";
  testutil::write_small_bundle(bundle, 30);
  const auto v = run({"validate", bundle.string()});
  EXPECT_EQ(v.rc, 2);
  EXPECT_NE(v.out.find("fail"), std::string::npos);

  const auto good = tmp.path() / "good";
  testutil::write_small_bundle(good, 120);
  EXPECT_EQ(run({"validate", good.string()}).rc, 0);
}

TEST(Cli, NonFiniteLossIsARuntimeError) {
  TempDir tmp;
  demoforge::write_shards(testutil::random_trajectories(2, 3, false, 9), tmp.path(), demoforge::Variant::RgbOnly);
  const auto r = run({"train", tmp.path().string(), "--epochs", "3", "--lr", "1e300", "--out",
                      (tmp.path() / "p.json").string()});
  EXPECT_EQ(r.rc, 3) << r.err;
}

TEST(Cli, Pipeline) {
  TempDir tmp;
  const auto demos = tmp.path() / "demos";
  const auto g = run_json({"--seed", "3", "demo-gen", "--grid", "1x2", "--out", demos.string()});
  ASSERT_EQ(g["bundles"].size(), 2u);

  const std::string first = g["bundles"][0];
  const auto v = run_json({"validate", first});
  EXPECT_EQ(v["command"], "validate");
  EXPECT_FALSE(v.contains("generated_at"));

  const auto ds = tmp.path() / "ds";
  const auto in = run_json({"ingest", g["bundles"][0], g["bundles"][1], "--out", ds.string()});
  EXPECT_EQ(in["trajectories"], 2);
  EXPECT_EQ(in["variant"], "rgbd");
  const int records = in["records"];
  EXPECT_GT(records, 0);

  const auto st = run_json({"stats", ds.string()});
  EXPECT_EQ(st["command"], "stats");

  const auto ex = run_json({"export", ds.string(), "--variant", "rgb-only", "--out", (tmp.path() / "rgb").string()});
  EXPECT_EQ(ex["records"], records);
  EXPECT_EQ(ex["variant"], "rgb_only");

  const auto snap = tmp.path() / "policy.json";
  const auto tr = run_json({"train", ds.string(), "--epochs", "2", "--out", snap.string()});
  EXPECT_EQ(tr["loss_curve"].size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(snap));

  const auto ro = run_json({"rollout", snap.string(), "--grid", "1x2", "--max-steps", "3", "--trajectory-csv",
                            (tmp.path() / "csv").string()});
  EXPECT_EQ(ro["success_table"]["total"], 2);
  EXPECT_TRUE(std::filesystem::exists(tmp.path() / "csv" / "episode_001.csv"));

  EXPECT_EQ(run({"rollout", snap.string(), "--starts", "eval10", "--grid", "2x5"}).rc, 1);

  const auto rp = run_json({"replay", first, "--snapshot-free"});
  EXPECT_LE(rp["max_position_error"].get<double>(), 1e-9);
  EXPECT_LE(rp["max_rotation_error"].get<double>(), 1e-9);

  const auto human = run({"--quiet", "stats", ds.string()});
  EXPECT_EQ(human.rc, 0);
  EXPECT_NE(human.out.find("total"), std::string::npos);
}
