#pragma once

// `demoforge` command line: the whole pipeline as subcommands.
//
// Exit codes: 0 success, 1 usage error, 2 data error (parse, QC, checksum),
// 3 runtime error (non-finite loss, I/O).

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "demoforge/dataloader.hpp"
#include "demoforge/dataset.hpp"
#include "demoforge/pipeline.hpp"
#include "demoforge/policy.hpp"
#include "demoforge/recording.hpp"
#include "demoforge/rollout.hpp"

namespace demoforge::cli {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

struct Globals {
  std::uint64_t seed = 0;
  bool json = false;
  bool quiet = false;
  bool no_timestamps = false;
};

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline std::pair<int, int> parse_grid(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw Error(ErrorCode::InvalidArgument, "grid must look like RxC, got '" + s + "'");
  const auto r = parse_int(std::string_view(s).substr(0, x));
  const auto c = parse_int(std::string_view(s).substr(x + 1));
  if (!r || !c || *r < 1 || *c < 1) throw Error(ErrorCode::InvalidArgument, "bad grid '" + s + "'");
  return {static_cast<int>(*r), static_cast<int>(*c)};
}

inline int exit_code_for(const Error& e) {
  if (e.code() == ErrorCode::InvalidArgument) return kUsage;
  return is_data_error(e.code()) ? kData : kRuntime;
}

/// Runs one invocation. `args` excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Demonstration data engine and behavior-cloning toolkit", "demoforge"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  auto* json_flag = app.add_flag("--json", g.json, "Emit a single JSON document on stdout");
  app.add_flag("--quiet", g.quiet, "Suppress progress messages on stderr")->excludes(json_flag);
  app.add_flag("--no-timestamps", g.no_timestamps, "Omit generated_at from JSON output");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse, QC, and shard recording bundles");
  std::vector<std::string> ingest_bundles;
  std::string ingest_out, ingest_variant = "rgbd", aperture_model_path;
  std::size_t shard_size = kDefaultShardSize;
  std::vector<std::string> excluded;
  std::optional<double> max_tip;
  double control_hz = kControlHz;
  ingest->add_option("bundles", ingest_bundles, "Bundle directories")->required()->check(CLI::ExistingDirectory);
  ingest->add_option("--out", ingest_out, "Output dataset directory")->required();
  ingest->add_option("--variant", ingest_variant, "rgbd or rgb-only")
      ->check(CLI::IsMember({"rgbd", "rgb-only", "rgb_only"}))
      ->capture_default_str();
  ingest->add_option("--shard-size", shard_size, "Records per shard")->capture_default_str();
  ingest->add_option("--exclude", excluded, "Bundle ids rejected by manual review");
  ingest->add_option("--aperture-model", aperture_model_path, "Aperture regressor JSON for unannotated frames");
  ingest->add_option("--max-tip-distance", max_tip, "Open-gripper tip separation in pixels");
  ingest->add_option("--control-hz", control_hz, "Action rate")->capture_default_str();

  // validate
  auto* validate = app.add_subcommand("validate", "Quality-control one bundle");
  std::string validate_dir;
  validate->add_option("bundle", validate_dir, "Bundle directory")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "Per-home and per-task dataset totals");
  std::string stats_dir;
  stats->add_option("dataset", stats_dir, "Dataset directory or manifest")->required();

  // export
  auto* exp = app.add_subcommand("export", "Rewrite a dataset as another variant");
  std::string export_dir, export_out, export_variant_name = "rgb-only";
  exp->add_option("dataset", export_dir, "Dataset directory or manifest")->required();
  exp->add_option("--variant", export_variant_name, "rgb-only or rgbd")
      ->check(CLI::IsMember({"rgbd", "rgb-only", "rgb_only"}))
      ->capture_default_str();
  exp->add_option("--out", export_out, "Output dataset directory")->required();
  exp->add_option("--shard-size", shard_size, "Records per shard")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Behavior-cloning training (defaults: 50 epochs, lr 3e-5)");
  std::string train_dir, train_out, encoder = "random-projection";
  TrainConfig tc;
  train->add_option("dataset", train_dir, "Dataset directory or manifest")->required();
  train->add_option("--encoder", encoder, "random-projection or downsample-flatten")
      ->check(CLI::IsMember({"random-projection", "random_projection", "downsample-flatten", "downsample_flatten"}))
      ->capture_default_str();
  train->add_option("--epochs", tc.epochs, "Epochs")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--lr", tc.learning_rate, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--batch-size", tc.batch_size, "Minibatch size")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--hidden", tc.hidden, "Hidden width")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--threshold", tc.gripper_threshold, "Gripper open threshold")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  train->add_option("--out", train_out, "Snapshot path")->required();

  // replay
  auto* replay = app.add_subcommand("replay", "Open-loop odometry replay check for one bundle");
  std::string replay_dir;
  bool snapshot_free = false;
  replay->add_option("bundle", replay_dir, "Bundle directory")->required();
  replay->add_flag("--snapshot-free", snapshot_free, "Replay extracted actions without a policy (default)");
  replay->add_option("--control-hz", control_hz, "Action rate")->capture_default_str();

  // rollout
  auto* rollout = app.add_subcommand("rollout", "Closed-loop evaluation in a synthetic scene");
  std::string snapshot_path, env_name = "beacon", starts_name = "eval10", grid_spec, csv_dir;
  std::size_t max_steps = 30;
  double spacing = kDefaultGridSpacing;
  bool require_grasp = false;
  rollout->add_option("snapshot", snapshot_path, "Policy snapshot")->required()->check(CLI::ExistingFile);
  rollout->add_option("--env", env_name, "Scene")->check(CLI::IsMember({"beacon"}))->capture_default_str();
  auto* starts_opt = rollout->add_option("--starts", starts_name, "Start preset")->check(CLI::IsMember({"eval10"}));
  rollout->add_option("--grid", grid_spec, "Start grid RxC instead of a preset")->excludes(starts_opt);
  rollout->add_option("--spacing", spacing, "Start grid spacing in meters")->capture_default_str();
  rollout->add_option("--max-steps", max_steps, "Actions per episode")->capture_default_str();
  rollout->add_flag("--require-grasp", require_grasp, "Success also requires a closed gripper");
  rollout->add_option("--trajectory-csv", csv_dir, "Directory for per-episode trajectory CSVs");

  // demo-gen
  auto* demogen = app.add_subcommand("demo-gen", "Record synthetic demonstrations as bundles");
  std::string demo_env = "beacon", demo_grid = "4x6", demo_out;
  DemoGenConfig dg;
  demogen->add_option("--env", demo_env, "Scene")->check(CLI::IsMember({"beacon"}))->capture_default_str();
  demogen->add_option("--grid", demo_grid, "Start grid RxC")->capture_default_str();
  demogen->add_option("--spacing", spacing, "Start grid spacing in meters")->capture_default_str();
  demogen->add_option("--noise", dg.noise_sigma, "Per-axis action noise sigma, meters")->capture_default_str();
  demogen->add_option("--ticks", dg.ticks, "Control ticks per demo")->capture_default_str();
  demogen->add_option("--out", demo_out, "Output directory")->required();

  std::vector<const char*> argv{"demoforge"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  auto log = [&](const std::string& msg) {
    if (!g.quiet) err << msg << "\n";
  };
  auto emit = [&](nlohmann::json doc, const std::string& human) {
    if (g.json) {
      if (!g.no_timestamps) doc["generated_at"] = utc_now();
      out << doc.dump(2) << "\n";
    } else {
      out << human << "\n";
    }
  };

  try {
    if (*ingest) {
      std::optional<ApertureModel> model;
      if (!aperture_model_path.empty()) {
        std::ifstream in(aperture_model_path);
        if (!in) throw Error(ErrorCode::MissingFile, aperture_model_path);
        model = aperture_model_from_json(nlohmann::json::parse(in));
      }
      std::vector<RecordingBundle> bundles;
      for (const auto& dir : ingest_bundles) bundles.push_back(parse_bundle(dir));
      const auto filtered = qc_filter(bundles, {excluded});
      nlohmann::json rejected = nlohmann::json::array();
      for (const auto& r : filtered.rejected) {
        rejected.push_back({{"id", r.bundle.id()}, {"reasons", r.reasons}});
        log("rejected " + r.bundle.id());
      }
      if (filtered.kept.empty()) throw Error(ErrorCode::EmptyInput, "every bundle was rejected");

      IngestOptions opts;
      opts.control_hz = control_hz;
      opts.variant = parse_variant(ingest_variant);
      opts.aperture_model = model ? &*model : nullptr;
      opts.max_tip_distance_px = max_tip;
      ShardWriter writer(ingest_out, opts.variant, shard_size);
      for (std::size_t i = 0; i < filtered.kept.size(); ++i) {
        writer.add_trajectory(process_bundle(filtered.kept[i], static_cast<std::uint32_t>(i), opts));
        log("ingested " + filtered.kept[i].id());
      }
      const auto m = writer.finish();
      emit({{"command", "ingest"},
            {"dataset", ingest_out},
            {"variant", to_string(m.variant)},
            {"trajectories", m.total_trajectories},
            {"records", m.total_records},
            {"shards", m.shards.size()},
            {"rejected", rejected}},
           "ingested " + std::to_string(m.total_trajectories) + " trajectories, " + std::to_string(m.total_records) +
               " records into " + ingest_out);
      return kOk;
    }

    if (*validate) {
      const auto b = parse_bundle(validate_dir);
      const auto report = validate_bundle(b);
      auto doc = qc_to_json(report);
      doc["command"] = "validate";
      doc["bundle"] = b.id();
      doc["frames"] = b.frame_count;
      std::string human = b.id() + ": " + (report.passed() ? "pass" : "fail");
      for (const auto& c : report.checks) human += "\n  " + c.name + (c.passed ? " ok " : " FAIL ") + c.detail;
      emit(doc, human);
      return report.passed() ? kOk : kData;
    }

    if (*stats) {
      const auto h = open_dataset(stats_dir);
      h.verify_all();
      const auto table = stats_report(h);
      auto doc = stats_to_json(table);
      doc["command"] = "stats";
      std::ostringstream human;
      human << std::left << std::setw(6) << "group" << std::setw(24) << "key" << std::right << std::setw(8) << "demos"
            << std::setw(10) << "frames" << std::setw(10) << "minutes" << "\n";
      auto row = [&](const StatsRow& r) {
        human << std::left << std::setw(6) << r.group << std::setw(24) << r.key << std::right << std::setw(8)
              << r.demos << std::setw(10) << r.frames << std::setw(10) << std::fixed << std::setprecision(3)
              << r.minutes << "\n";
      };
      for (const auto& r : table.rows) row(r);
      row(table.total);
      emit(doc, human.str());
      return kOk;
    }

    if (*exp) {
      const auto h = open_dataset(export_dir);
      const auto m = export_variant(h, export_out, parse_variant(export_variant_name), shard_size);
      emit({{"command", "export"}, {"dataset", export_out}, {"variant", to_string(m.variant)},
            {"records", m.total_records}, {"shards", m.shards.size()}},
           "exported " + std::to_string(m.total_records) + " records as " + to_string(m.variant));
      return kOk;
    }

    if (*train) {
      const auto h = open_dataset(train_dir);
      tc.seed = g.seed;
      const EncoderSpec spec{parse_encoder_kind(encoder), g.seed, kEncoderDim};
      log("training on " + std::to_string(h.size()) + " records");
      const auto r = train_policy(h, spec, tc);
      save_snapshot(r.snapshot, train_out);
      emit({{"command", "train"},
            {"snapshot", train_out},
            {"records", h.size()},
            {"epochs", tc.epochs},
            {"learning_rate", tc.learning_rate},
            {"loss_curve", r.loss_curve},
            {"final_loss", r.loss_curve.back()}},
           "trained " + std::to_string(tc.epochs) + " epochs, final loss " + format_double(r.loss_curve.back()) +
               " -> " + train_out);
      return kOk;
    }

    if (*replay) {
      const auto b = parse_bundle(replay_dir);
      std::vector<Pose> poses;
      for (const auto& row : b.pose_rows) poses.push_back(row.pose());
      const auto check = replay_check(poses, control_stride(b.meta.nominal_fps, control_hz));
      emit({{"command", "replay"},
            {"bundle", b.id()},
            {"actions", check.actions},
            {"max_position_error", check.max_position_error},
            {"max_rotation_error", check.max_rotation_error}},
           b.id() + ": " + std::to_string(check.actions) + " actions, max position error " +
               format_double(check.max_position_error) + " m, max rotation error " +
               format_double(check.max_rotation_error) + " rad");
      return kOk;
    }

    if (*rollout) {
      const Policy policy(load_snapshot(snapshot_path));
      BeaconReach env;
      env.require_grasp = require_grasp;
      std::vector<Pose> starts;
      if (!grid_spec.empty()) {
        const auto [rows, cols] = parse_grid(grid_spec);
        starts = make_start_grid(rows, cols, spacing, spacing, env.base_pose());
      } else {
        starts = eval10_starts(env.base_pose(), spacing);
      }
      SnapshotPolicy sp{&policy};
      const auto table = evaluate_policy(env, sp, starts, max_steps);
      if (!csv_dir.empty()) {
        std::filesystem::create_directories(csv_dir);
        for (std::size_t i = 0; i < table.episodes.size(); ++i) {
          char name[32];
          std::snprintf(name, sizeof(name), "episode_%03zu.csv", i);
          write_episode_csv(table.episodes[i], std::filesystem::path(csv_dir) / name);
        }
      }
      nlohmann::json doc = {{"command", "rollout"}, {"env", env_name}, {"success_table", success_table_to_json(table)}};
      emit(doc, "success " + std::to_string(table.successes) + "/" + std::to_string(table.total));
      return kOk;
    }

    if (*demogen) {
      const auto [rows, cols] = parse_grid(demo_grid);
      BeaconReach env;
      const auto starts = make_start_grid(rows, cols, spacing, spacing, env.base_pose());
      dg.seed = g.seed;
      const auto dirs = gen_synthetic_demos(env, starts, dg, demo_out);
      nlohmann::json list = nlohmann::json::array();
      for (const auto& d : dirs) list.push_back(d.string());
      emit({{"command", "demo-gen"}, {"env", demo_env}, {"grid", demo_grid}, {"bundles", list}},
           "wrote " + std::to_string(dirs.size()) + " bundles to " + demo_out);
      return kOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace demoforge::cli
