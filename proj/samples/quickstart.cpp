// End to end in memory: synthesize demonstrations in the BeaconReach scene,
// train a policy head on them, and evaluate it closed loop.

#include <iostream>

#include "demoforge/rollout.hpp"

int main() {
  using namespace demoforge;

  const BeaconReach env;
  const auto starts = make_start_grid(4, 6, kDefaultGridSpacing, kDefaultGridSpacing, env.base_pose());
  DemoGenConfig demo;
  const MemoryDataset data = to_memory_dataset(synthesize_trajectories(env, starts, demo));
  std::cout << "records: " << data.size() << "\n";

  const TrainResult trained = train_policy(data, EncoderSpec{}, TrainConfig{});
  std::cout << "loss: " << trained.loss_curve.front() << " -> " << trained.loss_curve.back() << "\n";

  const Policy policy(trained.snapshot);
  SnapshotPolicy actor{&policy};
  const auto eval = eval10_starts(env.base_pose());
  const SuccessTable table = evaluate_policy(env, actor, eval, 30);
  std::cout << "success: " << table.successes << "/" << table.total << "\n";
  return 0;
}
