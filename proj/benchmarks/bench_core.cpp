#include <filesystem>

#include <benchmark/benchmark.h>

#include "fhcac/critic.hpp"
#include "fhcac/dp_oracle.hpp"
#include "fhcac/gridworld.hpp"
#include "fhcac/serialization.hpp"
#include "fhcac/trainer.hpp"

namespace {

using namespace fhcac;

const std::filesystem::path kData = FHCAC_DATA_DIR;

GridWorldConfig grid_config(int side) {
  GridWorldTemplate t = template_from_json(read_json_file(kData / "grid/acceptance_template.json"));
  t.width = side;
  t.height = side;
  return generate_random_schedules(8, t);
}

void BM_GridRollout(benchmark::State& state) {
  const GridWorld env(grid_config(static_cast<int>(state.range(0))));
  const auto policy = make_tabular_policy(env.num_states(), env.num_actions(), env.reachable_sets(), env.horizon());
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(rollout(env, policy, rng));
}
BENCHMARK(BM_GridRollout)->Arg(4)->Arg(10);

void BM_BackwardInduction(benchmark::State& state) {
  const auto model = build(grid_config(static_cast<int>(state.range(0))));
  const auto policy = make_tabular_policy(model.num_states(), model.num_actions(), model.reachable_sets(), model.horizon());
  const std::vector<double> lambda{-1.0};
  for (auto _ : state) benchmark::DoNotOptimize(backward_induction(model, policy, lambda));
}
BENCHMARK(BM_BackwardInduction)->Arg(4)->Arg(10)->Unit(benchmark::kMicrosecond);

void BM_TrainEpisode(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  auto env = std::make_shared<GridWorld>(grid_config(side));
  const auto model = build(env->config());
  const auto basis = std::make_shared<StageFeatureBasis>(StageFeatureBasis::tabular(model.num_states(), model.reachable_sets()));
  auto policy = make_tabular_policy(model.num_states(), model.num_actions(), model.reachable_sets(), model.horizon());
  auto st = make_trainer_state(env, basis, policy, TrainerOptions{}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(train_episode(st));
}
BENCHMARK(BM_TrainEpisode)->Arg(4)->Arg(10);

}  // namespace

BENCHMARK_MAIN();
