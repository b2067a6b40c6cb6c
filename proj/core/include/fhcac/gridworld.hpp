#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fhcac/environment.hpp"
#include "fhcac/mdp_model.hpp"
#include "fhcac/rng.hpp"

namespace fhcac {

// Time-varying 2-D grid world. State id = y * width + x with y = 0 the top
// row. Nine actions, one per displacement (dx, dy) in {-1, 0, 1}^2, encoded
// as a = (dy + 1) * 3 + (dx + 1). The intended displacement happens with
// probability 1 - slip; the slip mass is spread evenly over the other eight
// displacements. Moves that would leave the grid are clamped to the border.
// Rewards and constraint costs are paid on entering a cell, and both change
// with the stage.

struct CellValue {
  int cell = 0;
  double value = 0.0;
  friend bool operator==(const CellValue&, const CellValue&) = default;
};

// stage -> cells. A stage-H entry sets the terminal reward/cost.
using CellSchedule = std::map<int, std::vector<CellValue>>;

struct GridWorldConfig {
  int width = 10;
  int height = 10;
  int horizon = 100;
  double slip = 0.1;
  CellSchedule reward_schedule;
  CellSchedule bad_schedule;
  double threshold = 25.0;
  std::vector<double> start_distribution;  // empty -> all mass on cell 0
  std::uint64_t seed = 0;

  int num_cells() const { return width * height; }
};

// Inputs for randomized schedule generation.
struct GridWorldTemplate {
  int width = 10;
  int height = 10;
  int horizon = 100;
  double slip = 0.1;
  double threshold = 25.0;
  int reward_cells_per_stage = 3;
  int bad_cells_per_stage = 5;
  double reward_min = 1.0;
  double reward_max = 1.0;
  double cost_min = 1.0;
  double cost_max = 1.0;
  // Cell layout is redrawn every `change_period` stages.
  int change_period = 1;
  // Bad cells avoid the reward cells of the same stage, apart from the
  // `shared_cells` reward cells that are deliberately made bad as well.
  bool disjoint = true;
  int shared_cells = 0;
  std::vector<double> start_distribution;
};

inline constexpr int kGridActions = 9;

int grid_action(int dx, int dy);
std::pair<int, int> grid_displacement(int action);

// Empty if valid, else one message per problem.
std::vector<std::string> validate_config(const GridWorldConfig& config);

GridWorldConfig generate_random_schedules(Rng& rng, const GridWorldTemplate& tmpl);
GridWorldConfig generate_random_schedules(std::uint64_t seed, const GridWorldTemplate& tmpl);

// Generative grid world; never materializes kernels.
class GridWorld final : public Environment {
 public:
  explicit GridWorld(GridWorldConfig config);

  int num_states() const override { return config_.num_cells(); }
  int num_actions() const override { return kGridActions; }
  int horizon() const override { return config_.horizon; }
  int num_constraints() const override { return 1; }
  std::span<const double> thresholds() const override { return {&config_.threshold, 1}; }

  int sample_initial_state(Rng& rng) const override;
  int sample_next_state(int h, int s, int a, Rng& rng) const override;

  double reward(int h, int s, int a, int next) const override;
  double terminal_reward(int s) const override;
  double constraint_cost(int k, int h, int s, int a, int next) const override;
  double terminal_constraint_cost(int k, int s) const override;
  std::vector<std::vector<int>> reachable_sets() const override;

  // Cell reached from s by displacement (dx, dy), clamped to the grid.
  int move(int s, int dx, int dy) const;
  // p_h(s, a, .) as (next, probability) pairs, merged over clamped moves.
  std::vector<std::pair<int, double>> successors(int s, int a) const;

  const GridWorldConfig& config() const { return config_; }

 private:
  GridWorldConfig config_;
  std::vector<double> start_;
  std::vector<std::vector<double>> reward_by_stage_;  // [h][cell], h = 0..H
  std::vector<std::vector<double>> cost_by_stage_;
};

// Dense model of the grid world.
FiniteHorizonCMDP build(const GridWorldConfig& config);

}  // namespace fhcac
