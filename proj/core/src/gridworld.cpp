#include "fhcac/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fhcac {

int grid_action(int dx, int dy) {
  if (dx < -1 || dx > 1 || dy < -1 || dy > 1) throw std::invalid_argument("grid_action: displacement out of range");
  return (dy + 1) * 3 + (dx + 1);
}

std::pair<int, int> grid_displacement(int action) {
  if (action < 0 || action >= kGridActions) throw std::out_of_range("grid_displacement: bad action");
  return {action % 3 - 1, action / 3 - 1};
}

std::vector<std::string> validate_config(const GridWorldConfig& c) {
  std::vector<std::string> problems;
  if (c.width <= 0 || c.height <= 0) problems.push_back("width and height must be positive");
  if (c.horizon < 1) problems.push_back("horizon must be at least 1");
  if (!(c.slip >= 0.0 && c.slip <= 1.0)) problems.push_back("slip must lie in [0, 1]");
  if (!std::isfinite(c.threshold)) problems.push_back("threshold must be finite");
  const int cells = c.width > 0 && c.height > 0 ? c.num_cells() : 0;
  auto check_schedule = [&](const CellSchedule& schedule, const char* name) {
    for (const auto& [stage, entries] : schedule) {
      if (stage < 0 || stage > c.horizon)
        problems.push_back(std::string(name) + ": stage " + std::to_string(stage) + " outside 0..H");
      for (const auto& e : entries) {
        if (e.cell < 0 || e.cell >= cells)
          problems.push_back(std::string(name) + ": cell " + std::to_string(e.cell) + " out of bounds");
        if (!std::isfinite(e.value)) problems.push_back(std::string(name) + ": non-finite value");
      }
    }
  };
  check_schedule(c.reward_schedule, "reward_schedule");
  check_schedule(c.bad_schedule, "bad_schedule");
  if (!c.start_distribution.empty()) {
    if (static_cast<int>(c.start_distribution.size()) != cells) {
      problems.push_back("start_distribution must have one entry per cell");
    } else {
      double sum = 0.0;
      for (double b : c.start_distribution) {
        if (!(b >= 0.0)) problems.push_back("start_distribution has a negative entry");
        sum += b;
      }
      if (std::abs(sum - 1.0) > kProbabilityTolerance) problems.push_back("start_distribution does not sum to 1");
    }
  }
  return problems;
}

namespace {

std::vector<int> draw_distinct_cells(Rng& rng, int cells, int count, const std::vector<char>& excluded) {
  std::vector<int> pool;
  for (int c = 0; c < cells; ++c)
    if (!excluded[c]) pool.push_back(c);
  if (count > static_cast<int>(pool.size()))
    throw std::invalid_argument("generate_random_schedules: not enough free cells for the requested count");
  // Partial Fisher-Yates.
  for (int i = 0; i < count; ++i) {
    const int j = i + rng.uniform_int(static_cast<int>(pool.size()) - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

GridWorldConfig generate_random_schedules(Rng& rng, const GridWorldTemplate& t) {
  if (t.reward_cells_per_stage < 0 || t.bad_cells_per_stage < 0)
    throw std::invalid_argument("generate_random_schedules: negative cell count");
  if (t.shared_cells < 0 || t.shared_cells > t.reward_cells_per_stage || t.shared_cells > t.bad_cells_per_stage)
    throw std::invalid_argument("generate_random_schedules: shared_cells must not exceed either cell count");
  if (t.change_period < 1) throw std::invalid_argument("generate_random_schedules: change_period must be >= 1");
  GridWorldConfig c;
  c.width = t.width;
  c.height = t.height;
  c.horizon = t.horizon;
  c.slip = t.slip;
  c.threshold = t.threshold;
  c.start_distribution = t.start_distribution;
  const int cells = t.width * t.height;
  auto draw_value = [&](double lo, double hi) { return lo == hi ? lo : lo + (hi - lo) * rng.uniform(); };

  std::vector<CellValue> rewards, bads;
  for (int h = 0; h < t.horizon; ++h) {
    if (h % t.change_period == 0) {
      rewards.clear();
      bads.clear();
      std::vector<char> excluded(cells, 0), is_reward(cells, 0);
      for (int cell : draw_distinct_cells(rng, cells, t.reward_cells_per_stage, excluded)) {
        rewards.push_back({cell, draw_value(t.reward_min, t.reward_max)});
        is_reward[cell] = 1;
      }
      std::vector<char> not_reward(cells);
      for (int c = 0; c < cells; ++c) not_reward[c] = !is_reward[c];
      for (int cell : draw_distinct_cells(rng, cells, t.shared_cells, not_reward)) {
        bads.push_back({cell, draw_value(t.cost_min, t.cost_max)});
        excluded[cell] = 1;
      }
      if (t.disjoint) excluded = is_reward;
      for (const auto& b : bads) excluded[b.cell] = 1;
      for (int cell : draw_distinct_cells(rng, cells, t.bad_cells_per_stage - t.shared_cells, excluded))
        bads.push_back({cell, draw_value(t.cost_min, t.cost_max)});
      std::sort(bads.begin(), bads.end(), [](const auto& x, const auto& y) { return x.cell < y.cell; });
    }
    if (!rewards.empty()) c.reward_schedule[h] = rewards;
    if (!bads.empty()) c.bad_schedule[h] = bads;
  }
  const auto problems = validate_config(c);
  if (!problems.empty()) throw std::invalid_argument("generate_random_schedules: " + problems.front());
  return c;
}

GridWorldConfig generate_random_schedules(std::uint64_t seed, const GridWorldTemplate& tmpl) {
  Rng rng(seed);
  auto c = generate_random_schedules(rng, tmpl);
  c.seed = seed;
  return c;
}

GridWorld::GridWorld(GridWorldConfig config) : config_(std::move(config)) {
  const auto problems = validate_config(config_);
  if (!problems.empty()) throw std::invalid_argument("GridWorld: " + problems.front());
  const int cells = config_.num_cells();
  start_ = config_.start_distribution;
  if (start_.empty()) {
    start_.assign(cells, 0.0);
    start_[0] = 1.0;
  }
  auto expand = [&](const CellSchedule& schedule) {
    std::vector<std::vector<double>> table(config_.horizon + 1, std::vector<double>(cells, 0.0));
    for (const auto& [stage, entries] : schedule)
      for (const auto& e : entries) table[stage][e.cell] += e.value;
    return table;
  };
  reward_by_stage_ = expand(config_.reward_schedule);
  cost_by_stage_ = expand(config_.bad_schedule);
}

int GridWorld::move(int s, int dx, int dy) const {
  const int x = std::clamp(s % config_.width + dx, 0, config_.width - 1);
  const int y = std::clamp(s / config_.width + dy, 0, config_.height - 1);
  return y * config_.width + x;
}

std::vector<std::pair<int, double>> GridWorld::successors(int s, int a) const {
  std::vector<std::pair<int, double>> out;
  const double other = config_.slip / 8.0;
  for (int b = 0; b < kGridActions; ++b) {
    const double p = b == a ? 1.0 - config_.slip : other;
    if (p == 0.0) continue;
    const auto [dx, dy] = grid_displacement(b);
    const int next = move(s, dx, dy);
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& e) { return e.first == next; });
    if (it == out.end()) out.emplace_back(next, p);
    else it->second += p;
  }
  return out;
}

int GridWorld::sample_initial_state(Rng& rng) const { return rng.categorical(start_); }

int GridWorld::sample_next_state(int /*h*/, int s, int a, Rng& rng) const {
  int outcome = a;
  if (config_.slip > 0.0) {
    const double u = rng.uniform();
    if (u >= 1.0 - config_.slip) {
      // One of the other eight displacements, uniformly.
      const int k = rng.uniform_int(8);
      outcome = k < a ? k : k + 1;
    }
  }
  const auto [dx, dy] = grid_displacement(outcome);
  return move(s, dx, dy);
}

double GridWorld::reward(int h, int /*s*/, int /*a*/, int next) const { return reward_by_stage_[h][next]; }
double GridWorld::terminal_reward(int s) const { return reward_by_stage_[config_.horizon][s]; }

double GridWorld::constraint_cost(int k, int h, int /*s*/, int /*a*/, int next) const {
  if (k != 0) throw std::out_of_range("GridWorld: single constraint");
  return cost_by_stage_[h][next];
}

double GridWorld::terminal_constraint_cost(int k, int s) const {
  if (k != 0) throw std::out_of_range("GridWorld: single constraint");
  return cost_by_stage_[config_.horizon][s];
}

std::vector<std::vector<int>> GridWorld::reachable_sets() const {
  const int cells = config_.num_cells();
  std::vector<std::vector<int>> sets(config_.horizon + 1);
  std::vector<char> current(cells, 0);
  for (int s = 0; s < cells; ++s) current[s] = start_[s] > 0.0;
  for (int h = 0;; ++h) {
    for (int s = 0; s < cells; ++s)
      if (current[s]) sets[h].push_back(s);
    if (h == config_.horizon) break;
    std::vector<char> next(cells, 0);
    for (int s : sets[h])
      for (int a = 0; a < kGridActions; ++a)
        for (const auto& [t, p] : successors(s, a))
          if (p > 0.0) next[t] = 1;
    current = std::move(next);
  }
  return sets;
}

FiniteHorizonCMDP build(const GridWorldConfig& config) {
  const GridWorld world(config);
  const int cells = config.num_cells();
  auto data = CmdpData::zeros(cells, kGridActions, config.horizon, 1);
  for (int s = 0; s < cells; ++s)
    for (int a = 0; a < kGridActions; ++a) {
      const auto succ = world.successors(s, a);
      for (int h = 0; h < config.horizon; ++h)
        for (const auto& [t, p] : succ) data.p(h, s, a, t) = p;
    }
  for (int h = 0; h < config.horizon; ++h)
    for (int s = 0; s < cells; ++s)
      for (int a = 0; a < kGridActions; ++a)
        for (int t = 0; t < cells; ++t) {
          data.r(h, s, a, t) = world.reward(h, s, a, t);
          data.g(0, h, s, a, t) = world.constraint_cost(0, h, s, a, t);
        }
  for (int s = 0; s < cells; ++s) {
    data.terminal_rewards[s] = world.terminal_reward(s);
    data.terminal_constraint_costs[0][s] = world.terminal_constraint_cost(0, s);
  }
  data.thresholds[0] = config.threshold;
  if (config.start_distribution.empty()) data.initial_distribution[0] = 1.0;
  else data.initial_distribution = config.start_distribution;
  return FiniteHorizonCMDP(std::move(data));
}

}  // namespace fhcac
