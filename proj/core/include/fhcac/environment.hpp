#pragma once

#include <span>
#include <vector>

#include "fhcac/rng.hpp"

namespace fhcac {

// Generative view of a finite-horizon constrained MDP. Decisions are taken at
// stages 0..H-1 and the process terminates at stage H. Both the dense
// FiniteHorizonCMDP and the generative GridWorld implement this, so rollouts
// and training never need materialized kernels.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual int num_states() const = 0;
  virtual int num_actions() const = 0;
  virtual int horizon() const = 0;
  virtual int num_constraints() const = 0;
  virtual std::span<const double> thresholds() const = 0;

  virtual int sample_initial_state(Rng& rng) const = 0;
  virtual int sample_next_state(int h, int s, int a, Rng& rng) const = 0;

  virtual double reward(int h, int s, int a, int next) const = 0;
  virtual double terminal_reward(int s) const = 0;
  virtual double constraint_cost(int k, int h, int s, int a, int next) const = 0;
  virtual double terminal_constraint_cost(int k, int s) const = 0;

  // S_0..S_H: states with positive probability of occupation at each stage.
  // Under strictly positive policies this set does not depend on the policy.
  virtual std::vector<std::vector<int>> reachable_sets() const = 0;
};

// One trajectory s_0, a_0, s_1, ..., a_{H-1}, s_H with realized rewards and
// constraint costs.
struct Episode {
  std::vector<int> states;                         // H + 1
  std::vector<int> actions;                        // H
  std::vector<double> rewards;                     // H
  double terminal_reward = 0.0;
  std::vector<std::vector<double>> constraint_costs;  // [k][h], H each
  std::vector<double> terminal_constraint_costs;      // [k]

  int horizon() const { return static_cast<int>(actions.size()); }
  int num_constraints() const { return static_cast<int>(constraint_costs.size()); }

  double total_reward() const;
  double total_constraint_cost(int k) const;
};

}  // namespace fhcac
