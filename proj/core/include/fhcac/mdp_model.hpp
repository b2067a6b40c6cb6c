#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fhcac/environment.hpp"
#include "fhcac/rng.hpp"

namespace fhcac {

class NonStationaryPolicy;

// Raw tables of a finite-horizon CMDP. Stage tables are stored densely and
// indexed [h][s][a][s'] in row-major order.
struct CmdpData {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  std::vector<double> kernels;
  std::vector<double> rewards;
  std::vector<double> terminal_rewards;
  std::vector<std::vector<double>> constraint_costs;
  std::vector<std::vector<double>> terminal_constraint_costs;
  std::vector<double> thresholds;
  std::vector<double> initial_distribution;

  // All-zero tables of the right shape (kernels included, so the result is
  // not yet a valid model).
  static CmdpData zeros(int num_states, int num_actions, int horizon, int num_constraints);

  std::size_t index(int h, int s, int a, int next) const {
    return ((static_cast<std::size_t>(h) * num_states + s) * num_actions + a) * num_states + next;
  }
  double& p(int h, int s, int a, int next) { return kernels[index(h, s, a, next)]; }
  double& r(int h, int s, int a, int next) { return rewards[index(h, s, a, next)]; }
  double& g(int k, int h, int s, int a, int next) { return constraint_costs[k][index(h, s, a, next)]; }
  int num_constraints() const { return static_cast<int>(thresholds.size()); }
};

// Immutable dense CMDP. Construction checks only table shapes; use validate()
// for the probabilistic invariants.
class FiniteHorizonCMDP final : public Environment {
 public:
  explicit FiniteHorizonCMDP(CmdpData data);

  int num_states() const override { return data_.num_states; }
  int num_actions() const override { return data_.num_actions; }
  int horizon() const override { return data_.horizon; }
  int num_constraints() const override { return data_.num_constraints(); }
  std::span<const double> thresholds() const override { return data_.thresholds; }

  int sample_initial_state(Rng& rng) const override;
  int sample_next_state(int h, int s, int a, Rng& rng) const override;

  double reward(int h, int s, int a, int next) const override {
    return data_.rewards[data_.index(h, s, a, next)];
  }
  double terminal_reward(int s) const override { return data_.terminal_rewards[s]; }
  double constraint_cost(int k, int h, int s, int a, int next) const override {
    return data_.constraint_costs[k][data_.index(h, s, a, next)];
  }
  double terminal_constraint_cost(int k, int s) const override {
    return data_.terminal_constraint_costs[k][s];
  }
  std::vector<std::vector<int>> reachable_sets() const override;

  double transition(int h, int s, int a, int next) const {
    return data_.kernels[data_.index(h, s, a, next)];
  }
  // p_h(s, a, .) as a contiguous row.
  std::span<const double> kernel_row(int h, int s, int a) const {
    return {data_.kernels.data() + data_.index(h, s, a, 0), static_cast<std::size_t>(data_.num_states)};
  }
  std::span<const double> initial_distribution() const { return data_.initial_distribution; }
  const CmdpData& data() const { return data_; }

 private:
  CmdpData data_;
};

struct Violation {
  std::string what;
  int stage = -1;
  int state = -1;
  int action = -1;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

inline constexpr double kProbabilityTolerance = 1e-12;

ValidationReport validate(const FiniteHorizonCMDP& model);

// c^lambda_h(s, a, s') = r_h + sum_k lambda_k g^(k)_h for h < H.
double lagrangian_cost(const Environment& env, std::span<const double> lambda, int h, int s, int a,
                       int next);
// c^lambda_H(s) = r_H(s) + sum_k lambda_k (g^(k)_H(s) - alpha_k).
double terminal_lagrangian_cost(const Environment& env, std::span<const double> lambda, int s);
// Dispatches on h: for h == H only the terminal state `s` is used.
double stage_lagrangian_cost(const Environment& env, std::span<const double> lambda, int h, int s,
                             int a, int next);

int sample_next(const Environment& env, Rng& rng, int h, int s, int a);

// One episode under `policy`; s_0 is drawn from the initial distribution
// unless given.
Episode rollout(const Environment& env, const NonStationaryPolicy& policy, Rng& rng,
                std::optional<int> initial_state = std::nullopt);

// Support propagation S_{h+1} = {s' : p_h(s, a, s') > 0 for s in S_h, any a}.
std::vector<std::vector<int>> forward_reachable_sets(const FiniteHorizonCMDP& model);

}  // namespace fhcac
