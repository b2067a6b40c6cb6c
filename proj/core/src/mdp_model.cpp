#include "fhcac/mdp_model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fhcac/policy.hpp"

namespace fhcac {

double Episode::total_reward() const {
  return std::accumulate(rewards.begin(), rewards.end(), 0.0) + terminal_reward;
}

double Episode::total_constraint_cost(int k) const {
  const auto& costs = constraint_costs.at(k);
  return std::accumulate(costs.begin(), costs.end(), 0.0) + terminal_constraint_costs.at(k);
}

CmdpData CmdpData::zeros(int num_states, int num_actions, int horizon, int num_constraints) {
  if (num_states <= 0 || num_actions <= 0 || horizon < 0 || num_constraints < 0)
    throw std::invalid_argument("CmdpData::zeros: bad dimensions");
  CmdpData d;
  d.num_states = num_states;
  d.num_actions = num_actions;
  d.horizon = horizon;
  const std::size_t n = static_cast<std::size_t>(horizon) * num_states * num_actions * num_states;
  d.kernels.assign(n, 0.0);
  d.rewards.assign(n, 0.0);
  d.terminal_rewards.assign(num_states, 0.0);
  d.constraint_costs.assign(num_constraints, std::vector<double>(n, 0.0));
  d.terminal_constraint_costs.assign(num_constraints, std::vector<double>(num_states, 0.0));
  d.thresholds.assign(num_constraints, 0.0);
  d.initial_distribution.assign(num_states, 0.0);
  return d;
}

FiniteHorizonCMDP::FiniteHorizonCMDP(CmdpData data) : data_(std::move(data)) {
  const auto& d = data_;
  if (d.num_states <= 0 || d.num_actions <= 0 || d.horizon < 0)
    throw std::invalid_argument("FiniteHorizonCMDP: bad dimensions");
  const std::size_t n = static_cast<std::size_t>(d.horizon) * d.num_states * d.num_actions * d.num_states;
  const auto ns = static_cast<std::size_t>(d.num_states);
  if (d.kernels.size() != n) throw std::invalid_argument("FiniteHorizonCMDP: kernel table has wrong size");
  if (d.rewards.size() != n) throw std::invalid_argument("FiniteHorizonCMDP: reward table has wrong size");
  if (d.terminal_rewards.size() != ns)
    throw std::invalid_argument("FiniteHorizonCMDP: terminal reward table has wrong size");
  if (d.initial_distribution.size() != ns)
    throw std::invalid_argument("FiniteHorizonCMDP: initial distribution has wrong size");
  const std::size_t m = d.thresholds.size();
  if (d.constraint_costs.size() != m || d.terminal_constraint_costs.size() != m)
    throw std::invalid_argument("FiniteHorizonCMDP: constraint tables and thresholds disagree on M");
  for (std::size_t k = 0; k < m; ++k) {
    if (d.constraint_costs[k].size() != n)
      throw std::invalid_argument("FiniteHorizonCMDP: constraint cost table has wrong size");
    if (d.terminal_constraint_costs[k].size() != ns)
      throw std::invalid_argument("FiniteHorizonCMDP: terminal constraint cost table has wrong size");
  }
}

int FiniteHorizonCMDP::sample_initial_state(Rng& rng) const {
  return rng.categorical(data_.initial_distribution);
}

int FiniteHorizonCMDP::sample_next_state(int h, int s, int a, Rng& rng) const {
  return rng.categorical(kernel_row(h, s, a));
}

std::vector<std::vector<int>> FiniteHorizonCMDP::reachable_sets() const {
  return forward_reachable_sets(*this);
}

std::vector<std::vector<int>> forward_reachable_sets(const FiniteHorizonCMDP& model) {
  const int ns = model.num_states();
  std::vector<std::vector<int>> sets(model.horizon() + 1);
  std::vector<char> current(ns, 0);
  for (int s = 0; s < ns; ++s) current[s] = model.initial_distribution()[s] > 0.0;
  for (int h = 0;; ++h) {
    for (int s = 0; s < ns; ++s)
      if (current[s]) sets[h].push_back(s);
    if (h == model.horizon()) break;
    std::vector<char> next(ns, 0);
    for (int s : sets[h])
      for (int a = 0; a < model.num_actions(); ++a) {
        const auto row = model.kernel_row(h, s, a);
        for (int t = 0; t < ns; ++t)
          if (row[t] > 0.0) next[t] = 1;
      }
    current = std::move(next);
  }
  return sets;
}

std::string ValidationReport::summary() const {
  if (ok()) return "valid";
  std::ostringstream os;
  os << violations.size() << " violation(s)";
  for (const auto& v : violations) {
    os << "\n  " << v.what;
    if (v.stage >= 0) os << " (h=" << v.stage;
    if (v.state >= 0) os << ", s=" << v.state;
    if (v.action >= 0) os << ", a=" << v.action;
    if (v.stage >= 0) os << ")";
  }
  return os.str();
}

ValidationReport validate(const FiniteHorizonCMDP& model) {
  ValidationReport report;
  const auto& d = model.data();
  auto add = [&](std::string what, int h = -1, int s = -1, int a = -1) {
    report.violations.push_back({std::move(what), h, s, a});
  };

  for (int h = 0; h < d.horizon; ++h)
    for (int s = 0; s < d.num_states; ++s)
      for (int a = 0; a < d.num_actions; ++a) {
        const auto row = model.kernel_row(h, s, a);
        double sum = 0.0;
        bool negative = false;
        for (double p : row) {
          if (!std::isfinite(p) || p < 0.0) negative = true;
          sum += p;
        }
        if (negative) add("kernel row has a negative or non-finite entry", h, s, a);
        else if (std::abs(sum - 1.0) > kProbabilityTolerance)
          add("kernel row sums to " + std::to_string(sum), h, s, a);
        for (int t = 0; t < d.num_states; ++t) {
          const std::size_t i = d.index(h, s, a, t);
          if (!std::isfinite(d.rewards[i])) add("non-finite reward", h, s, a);
          for (const auto& g : d.constraint_costs)
            if (!std::isfinite(g[i])) add("non-finite constraint cost", h, s, a);
        }
      }

  double beta_sum = 0.0;
  for (int s = 0; s < d.num_states; ++s) {
    const double b = d.initial_distribution[s];
    if (!std::isfinite(b) || b < 0.0) add("initial distribution has a negative or non-finite entry", -1, s);
    beta_sum += b;
  }
  if (std::abs(beta_sum - 1.0) > kProbabilityTolerance)
    add("initial distribution sums to " + std::to_string(beta_sum));

  for (int s = 0; s < d.num_states; ++s) {
    if (!std::isfinite(d.terminal_rewards[s])) add("non-finite terminal reward", d.horizon, s);
    for (const auto& g : d.terminal_constraint_costs)
      if (!std::isfinite(g[s])) add("non-finite terminal constraint cost", d.horizon, s);
  }
  for (double alpha : d.thresholds)
    if (!std::isfinite(alpha)) add("non-finite threshold");
  return report;
}

double lagrangian_cost(const Environment& env, std::span<const double> lambda, int h, int s, int a,
                       int next) {
  if (h < 0 || h >= env.horizon()) throw std::out_of_range("lagrangian_cost: stage out of range");
  if (static_cast<int>(lambda.size()) != env.num_constraints())
    throw std::invalid_argument("lagrangian_cost: lambda has wrong length");
  double c = env.reward(h, s, a, next);
  for (int k = 0; k < env.num_constraints(); ++k) c += lambda[k] * env.constraint_cost(k, h, s, a, next);
  return c;
}

double terminal_lagrangian_cost(const Environment& env, std::span<const double> lambda, int s) {
  if (static_cast<int>(lambda.size()) != env.num_constraints())
    throw std::invalid_argument("terminal_lagrangian_cost: lambda has wrong length");
  const auto alpha = env.thresholds();
  double c = env.terminal_reward(s);
  for (int k = 0; k < env.num_constraints(); ++k)
    c += lambda[k] * (env.terminal_constraint_cost(k, s) - alpha[k]);
  return c;
}

double stage_lagrangian_cost(const Environment& env, std::span<const double> lambda, int h, int s,
                             int a, int next) {
  if (h == env.horizon()) return terminal_lagrangian_cost(env, lambda, s);
  return lagrangian_cost(env, lambda, h, s, a, next);
}

int sample_next(const Environment& env, Rng& rng, int h, int s, int a) {
  return env.sample_next_state(h, s, a, rng);
}

Episode rollout(const Environment& env, const NonStationaryPolicy& policy, Rng& rng,
                std::optional<int> initial_state) {
  const int horizon = env.horizon();
  if (policy.horizon() != horizon) throw std::invalid_argument("rollout: policy and model horizons differ");
  const int m = env.num_constraints();
  Episode ep;
  ep.states.resize(horizon + 1);
  ep.actions.resize(horizon);
  ep.rewards.resize(horizon);
  ep.constraint_costs.assign(m, std::vector<double>(horizon));
  ep.terminal_constraint_costs.resize(m);

  int s = initial_state ? *initial_state : env.sample_initial_state(rng);
  if (s < 0 || s >= env.num_states()) throw std::out_of_range("rollout: initial state out of range");
  Eigen::VectorXd mu(env.num_actions());
  for (int h = 0; h < horizon; ++h) {
    ep.states[h] = s;
    policy.action_distribution(h, s, mu);
    const int a = rng.categorical({mu.data(), static_cast<std::size_t>(mu.size())});
    const int next = env.sample_next_state(h, s, a, rng);
    ep.actions[h] = a;
    ep.rewards[h] = env.reward(h, s, a, next);
    for (int k = 0; k < m; ++k) ep.constraint_costs[k][h] = env.constraint_cost(k, h, s, a, next);
    s = next;
  }
  ep.states[horizon] = s;
  ep.terminal_reward = env.terminal_reward(s);
  for (int k = 0; k < m; ++k) ep.terminal_constraint_costs[k] = env.terminal_constraint_cost(k, s);
  return ep;
}

}  // namespace fhcac
