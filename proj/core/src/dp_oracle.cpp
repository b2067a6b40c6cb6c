#include "fhcac/dp_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "fhcac/critic.hpp"

namespace fhcac {
namespace {

void check_lambda(const FiniteHorizonCMDP& model, std::span<const double> lambda) {
  if (static_cast<int>(lambda.size()) != model.num_constraints())
    throw std::invalid_argument("lambda length does not match the number of constraints");
}

void check_rule(const FiniteHorizonCMDP& model, const DecisionRule& rule) {
  if (static_cast<int>(rule.size()) != model.horizon())
    throw std::invalid_argument("decision rule horizon does not match the model");
  for (const auto& m : rule)
    if (m.rows() != model.num_states() || m.cols() != model.num_actions())
      throw std::invalid_argument("decision rule table has wrong shape");
}

// Backward recursion of sum_a mu sum_s' p [stage(s, a, s') + next(s')],
// starting from `terminal`. Returns values for h = 0..H and, if requested,
// the stage Q tables.
template <typename StageCost>
std::vector<Eigen::VectorXd> evaluate_backward(const FiniteHorizonCMDP& model, const DecisionRule& rule,
                                               const Eigen::VectorXd& terminal, StageCost stage_cost,
                                               std::vector<Eigen::MatrixXd>* q_tables = nullptr) {
  const int horizon = model.horizon();
  const int ns = model.num_states();
  const int na = model.num_actions();
  std::vector<Eigen::VectorXd> values(horizon + 1);
  values[horizon] = terminal;
  if (q_tables) q_tables->assign(horizon, Eigen::MatrixXd());
  for (int h = horizon - 1; h >= 0; --h) {
    Eigen::MatrixXd q(ns, na);
    for (int s = 0; s < ns; ++s)
      for (int a = 0; a < na; ++a) {
        const auto row = model.kernel_row(h, s, a);
        double acc = 0.0;
        for (int t = 0; t < ns; ++t)
          if (row[t] != 0.0) acc += row[t] * (stage_cost(h, s, a, t) + values[h + 1][t]);
        q(s, a) = acc;
      }
    values[h] = (rule[h].array() * q.array()).rowwise().sum();
    if (q_tables) (*q_tables)[h] = std::move(q);
  }
  return values;
}

double beta_dot(const FiniteHorizonCMDP& model, const Eigen::VectorXd& v) {
  const auto beta = model.initial_distribution();
  double acc = 0.0;
  for (int s = 0; s < model.num_states(); ++s) acc += beta[s] * v[s];
  return acc;
}

}  // namespace

DecisionRule decision_rule(const NonStationaryPolicy& policy) {
  DecisionRule rule(policy.horizon(), Eigen::MatrixXd(policy.num_states(), policy.num_actions()));
  Eigen::VectorXd mu(policy.num_actions());
  for (int h = 0; h < policy.horizon(); ++h)
    for (int s = 0; s < policy.num_states(); ++s) {
      policy.action_distribution(h, s, mu);
      rule[h].row(s) = mu.transpose();
    }
  return rule;
}

DecisionRule decision_rule(const DeterministicPolicy& policy, int num_actions) {
  DecisionRule rule;
  for (const auto& stage : policy) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(stage.size()), num_actions);
    for (std::size_t s = 0; s < stage.size(); ++s) m(static_cast<Eigen::Index>(s), stage[s]) = 1.0;
    rule.push_back(std::move(m));
  }
  return rule;
}

OccupationMeasures occupation_measures(const FiniteHorizonCMDP& model, const DecisionRule& rule) {
  check_rule(model, rule);
  const int ns = model.num_states();
  OccupationMeasures out;
  Eigen::VectorXd d(ns);
  for (int s = 0; s < ns; ++s) d[s] = model.initial_distribution()[s];
  for (int h = 0;; ++h) {
    std::vector<int> support;
    for (int s = 0; s < ns; ++s)
      if (d[s] > 0.0) support.push_back(s);
    out.reachable.push_back(std::move(support));
    out.d.push_back(d);
    if (h == model.horizon()) break;
    Eigen::VectorXd next = Eigen::VectorXd::Zero(ns);
    for (int s = 0; s < ns; ++s) {
      if (d[s] == 0.0) continue;
      for (int a = 0; a < model.num_actions(); ++a) {
        const double w = d[s] * rule[h](s, a);
        if (w == 0.0) continue;
        const auto row = model.kernel_row(h, s, a);
        for (int t = 0; t < ns; ++t) next[t] += w * row[t];
      }
    }
    d = std::move(next);
  }
  return out;
}

OccupationMeasures occupation_measures(const FiniteHorizonCMDP& model, const NonStationaryPolicy& policy) {
  return occupation_measures(model, decision_rule(policy));
}

ExactSolution backward_induction(const FiniteHorizonCMDP& model, const DecisionRule& rule,
                                 std::span<const double> lambda) {
  check_rule(model, rule);
  check_lambda(model, lambda);
  const int ns = model.num_states();
  const int m = model.num_constraints();
  const auto alpha = model.thresholds();

  ExactSolution sol;
  Eigen::VectorXd terminal(ns);
  for (int s = 0; s < ns; ++s) terminal[s] = terminal_lagrangian_cost(model, lambda, s);
  sol.V = evaluate_backward(
      model, rule, terminal,
      [&](int h, int s, int a, int t) { return lagrangian_cost(model, lambda, h, s, a, t); }, &sol.Q);

  Eigen::VectorXd terminal_reward(ns);
  for (int s = 0; s < ns; ++s) terminal_reward[s] = model.terminal_reward(s);
  const auto reward_values = evaluate_backward(
      model, rule, terminal_reward, [&](int h, int s, int a, int t) { return model.reward(h, s, a, t); });
  sol.J = beta_dot(model, reward_values[0]);

  sol.W.resize(m);
  sol.constraint_values.resize(m);
  for (int k = 0; k < m; ++k) {
    Eigen::VectorXd terminal_cost(ns);
    for (int s = 0; s < ns; ++s) terminal_cost[s] = model.terminal_constraint_cost(k, s) - alpha[k];
    sol.W[k] = evaluate_backward(model, rule, terminal_cost,
                                 [&](int h, int s, int a, int t) { return model.constraint_cost(k, h, s, a, t); });
    sol.constraint_values[k] = beta_dot(model, sol.W[k][0]) + alpha[k];
  }
  sol.d = occupation_measures(model, rule).d;
  sol.lagrangian = beta_dot(model, sol.V[0]);
  return sol;
}

ExactSolution backward_induction(const FiniteHorizonCMDP& model, const NonStationaryPolicy& policy,
                                 std::span<const double> lambda) {
  if (policy.horizon() != model.horizon()) throw std::invalid_argument("policy and model horizons differ");
  return backward_induction(model, decision_rule(policy), lambda);
}

PolicyValue evaluate_policy(const FiniteHorizonCMDP& model, const DecisionRule& rule) {
  const std::vector<double> zero(model.num_constraints(), 0.0);
  auto sol = backward_induction(model, rule, zero);
  return {sol.J, std::move(sol.constraint_values)};
}

PolicyValue evaluate_policy(const FiniteHorizonCMDP& model, const NonStationaryPolicy& policy) {
  return evaluate_policy(model, decision_rule(policy));
}

double lagrangian_value(const FiniteHorizonCMDP& model, const NonStationaryPolicy& policy,
                        std::span<const double> lambda) {
  check_lambda(model, lambda);
  const auto rule = decision_rule(policy);
  check_rule(model, rule);
  Eigen::VectorXd terminal(model.num_states());
  for (int s = 0; s < model.num_states(); ++s) terminal[s] = terminal_lagrangian_cost(model, lambda, s);
  const auto values = evaluate_backward(model, rule, terminal, [&](int h, int s, int a, int t) {
    return lagrangian_cost(model, lambda, h, s, a, t);
  });
  return beta_dot(model, values[0]);
}

StageVectors exact_gradient(const FiniteHorizonCMDP& model, const NonStationaryPolicy& policy,
                            std::span<const double> lambda, const StageVectors& baseline) {
  const auto sol = backward_induction(model, policy, lambda);
  const int horizon = model.horizon();
  if (!baseline.empty() && static_cast<int>(baseline.size()) < horizon)
    throw std::invalid_argument("exact_gradient: baseline needs one table per decision stage");
  StageVectors grad(horizon);
  for (int h = 0; h < horizon; ++h) {
    grad[h] = Eigen::VectorXd::Zero(policy.features().dim(h));
    for (int s = 0; s < model.num_states(); ++s) {
      const double d = sol.d[h][s];
      if (d == 0.0) continue;
      const double b = baseline.empty() ? 0.0 : baseline[h][s];
      const Eigen::VectorXd mu = policy.action_distribution(h, s);
      for (int a = 0; a < model.num_actions(); ++a)
        policy.add_score(h, s, a, d * mu[a] * (sol.Q[h](s, a) - b), grad[h]);
    }
  }
  return grad;
}

StageVectors finite_difference_gradient(const FiniteHorizonCMDP& model, const NonStationaryPolicy& policy,
                                        std::span<const double> lambda, double epsilon) {
  // The probe box is widened by the stencil so that set_params never clamps
  // a perturbed coordinate.
  NonStationaryPolicy probe(policy.shared_features(), policy.temperature(), policy.param_bound() + 2.0 * epsilon);
  for (int h = 0; h < model.horizon(); ++h) probe.set_params(h, policy.params(h));
  StageVectors grad(model.horizon());
  for (int h = 0; h < model.horizon(); ++h) {
    const Eigen::VectorXd base = policy.params(h);
    grad[h].resize(base.size());
    for (Eigen::Index i = 0; i < base.size(); ++i) {
      Eigen::VectorXd shifted = base;
      shifted[i] = base[i] + epsilon;
      probe.set_params(h, shifted);
      const double up = lagrangian_value(model, probe, lambda);
      shifted[i] = base[i] - epsilon;
      probe.set_params(h, shifted);
      const double down = lagrangian_value(model, probe, lambda);
      grad[h][i] = (up - down) / (2.0 * epsilon);
    }
    probe.set_params(h, base);
  }
  return grad;
}

StageVectors approximate_gradient(const FiniteHorizonCMDP& model, const NonStationaryPolicy& policy,
                                  std::span<const double> lambda, const StageFeatureBasis& basis) {
  const auto fp = fixed_points(basis, model, policy, lambda);
  const auto occ = occupation_measures(model, policy);
  const int ns = model.num_states();
  StageVectors grad(model.horizon());
  for (int h = 0; h < model.horizon(); ++h) {
    grad[h] = Eigen::VectorXd::Zero(policy.features().dim(h));
    for (int s = 0; s < ns; ++s) {
      const double d = occ.d[h][s];
      if (d == 0.0) continue;
      const double here = basis.value(h, s, fp.lagrangian[h]);
      const Eigen::VectorXd mu = policy.action_distribution(h, s);
      for (int a = 0; a < model.num_actions(); ++a) {
        const auto row = model.kernel_row(h, s, a);
        double advantage = 0.0;
        for (int t = 0; t < ns; ++t) {
          if (row[t] == 0.0) continue;
          advantage += row[t] * (lagrangian_cost(model, lambda, h, s, a, t) +
                                 basis.value(h + 1, t, fp.lagrangian[h + 1]) - here);
        }
        policy.add_score(h, s, a, d * mu[a] * advantage, grad[h]);
      }
    }
  }
  return grad;
}

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

GradientComparison compare_gradients(const StageVectors& a, const StageVectors& b, double floor) {
  if (a.size() != b.size()) throw std::invalid_argument("compare_gradients: stage counts differ");
  GradientComparison out;
  for (std::size_t h = 0; h < a.size(); ++h) {
    if (a[h].size() != b[h].size()) throw std::invalid_argument("compare_gradients: dimensions differ");
    for (Eigen::Index i = 0; i < a[h].size(); ++i) {
      const double rel = relative_error(a[h][i], b[h][i], floor);
      out.max_absolute_error = std::max(out.max_absolute_error, std::abs(a[h][i] - b[h][i]));
      if (rel > out.max_relative_error || out.worst_stage < 0) {
        out.max_relative_error = std::max(out.max_relative_error, rel);
        out.worst_stage = static_cast<int>(h);
        out.worst_coordinate = static_cast<int>(i);
      }
    }
  }
  return out;
}

DeterministicPolicy greedy_policy(const FiniteHorizonCMDP& model, std::span<const double> lambda) {
  check_lambda(model, lambda);
  const int ns = model.num_states();
  const int na = model.num_actions();
  DeterministicPolicy policy(model.horizon(), std::vector<int>(ns, 0));
  Eigen::VectorXd value(ns);
  for (int s = 0; s < ns; ++s) value[s] = terminal_lagrangian_cost(model, lambda, s);
  for (int h = model.horizon() - 1; h >= 0; --h) {
    Eigen::VectorXd next(ns);
    for (int s = 0; s < ns; ++s) {
      int best_a = 0;
      double best_q = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < na; ++a) {
        const auto row = model.kernel_row(h, s, a);
        double q = 0.0;
        for (int t = 0; t < ns; ++t)
          if (row[t] != 0.0) q += row[t] * (lagrangian_cost(model, lambda, h, s, a, t) + value[t]);
        if (q > best_q + 1e-12) {
          best_q = q;
          best_a = a;
        }
      }
      policy[h][s] = best_a;
      next[s] = best_q;
    }
    value = std::move(next);
  }
  return policy;
}

ConstrainedReference constrained_reference(const FiniteHorizonCMDP& model, const ReferenceOptions& options) {
  const int m = model.num_constraints();
  if (m > 2) throw std::invalid_argument("constrained_reference: at most two constraints supported");
  if (options.grid_points < 1) throw std::invalid_argument("constrained_reference: need at least one grid point");
  if (!(options.lambda_floor <= 0.0)) throw std::invalid_argument("constrained_reference: lambda_floor must be <= 0");
  const auto alpha = model.thresholds();
  const int n = options.grid_points;
  auto coordinate = [&](int i) {
    return n == 1 ? 0.0 : options.lambda_floor * static_cast<double>(i) / static_cast<double>(n - 1);
  };

  int total = 1;
  for (int k = 0; k < m; ++k) total *= n;

  ConstrainedReference ref;
  ref.grid.reserve(total);
  std::vector<double> lambda(m);
  for (int flat = 0; flat < total; ++flat) {
    int rem = flat;
    for (int k = 0; k < m; ++k) {
      lambda[k] = coordinate(rem % n);
      rem /= n;
    }
    const auto policy = greedy_policy(model, lambda);
    const auto value = evaluate_policy(model, decision_rule(policy, model.num_actions()));
    ReferenceGridPoint point;
    point.lambda = Eigen::Map<const Eigen::VectorXd>(lambda.data(), m);
    point.J = value.J;
    point.constraint_values = value.constraint_values;
    point.feasible = true;
    for (int k = 0; k < m; ++k)
      if (value.constraint_values[k] > alpha[k] + options.feasibility_tolerance) point.feasible = false;
    if (point.feasible && (!ref.feasible || point.J > ref.best_J)) {
      ref.feasible = true;
      ref.best_J = point.J;
      ref.best_constraint_values = point.constraint_values;
      ref.best_lambda = point.lambda;
      ref.best_policy = policy;
    }
    ref.grid.push_back(std::move(point));
  }

  // Along each coordinate, a more negative multiplier should not increase
  // that constraint's value. Ties between greedy policies can break this.
  int stride = 1;
  for (int k = 0; k < m; ++k) {
    for (int flat = 0; flat < total; ++flat) {
      const int idx = (flat / stride) % n;
      if (idx + 1 >= n) continue;
      const auto& here = ref.grid[flat];
      const auto& deeper = ref.grid[flat + stride];
      if (deeper.constraint_values[k] > here.constraint_values[k] + 1e-9) {
        std::ostringstream os;
        os << "S^(" << k + 1 << ") rose from " << here.constraint_values[k] << " to "
           << deeper.constraint_values[k] << " between lambda_" << k + 1 << " = " << here.lambda[k] << " and "
           << deeper.lambda[k];
        ref.monotonicity_notes.push_back(os.str());
      }
    }
    stride *= n;
  }
  return ref;
}

}  // namespace fhcac
