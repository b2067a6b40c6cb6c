#include "fhcac/critic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fhcac/dp_oracle.hpp"

namespace fhcac {

StageFeatureBasis::StageFeatureBasis(std::vector<Eigen::MatrixXd> features, std::vector<std::vector<int>> reachable)
    : features_(std::move(features)), reachable_(std::move(reachable)) {
  if (features_.empty()) throw std::invalid_argument("basis: need features for stages 0..H");
  if (reachable_.size() != features_.size()) throw std::invalid_argument("basis: need a reachable set per stage");
  const auto ns = features_.front().cols();
  for (std::size_t h = 0; h < features_.size(); ++h) {
    if (features_[h].cols() != ns) throw std::invalid_argument("basis: every stage must cover all states");
    for (int s : reachable_[h])
      if (s < 0 || s >= ns) throw std::invalid_argument("basis: reachable state out of range");
  }
}

StageFeatureBasis StageFeatureBasis::tabular(int num_states, std::vector<std::vector<int>> reachable) {
  std::vector<Eigen::MatrixXd> features;
  for (const auto& stage : reachable) {
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(stage.size()), num_states);
    for (std::size_t i = 0; i < stage.size(); ++i) f(static_cast<Eigen::Index>(i), stage[i]) = 1.0;
    features.push_back(std::move(f));
  }
  StageFeatureBasis basis(std::move(features), std::move(reachable));
  basis.tabular_ = true;
  return basis;
}

StageFeatureBasis StageFeatureBasis::offset_tabular(int num_states, std::vector<std::vector<int>> reachable) {
  std::vector<Eigen::MatrixXd> features;
  for (const auto& stage : reachable) {
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(stage.size()), num_states);
    for (std::size_t i = 0; i < stage.size(); ++i) {
      f(0, stage[i]) = 1.0;
      if (i > 0) f(static_cast<Eigen::Index>(i), stage[i]) = 1.0;
    }
    features.push_back(std::move(f));
  }
  return StageFeatureBasis(std::move(features), std::move(reachable));
}

Eigen::MatrixXd StageFeatureBasis::stage_matrix(int h) const {
  const auto& states = reachable_.at(h);
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(states.size()), dim(h));
  for (std::size_t i = 0; i < states.size(); ++i)
    phi.row(static_cast<Eigen::Index>(i)) = features_[h].col(states[i]).transpose();
  return phi;
}

std::string BasisReport::summary() const {
  if (ok()) return "valid";
  std::ostringstream os;
  for (const auto& p : problems) os << p << "\n";
  return os.str();
}

BasisReport validate_basis(const StageFeatureBasis& basis, const FiniteHorizonCMDP& model,
                           const NonStationaryPolicy& policy) {
  BasisReport report;
  auto flag = [&](int h, std::string msg) {
    report.problems.push_back("stage " + std::to_string(h) + ": " + std::move(msg));
    if (report.bad_stages.empty() || report.bad_stages.back() != h) report.bad_stages.push_back(h);
  };
  if (basis.horizon() != model.horizon() || policy.horizon() != model.horizon()) {
    report.problems.push_back("horizon mismatch between basis, policy and model");
    return report;
  }
  if (basis.num_states() != model.num_states()) {
    report.problems.push_back("basis covers a different number of states than the model");
    return report;
  }
  const auto reachable = forward_reachable_sets(model);
  for (int h = 0; h <= basis.horizon(); ++h) {
    auto mine = basis.reachable(h);
    std::sort(mine.begin(), mine.end());
    if (mine != reachable[h]) flag(h, "reachable set differs from the model's");
    const auto size = static_cast<int>(basis.reachable(h).size());
    if (basis.dim(h) > size) {
      flag(h, "x_h = " + std::to_string(basis.dim(h)) + " exceeds |S_h| = " + std::to_string(size));
      continue;
    }
    if (basis.dim(h) == 0) continue;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(basis.stage_matrix(h));
    const auto& sv = svd.singularValues();
    if (sv.size() < basis.dim(h) || sv.minCoeff() <= kRankTolerance)
      flag(h, "Phi_h is rank deficient (smallest singular value " +
                  std::to_string(sv.size() ? sv.minCoeff() : 0.0) + ")");
  }
  return report;
}

CriticState CriticState::zeros(const StageFeatureBasis& basis, int num_constraints) {
  CriticState c;
  for (int h = 0; h <= basis.horizon(); ++h) c.v.push_back(Eigen::VectorXd::Zero(basis.dim(h)));
  c.w.assign(num_constraints, c.v);
  return c;
}

bool CriticState::finite() const {
  for (const auto& x : v)
    if (!x.allFinite()) return false;
  for (const auto& k : w)
    for (const auto& x : k)
      if (!x.allFinite()) return false;
  return true;
}

double td_error_lagrangian(const CriticState& critic, const StageFeatureBasis& basis, const Environment& env,
                           std::span<const double> lambda, int h, int s, int a, int next) {
  if (h < 0 || h >= env.horizon()) throw std::out_of_range("td_error_lagrangian: stage out of range");
  return lagrangian_cost(env, lambda, h, s, a, next) + basis.value(h + 1, next, critic.v[h + 1]) -
         basis.value(h, s, critic.v[h]);
}

double td_error_constraint(const CriticState& critic, const StageFeatureBasis& basis, const Environment& env,
                           int k, int h, int s, int a, int next) {
  if (k < 0 || k >= env.num_constraints()) throw std::out_of_range("td_error_constraint: constraint out of range");
  if (h < 0 || h >= env.horizon()) throw std::out_of_range("td_error_constraint: stage out of range");
  return env.constraint_cost(k, h, s, a, next) + basis.value(h + 1, next, critic.w[k][h + 1]) -
         basis.value(h, s, critic.w[k][h]);
}

namespace {

// Shared TD sweep for both critic kinds. `stage_cost(h)` is the realized
// single-stage cost of the episode at stage h, `terminal_cost` the realized
// terminal target.
template <typename StageCost>
std::vector<double> td_sweep(std::vector<Eigen::VectorXd>& weights, const StageFeatureBasis& basis,
                             const Episode& episode, StageCost stage_cost, double terminal_cost, double step,
                             CriticSweep sweep) {
  const int horizon = episode.horizon();
  if (basis.horizon() != horizon || static_cast<int>(weights.size()) != horizon + 1)
    throw std::invalid_argument("critic update: episode length does not match the basis horizon");
  for (int h = 0; h <= horizon; ++h)
    if (weights[h].size() != basis.dim(h)) throw std::invalid_argument("critic update: weight dimension mismatch");

  const auto& st = episode.states;
  std::vector<double> errors(horizon + 1);
  if (sweep == CriticSweep::kSynchronous) {
    for (int h = 0; h < horizon; ++h)
      errors[h] = stage_cost(h) + basis.value(h + 1, st[h + 1], weights[h + 1]) - basis.value(h, st[h], weights[h]);
    errors[horizon] = terminal_cost - basis.value(horizon, st[horizon], weights[horizon]);
    if (step != 0.0)
      for (int h = 0; h <= horizon; ++h) weights[h] += (step * errors[h]) * basis.phi(h, st[h]);
    return errors;
  }
  errors[horizon] = terminal_cost - basis.value(horizon, st[horizon], weights[horizon]);
  weights[horizon] += (step * errors[horizon]) * basis.phi(horizon, st[horizon]);
  for (int h = horizon - 1; h >= 0; --h) {
    errors[h] = stage_cost(h) + basis.value(h + 1, st[h + 1], weights[h + 1]) - basis.value(h, st[h], weights[h]);
    weights[h] += (step * errors[h]) * basis.phi(h, st[h]);
  }
  return errors;
}

}  // namespace

std::vector<double> update_lagrangian_critic(CriticState& critic, const StageFeatureBasis& basis,
                                             const Environment& env, const Episode& episode,
                                             std::span<const double> lambda, double step, CriticSweep sweep) {
  const int m = env.num_constraints();
  if (static_cast<int>(lambda.size()) != m) throw std::invalid_argument("critic update: lambda has wrong length");
  auto stage_cost = [&](int h) {
    double c = episode.rewards[h];
    for (int k = 0; k < m; ++k) c += lambda[k] * episode.constraint_costs[k][h];
    return c;
  };
  const auto alpha = env.thresholds();
  double terminal = episode.terminal_reward;
  for (int k = 0; k < m; ++k) terminal += lambda[k] * (episode.terminal_constraint_costs[k] - alpha[k]);
  return td_sweep(critic.v, basis, episode, stage_cost, terminal, step, sweep);
}

std::vector<double> update_constraint_critic(CriticState& critic, const StageFeatureBasis& basis,
                                             const Environment& env, const Episode& episode, int k, double step,
                                             CriticSweep sweep) {
  if (k < 0 || k >= critic.num_constraints() || k >= env.num_constraints())
    throw std::out_of_range("constraint critic update: constraint out of range");
  const auto& costs = episode.constraint_costs[k];
  const double terminal = episode.terminal_constraint_costs[k] - env.thresholds()[k];
  return td_sweep(critic.w[k], basis, episode, [&](int h) { return costs[h]; }, terminal, step, sweep);
}

namespace {

// Solves (Phi' D Phi) x = rhs with a rank-revealing factorization.
Eigen::VectorXd solve_normal(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs, int h) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < gram.cols())
    throw std::runtime_error("fixed_points: Phi_h' D_h Phi_h is singular at stage " + std::to_string(h));
  return qr.solve(rhs);
}

struct StageSystem {
  Eigen::MatrixXd phi;       // |S_h| x x_h
  Eigen::VectorXd d;         // d_h on S_h
  Eigen::MatrixXd transfer;  // P_h restricted to S_h x S_{h+1}
};

// Backward projected recursion shared by Lambda and Xi^(k).
template <typename TerminalVec, typename StageVec>
std::vector<Eigen::VectorXd> solve_backward(const StageFeatureBasis& basis, const std::vector<StageSystem>& sys,
                                            TerminalVec terminal, StageVec stage) {
  const int horizon = basis.horizon();
  std::vector<Eigen::VectorXd> out(horizon + 1);
  {
    const auto& S = sys[horizon];
    const Eigen::MatrixXd weighted = S.phi.transpose() * S.d.asDiagonal();
    out[horizon] = solve_normal(weighted * S.phi, weighted * terminal(), horizon);
  }
  for (int h = horizon - 1; h >= 0; --h) {
    const auto& S = sys[h];
    const Eigen::MatrixXd weighted = S.phi.transpose() * S.d.asDiagonal();
    const Eigen::VectorXd target = S.transfer * (sys[h + 1].phi * out[h + 1]) + stage(h);
    out[h] = solve_normal(weighted * S.phi, weighted * target, h);
  }
  return out;
}

}  // namespace

CriticFixedPoints fixed_points(const StageFeatureBasis& basis, const FiniteHorizonCMDP& model,
                               const NonStationaryPolicy& policy, std::span<const double> lambda) {
  const int horizon = model.horizon();
  if (basis.horizon() != horizon || policy.horizon() != horizon)
    throw std::invalid_argument("fixed_points: horizon mismatch");
  if (static_cast<int>(lambda.size()) != model.num_constraints())
    throw std::invalid_argument("fixed_points: lambda has wrong length");
  const auto rule = decision_rule(policy);
  const auto occ = occupation_measures(model, rule);
  const int m = model.num_constraints();
  const auto alpha = model.thresholds();

  std::vector<StageSystem> sys(horizon + 1);
  for (int h = 0; h <= horizon; ++h) {
    const auto& states = basis.reachable(h);
    sys[h].phi = basis.stage_matrix(h);
    sys[h].d.resize(static_cast<Eigen::Index>(states.size()));
    for (std::size_t i = 0; i < states.size(); ++i) sys[h].d[static_cast<Eigen::Index>(i)] = occ.d[h][states[i]];
    if (h == horizon) continue;
    const auto& next = basis.reachable(h + 1);
    sys[h].transfer = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(states.size()),
                                            static_cast<Eigen::Index>(next.size()));
    for (std::size_t i = 0; i < states.size(); ++i)
      for (std::size_t j = 0; j < next.size(); ++j) {
        double p = 0.0;
        for (int a = 0; a < model.num_actions(); ++a)
          p += rule[h](states[i], a) * model.transition(h, states[i], a, next[j]);
        sys[h].transfer(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = p;
      }
  }

  // Expected single-stage cost vectors over S_h under the policy.
  auto expected_stage = [&](int h, auto cost) {
    const auto& states = basis.reachable(h);
    Eigen::VectorXd c(static_cast<Eigen::Index>(states.size()));
    for (std::size_t i = 0; i < states.size(); ++i) {
      const int s = states[i];
      double acc = 0.0;
      for (int a = 0; a < model.num_actions(); ++a) {
        const auto row = model.kernel_row(h, s, a);
        double inner = 0.0;
        for (int t = 0; t < model.num_states(); ++t)
          if (row[t] != 0.0) inner += row[t] * cost(h, s, a, t);
        acc += rule[h](s, a) * inner;
      }
      c[static_cast<Eigen::Index>(i)] = acc;
    }
    return c;
  };
  auto terminal_vec = [&](auto cost) {
    const auto& states = basis.reachable(horizon);
    Eigen::VectorXd c(static_cast<Eigen::Index>(states.size()));
    for (std::size_t i = 0; i < states.size(); ++i) c[static_cast<Eigen::Index>(i)] = cost(states[i]);
    return c;
  };

  CriticFixedPoints fp;
  fp.lagrangian = solve_backward(
      basis, sys, [&] { return terminal_vec([&](int s) { return terminal_lagrangian_cost(model, lambda, s); }); },
      [&](int h) {
        return expected_stage(h, [&](int hh, int s, int a, int t) { return lagrangian_cost(model, lambda, hh, s, a, t); });
      });
  for (int k = 0; k < m; ++k) {
    fp.constraints.push_back(solve_backward(
        basis, sys,
        [&] { return terminal_vec([&](int s) { return model.terminal_constraint_cost(k, s) - alpha[k]; }); },
        [&](int h) {
          return expected_stage(h, [&](int hh, int s, int a, int t) { return model.constraint_cost(k, hh, s, a, t); });
        }));
  }
  return fp;
}

double FixedPointResiduals::max() const {
  double m = 0.0;
  for (double r : lagrangian) m = std::max(m, r);
  for (const auto& k : constraints)
    for (double r : k) m = std::max(m, r);
  return m;
}

namespace {

template <typename StageCost, typename TerminalCost>
std::vector<double> residual_norms(const StageFeatureBasis& basis, const FiniteHorizonCMDP& model,
                                   const DecisionRule& rule, const OccupationMeasures& occ,
                                   const std::vector<Eigen::VectorXd>& weights, StageCost stage_cost,
                                   TerminalCost terminal_cost) {
  const int horizon = model.horizon();
  std::vector<double> norms(horizon + 1);
  for (int h = 0; h < horizon; ++h) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(basis.dim(h));
    for (int s = 0; s < model.num_states(); ++s) {
      const double d = occ.d[h][s];
      if (d == 0.0) continue;
      const double here = basis.value(h, s, weights[h]);
      double expected = 0.0;
      for (int a = 0; a < model.num_actions(); ++a) {
        const auto row = model.kernel_row(h, s, a);
        for (int t = 0; t < model.num_states(); ++t)
          if (row[t] != 0.0)
            expected += rule[h](s, a) * row[t] * (stage_cost(h, s, a, t) + basis.value(h + 1, t, weights[h + 1]) - here);
      }
      f += d * expected * basis.phi(h, s);
    }
    norms[h] = f.norm();
  }
  Eigen::VectorXd f = Eigen::VectorXd::Zero(basis.dim(horizon));
  for (int s = 0; s < model.num_states(); ++s) {
    const double d = occ.d[horizon][s];
    if (d == 0.0) continue;
    f += d * (terminal_cost(s) - basis.value(horizon, s, weights[horizon])) * basis.phi(horizon, s);
  }
  norms[horizon] = f.norm();
  return norms;
}

}  // namespace

FixedPointResiduals fixed_point_residuals(const StageFeatureBasis& basis, const FiniteHorizonCMDP& model,
                                          const NonStationaryPolicy& policy, std::span<const double> lambda,
                                          const CriticFixedPoints& weights) {
  const auto rule = decision_rule(policy);
  const auto occ = occupation_measures(model, rule);
  const auto alpha = model.thresholds();
  FixedPointResiduals out;
  out.lagrangian = residual_norms(
      basis, model, rule, occ, weights.lagrangian,
      [&](int h, int s, int a, int t) { return lagrangian_cost(model, lambda, h, s, a, t); },
      [&](int s) { return terminal_lagrangian_cost(model, lambda, s); });
  for (int k = 0; k < model.num_constraints(); ++k)
    out.constraints.push_back(residual_norms(
        basis, model, rule, occ, weights.constraints.at(k),
        [&](int h, int s, int a, int t) { return model.constraint_cost(k, h, s, a, t); },
        [&](int s) { return model.terminal_constraint_cost(k, s) - alpha[k]; }));
  return out;
}

}  // namespace fhcac
