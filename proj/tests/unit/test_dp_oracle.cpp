#include <cmath>

#include <gtest/gtest.h>

#include "fhcac/critic.hpp"
#include "fhcac/dp_oracle.hpp"
#include "oracles.hpp"

namespace fhcac {
namespace {

NonStationaryPolicy random_policy(Rng& rng, const FiniteHorizonCMDP& m, double scale = 1.0) {
  auto p = make_tabular_policy(m.num_states(), m.num_actions(), m.reachable_sets(), m.horizon());
  oracle::randomize(p, rng, scale);
  return p;
}

std::vector<double> random_lambda(Rng& rng, int m) {
  std::vector<double> l(m);
  for (auto& x : l) x = -3.0 * rng.uniform();
  return l;
}

TEST(BackwardInduction, SingleStateSumOfRewards) {
  auto d = CmdpData::zeros(1, 1, 1, 0);
  d.p(0, 0, 0, 0) = 1.0;
  d.r(0, 0, 0, 0) = 2.0;
  d.terminal_rewards = {3.0};
  d.initial_distribution = {1.0};
  FiniteHorizonCMDP m(d);
  const auto sol = backward_induction(m, make_tabular_policy(1, 1, m.reachable_sets(), 1), {});
  EXPECT_DOUBLE_EQ(sol.V[0][0], 5.0);
  EXPECT_DOUBLE_EQ(sol.J, 5.0);
}

FiniteHorizonCMDP unit_cost_model(Rng& rng, int H) {
  auto d = oracle::random_data(rng, {.num_states = 3, .num_actions = 2, .horizon = H, .num_constraints = 1});
  std::fill(d.rewards.begin(), d.rewards.end(), 0.0);
  std::fill(d.terminal_rewards.begin(), d.terminal_rewards.end(), 0.0);
  std::fill(d.constraint_costs[0].begin(), d.constraint_costs[0].end(), 1.0);
  std::fill(d.terminal_constraint_costs[0].begin(), d.terminal_constraint_costs[0].end(), 1.0);
  d.thresholds = {0.0};
  return FiniteHorizonCMDP(d);
}

TEST(BackwardInduction, CountingConstraintCosts) {
  Rng rng(1);
  const auto m = unit_cost_model(rng, 4);
  const auto p = random_policy(rng, m);
  const auto sol = backward_induction(m, p, std::vector<double>{0.0});
  for (int s = 0; s < 3; ++s) EXPECT_DOUBLE_EQ(sol.W[0][0][s], 5.0);
  const auto ev = evaluate_policy(m, p);
  EXPECT_DOUBLE_EQ(ev.J, 0.0);
  EXPECT_NEAR(ev.constraint_values[0], 5.0, 1e-12);
}

TEST(BackwardInduction, Invariants) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = oracle::random_model(
        rng, {.num_states = 4, .num_actions = 3, .horizon = 4, .num_constraints = 2, .zero_probability = 0.3});
    const auto p = random_policy(rng, m, 2.0);
    const auto lambda = random_lambda(rng, 2);
    const auto sol = backward_induction(m, p, lambda);
    for (int h = 0; h < 4; ++h)
      for (int s = 0; s < 4; ++s) EXPECT_NEAR(sol.V[h][s], p.action_distribution(h, s).dot(sol.Q[h].row(s)), 1e-12);
    for (int h = 0; h <= 4; ++h) EXPECT_NEAR(sol.d[h].sum(), 1.0, 1e-12);
    double beta_v = 0.0;
    for (int s = 0; s < 4; ++s) beta_v += m.initial_distribution()[s] * sol.V[0][s];
    EXPECT_NEAR(sol.lagrangian, beta_v, 1e-10);
    double l = sol.J;
    for (int k = 0; k < 2; ++k) l += lambda[k] * (sol.constraint_values[k] - m.thresholds()[k]);
    EXPECT_NEAR(l, beta_v, 1e-10);
    EXPECT_NEAR(lagrangian_value(m, p, lambda), beta_v, 1e-10);
  }
}

TEST(BackwardInduction, MatchesEnumeration) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = oracle::random_model(rng, {.num_states = 3, .num_actions = 2, .horizon = 3, .num_constraints = 2});
    const auto p = random_policy(rng, m, 2.0);
    const auto lambda = random_lambda(rng, 2);
    const auto e = oracle::enumerate_trajectories(m, oracle::probabilities_of(p), lambda);
    const auto sol = backward_induction(m, p, lambda);
    EXPECT_NEAR(sol.J, e.J, 1e-12);
    EXPECT_NEAR(sol.lagrangian, e.L, 1e-12);
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(sol.constraint_values[k], e.S[k], 1e-12);
  }
}

TEST(BackwardInduction, MatchesMonteCarlo) {
  Rng rng(4);
  const auto m = oracle::random_model(rng, {.num_states = 4, .num_actions = 3, .horizon = 5, .num_constraints = 1});
  const auto p = random_policy(rng, m);
  const auto ev = evaluate_policy(m, p);
  Rng sample(5);
  const auto mc = oracle::monte_carlo(m, p, sample, 1000000, [](const Episode& e) { return e.total_reward(); });
  EXPECT_LT(std::abs(mc.mean - ev.J), 3 * mc.standard_error);
  Rng sample2(6);
  const auto mcs =
      oracle::monte_carlo(m, p, sample2, 200000, [](const Episode& e) { return e.total_constraint_cost(0); });
  EXPECT_LT(std::abs(mcs.mean - ev.constraint_values[0]), 3 * mcs.standard_error);
}

TEST(OccupationMeasures, InitialStageIsBeta) {
  Rng rng(7);
  const auto m = oracle::random_model(rng, {.num_states = 4, .num_actions = 2, .horizon = 2});
  const auto occ = occupation_measures(m, random_policy(rng, m));
  for (int s = 0; s < 4; ++s) EXPECT_EQ(occ.d[0][s], m.initial_distribution()[s]);
}

TEST(OccupationMeasures, DeterministicChain) {
  auto d = CmdpData::zeros(2, 1, 1, 0);
  d.p(0, 0, 0, 1) = 1.0;
  d.p(0, 1, 0, 1) = 1.0;
  d.initial_distribution = {1.0, 0.0};
  FiniteHorizonCMDP m(d);
  const auto occ = occupation_measures(m, make_tabular_policy(2, 1, m.reachable_sets(), 1));
  EXPECT_EQ(occ.d[1][0], 0.0);
  EXPECT_EQ(occ.d[1][1], 1.0);
  EXPECT_EQ(occ.reachable[0], std::vector<int>{0});
  EXPECT_EQ(occ.reachable[1], std::vector<int>{1});
}

TEST(OccupationMeasures, MatchEnumerationAndReachableSets) {
  Rng rng(8);
  for (int H = 0; H <= 4; ++H) {
    const auto m = oracle::random_model(
        rng, {.num_states = 4, .num_actions = 2, .horizon = H, .zero_probability = 0.4, .random_initial = false});
    const auto p = random_policy(rng, m);
    const auto occ = occupation_measures(m, p);
    const auto e = oracle::enumerate_trajectories(m, oracle::probabilities_of(p));
    for (int h = 0; h <= H; ++h) {
      EXPECT_LT((occ.d[h] - e.d[h]).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_EQ(occ.reachable[h], forward_reachable_sets(m)[h]);
    }
  }
}

TEST(ExactGradient, ZeroAdvantageGivesZero) {
  Rng rng(9);
  auto d = oracle::random_data(rng, {.num_states = 3, .num_actions = 3, .horizon = 3, .num_constraints = 1});
  for (int h = 0; h < 3; ++h)
    for (int s = 0; s < 3; ++s)
      for (int a = 1; a < 3; ++a)
        for (int n = 0; n < 3; ++n) {
          d.p(h, s, a, n) = d.p(h, s, 0, n);
          d.r(h, s, a, n) = d.r(h, s, 0, n);
          d.g(0, h, s, a, n) = d.g(0, h, s, 0, n);
        }
  FiniteHorizonCMDP m(d);
  const auto p = random_policy(rng, m, 2.0);
  const std::vector<double> lambda{-1.3};
  for (const auto& g : exact_gradient(m, p, lambda)) EXPECT_LT(g.cwiseAbs().maxCoeff(), 1e-12);
  const auto basis = StageFeatureBasis::tabular(3, m.reachable_sets());
  for (const auto& g : approximate_gradient(m, p, lambda, basis)) EXPECT_LT(g.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ExactGradient, MatchesEnumeratedFiniteDifferences) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const int S = 2 + rng.uniform_int(3), A = 2 + rng.uniform_int(2), H = 1 + rng.uniform_int(4),
              M = rng.uniform_int(3);
    const auto m = oracle::random_model(rng, {.num_states = S, .num_actions = A, .horizon = H, .num_constraints = M});
    const auto p = random_policy(rng, m, 2.0);
    const auto lambda = random_lambda(rng, M);
    const auto cmp = compare_gradients(exact_gradient(m, p, lambda), oracle::enumerated_fd_gradient(m, p, lambda));
    EXPECT_LT(cmp.max_relative_error, 1e-5) << "trial " << trial;
    const auto own = compare_gradients(exact_gradient(m, p, lambda), finite_difference_gradient(m, p, lambda));
    EXPECT_LT(own.max_relative_error, 1e-5) << "trial " << trial;
  }
}

TEST(ExactGradient, BaselineInvariance) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = oracle::random_model(rng, {.num_states = 4, .num_actions = 3, .horizon = 3, .num_constraints = 2});
    const auto p = random_policy(rng, m, 2.0);
    const auto lambda = random_lambda(rng, 2);
    const auto sol = backward_induction(m, p, lambda);
    StageVectors v(sol.V.begin(), sol.V.begin() + 3), noise;
    for (int h = 0; h < 3; ++h) noise.push_back(Eigen::VectorXd::Random(4) * 50.0);
    const auto plain = exact_gradient(m, p, lambda);
    EXPECT_LT(compare_gradients(plain, exact_gradient(m, p, lambda, v)).max_absolute_error, 1e-10);
    EXPECT_LT(compare_gradients(plain, exact_gradient(m, p, lambda, noise)).max_absolute_error, 1e-10);
  }
}

TEST(ExactGradient, DensePolicyMatchesFiniteDifferences) {
  Rng rng(12);
  const auto m = oracle::random_model(rng, {.num_states = 3, .num_actions = 2, .horizon = 3, .num_constraints = 1});
  std::vector<Eigen::MatrixXd> f;
  for (int h = 0; h < 3; ++h) f.push_back(Eigen::MatrixXd::Random(6, 4));
  NonStationaryPolicy p(std::make_shared<PreferenceFeatures>(PreferenceFeatures::dense(3, 2, f)), 0.8);
  oracle::randomize(p, rng);
  const std::vector<double> lambda{-0.6};
  const auto cmp = compare_gradients(exact_gradient(m, p, lambda), oracle::enumerated_fd_gradient(m, p, lambda));
  EXPECT_LT(cmp.max_relative_error, 1e-5);
}

TEST(ApproximateGradient, TabularEqualsExact) {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = oracle::random_model(
        rng, {.num_states = 4, .num_actions = 3, .horizon = 3, .num_constraints = 1, .zero_probability = 0.3});
    const auto p = random_policy(rng, m, 2.0);
    const auto lambda = random_lambda(rng, 1);
    const auto basis = StageFeatureBasis::tabular(4, m.reachable_sets());
    const auto cmp = compare_gradients(exact_gradient(m, p, lambda), approximate_gradient(m, p, lambda, basis));
    EXPECT_LT(cmp.max_absolute_error, 1e-10);
  }
}

TEST(ApproximateGradient, RankDeficientBasisIsCaughtFirst) {
  Rng rng(14);
  const auto m = oracle::random_model(rng, {.num_states = 3, .num_actions = 2, .horizon = 2});
  const auto p = random_policy(rng, m);
  std::vector<Eigen::MatrixXd> f(3, Eigen::MatrixXd::Ones(2, 3));
  const StageFeatureBasis basis(f, m.reachable_sets());
  EXPECT_FALSE(validate_basis(basis, m, p).ok());
  EXPECT_THROW(approximate_gradient(m, p, std::vector<double>{0.0}, basis), std::runtime_error);
}

TEST(RelativeError, FloorAppliesNearZero) {
  EXPECT_NEAR(relative_error(1.0, 1.1), 0.1 / 1.1, 1e-15);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-12), 1e-12 / 1e-8);
}

TEST(EvaluatePolicy, ZeroRewards) {
  Rng rng(15);
  auto d = oracle::random_data(rng, {.num_states = 3, .num_actions = 2, .horizon = 3});
  std::fill(d.rewards.begin(), d.rewards.end(), 0.0);
  std::fill(d.terminal_rewards.begin(), d.terminal_rewards.end(), 0.0);
  FiniteHorizonCMDP m(d);
  EXPECT_EQ(evaluate_policy(m, random_policy(rng, m)).J, 0.0);
}

TEST(EvaluatePolicy, DeterministicRuleMatchesEnumeration) {
  Rng rng(16);
  const auto m = oracle::random_model(rng, {.num_states = 3, .num_actions = 3, .horizon = 3, .num_constraints = 1});
  DeterministicPolicy det(3, std::vector<int>(3));
  for (auto& stage : det)
    for (auto& a : stage) a = rng.uniform_int(3);
  const auto ev = evaluate_policy(m, decision_rule(det, 3));
  const auto e = oracle::enumerate_trajectories(m, oracle::probabilities_of(det, 3));
  EXPECT_NEAR(ev.J, e.J, 1e-12);
  EXPECT_NEAR(ev.constraint_values[0], e.S[0], 1e-12);
}

TEST(GreedyPolicy, MatchesExhaustiveSearchUnconstrained) {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = oracle::random_model(rng, {.num_states = 2, .num_actions = 2, .horizon = 3, .num_constraints = 0});
    const auto best = oracle::exhaustive_policy_search(m);
    const auto ev = evaluate_policy(m, decision_rule(greedy_policy(m, {}), 2));
    EXPECT_NEAR(ev.J, best.best_J, 1e-12);
  }
}

TEST(ConstrainedReference, SlackConstraintGivesUnconstrainedOptimum) {
  Rng rng(18);
  auto d = oracle::random_data(rng, {.num_states = 3, .num_actions = 2, .horizon = 3, .num_constraints = 1});
  d.thresholds = {1e6};
  FiniteHorizonCMDP m(d);
  const auto ref = constrained_reference(m);
  ASSERT_TRUE(ref.feasible);
  const auto ev = evaluate_policy(m, decision_rule(greedy_policy(m, std::vector<double>{0.0}), 2));
  EXPECT_NEAR(ref.best_J, ev.J, 1e-12);
  EXPECT_EQ(ref.best_lambda[0], 0.0);
}

TEST(ConstrainedReference, InfeasibleIsReported) {
  Rng rng(19);
  auto d = oracle::random_data(rng, {.num_states = 3, .num_actions = 2, .horizon = 3, .num_constraints = 1});
  for (auto& g : d.constraint_costs[0]) g += 0.5;
  d.thresholds = {1.0};
  FiniteHorizonCMDP m(d);
  const auto ref = constrained_reference(m);
  EXPECT_FALSE(ref.feasible);
  EXPECT_EQ(ref.grid.size(), 101u);
}

TEST(ConstrainedReference, AgreesWithExhaustiveSearch) {
  Rng rng(20);
  int compared = 0;
  for (int trial = 0; trial < 30; ++trial) {
    auto d = oracle::random_data(rng, {.num_states = 2, .num_actions = 2, .horizon = 2, .num_constraints = 1});
    FiniteHorizonCMDP probe(d);
    const auto lo = evaluate_policy(probe, decision_rule(greedy_policy(probe, std::vector<double>{-100.0}), 2));
    const auto hi = evaluate_policy(probe, decision_rule(greedy_policy(probe, std::vector<double>{0.0}), 2));
    d.thresholds = {lo.constraint_values[0] + 0.5 * (hi.constraint_values[0] - lo.constraint_values[0])};
    FiniteHorizonCMDP m(d);
    const auto ref = constrained_reference(m, {.grid_points = 2001});
    const auto best = oracle::exhaustive_policy_search(m);
    ASSERT_TRUE(best.feasible);
    if (!ref.feasible) continue;
    ++compared;
    // The Lagrangian sweep only sees greedy policies, so it can fall short of
    // the deterministic optimum but never exceed it.
    EXPECT_LE(ref.best_J, best.best_J + 1e-12);
    if (lo.constraint_values[0] <= m.thresholds()[0]) {
      EXPECT_GE(ref.best_J, lo.J - 1e-12);
    }
    EXPECT_LE(ref.best_constraint_values[0], m.thresholds()[0] + 1e-9);
  }
  EXPECT_GT(compared, 20);
}

TEST(ConstrainedReference, MonotoneConstraintAlongGrid) {
  Rng rng(21);
  const auto m = oracle::random_model(rng, {.num_states = 4, .num_actions = 3, .horizon = 4, .num_constraints = 1});
  const auto ref = constrained_reference(m, {.grid_points = 51});
  ASSERT_LT(ref.grid[1].lambda[0], ref.grid[0].lambda[0]);
  int violations = 0;
  for (std::size_t i = 1; i < ref.grid.size(); ++i)
    violations += ref.grid[i].constraint_values[0] > ref.grid[i - 1].constraint_values[0] + 1e-9;
  EXPECT_EQ(static_cast<int>(ref.monotonicity_notes.size()), violations);
}

}  // namespace
}  // namespace fhcac
