#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "fhcac/policy.hpp"
#include "oracles.hpp"

namespace fhcac {
namespace {

std::vector<std::vector<int>> all_states(int S, int H) {
  std::vector<std::vector<int>> r(H + 1);
  for (auto& v : r)
    for (int s = 0; s < S; ++s) v.push_back(s);
  return r;
}

// Slot of x_h(s, a) in the tabular parameter vector.
Eigen::Index slot(const NonStationaryPolicy& p, int h, int s, int a) {
  Eigen::Index i;
  p.features().feature(h, s, a).maxCoeff(&i);
  return i;
}

NonStationaryPolicy dense_random_policy(Rng& rng, int S, int A, int H, int dim, double tau) {
  std::vector<Eigen::MatrixXd> f;
  for (int h = 0; h < H; ++h) {
    Eigen::MatrixXd m(S * A, dim);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 2 * rng.uniform() - 1;
    f.push_back(m);
  }
  NonStationaryPolicy p(std::make_shared<PreferenceFeatures>(PreferenceFeatures::dense(S, A, f)), tau);
  oracle::randomize(p, rng);
  return p;
}

TEST(ActionDistribution, ZeroParametersAreUniform) {
  const auto p = make_tabular_policy(3, 4, all_states(3, 2), 2);
  for (int h = 0; h < 2; ++h)
    for (int s = 0; s < 3; ++s)
      for (double x : p.action_distribution(h, s)) EXPECT_DOUBLE_EQ(x, 0.25);
}

TEST(ActionDistribution, ClosedFormSoftmax) {
  auto p = make_tabular_policy(1, 2, all_states(1, 1), 1);
  Eigen::VectorXd theta = p.params(0);
  theta[slot(p, 0, 0, 0)] = std::log(2.0);
  p.set_params(0, theta);
  const auto mu = p.action_distribution(0, 0);
  EXPECT_NEAR(mu[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(mu[1], 1.0 / 3.0, 1e-15);
}

TEST(ActionDistribution, TemperatureScalesPreferences) {
  auto p = make_tabular_policy(1, 2, all_states(1, 1), 1, 2.0);
  Eigen::VectorXd theta = p.params(0);
  theta[slot(p, 0, 0, 0)] = 2 * std::log(2.0);
  p.set_params(0, theta);
  EXPECT_NEAR(p.action_distribution(0, 0)[0], 2.0 / 3.0, 1e-15);
}

TEST(ActionDistribution, StrictlyPositiveAndNormalizedOnTheBox) {
  Rng rng(4);
  auto p = make_tabular_policy(3, 5, all_states(3, 3), 3);
  for (int trial = 0; trial < 20; ++trial) {
    for (int h = 0; h < 3; ++h) {
      Eigen::VectorXd theta = p.params(h);
      for (auto& x : theta) x = rng.uniform() < 0.5 ? -10.0 : 10.0;
      p.set_params(h, theta);
    }
    for (int h = 0; h < 3; ++h)
      for (int s = 0; s < 3; ++s) {
        const auto mu = p.action_distribution(h, s);
        EXPECT_GT(mu.minCoeff(), 0.0);
        EXPECT_NEAR(mu.sum(), 1.0, 1e-12);
      }
  }
}

TEST(ActionDistribution, ShiftInvariance) {
  Rng rng(5);
  auto p = make_tabular_policy(2, 3, all_states(2, 1), 1);
  oracle::randomize(p, rng, 3.0);
  const auto before = p.action_distribution(0, 1);
  Eigen::VectorXd theta = p.params(0);
  for (int a = 0; a < 3; ++a) theta[slot(p, 0, 1, a)] += 1.7;
  p.set_params(0, theta);
  EXPECT_LT((p.action_distribution(0, 1) - before).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ActionDistribution, StageOutOfRangeThrows) {
  const auto p = make_tabular_policy(2, 2, all_states(2, 2), 2);
  EXPECT_THROW(p.action_distribution(2, 0), std::out_of_range);
  EXPECT_THROW(p.score(-1, 0, 0), std::out_of_range);
}

TEST(ActionDistribution, UnreachableStatesAreUniform) {
  std::vector<std::vector<int>> reach{{0}, {1}};
  auto p = make_tabular_policy(2, 2, reach, 1);
  EXPECT_EQ(p.features().dim(0), 2);
  Eigen::VectorXd theta = p.params(0);
  theta.setConstant(5.0);
  theta[0] = -5.0;
  p.set_params(0, theta);
  EXPECT_DOUBLE_EQ(p.action_distribution(0, 1)[0], 0.5);
}

TEST(SampleAction, SaturatedPreferenceIsSampled) {
  auto p = make_tabular_policy(1, 3, all_states(1, 1), 1);
  Eigen::VectorXd theta = p.params(0);
  theta[slot(p, 0, 0, 2)] = 10.0;
  p.set_params(0, theta);
  Rng rng(6);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) hits += p.sample_action(rng, 0, 0) == 2;
  EXPECT_GE(hits, 9900);
}

TEST(SampleAction, UniformFrequencies) {
  const auto p = make_tabular_policy(1, 4, all_states(1, 1), 1);
  Rng rng(7);
  const int n = 40000;
  std::vector<int> counts(4, 0);
  for (int i = 0; i < n; ++i) ++counts[p.sample_action(rng, 0, 0)];
  for (int c : counts) EXPECT_LT(std::abs(c / double(n) - 0.25), 3 * std::sqrt(0.25 * 0.75 / n));
}

TEST(SampleAction, SameSeedSameDraws) {
  Rng init(8);
  auto p = make_tabular_policy(3, 3, all_states(3, 2), 2);
  oracle::randomize(p, init);
  Rng a(1), b(1);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(p.sample_action(a, i % 2, i % 3), p.sample_action(b, i % 2, i % 3));
}

TEST(Score, ExpectationIsZero) {
  Rng rng(9);
  auto p = make_tabular_policy(3, 4, all_states(3, 2), 2, 0.7);
  oracle::randomize(p, rng, 2.0);
  for (int h = 0; h < 2; ++h)
    for (int s = 0; s < 3; ++s) {
      const auto mu = p.action_distribution(h, s);
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(p.params(h).size());
      for (int a = 0; a < 4; ++a) acc += mu[a] * p.score(h, s, a);
      EXPECT_LT(acc.cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(Score, UniformTwoActionTabular) {
  const auto p = make_tabular_policy(2, 2, all_states(2, 1), 1);
  const Eigen::VectorXd psi = p.score(0, 1, 0);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(psi.size());
  expected[slot(p, 0, 1, 0)] = 0.5;
  expected[slot(p, 0, 1, 1)] = -0.5;
  EXPECT_LT((psi - expected).cwiseAbs().maxCoeff(), 1e-15);
}

void check_score_by_finite_differences(NonStationaryPolicy p, Rng& rng) {
  const double eps = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const int h = rng.uniform_int(p.horizon());
    const int s = rng.uniform_int(p.num_states());
    const int a = rng.uniform_int(p.num_actions());
    const Eigen::VectorXd theta = p.params(h);
    const Eigen::VectorXd psi = p.score(h, s, a);
    NonStationaryPolicy q = p;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Eigen::VectorXd t = theta;
      t[i] += eps;
      q.set_params(h, t);
      const double up = q.log_probability(h, s, a);
      t[i] -= 2 * eps;
      q.set_params(h, t);
      const double down = q.log_probability(h, s, a);
      EXPECT_NEAR((up - down) / (2 * eps), psi[i], 1e-6);
    }
  }
}

TEST(Score, MatchesFiniteDifferencesTabular) {
  Rng rng(10);
  auto p = make_tabular_policy(3, 3, all_states(3, 3), 3, 1.3);
  oracle::randomize(p, rng, 2.0);
  check_score_by_finite_differences(p, rng);
}

TEST(Score, MatchesFiniteDifferencesDense) {
  Rng rng(11);
  check_score_by_finite_differences(dense_random_policy(rng, 3, 4, 2, 5, 0.8), rng);
}

TEST(Project, ClampsAndKeepsInterior) {
  const auto p = make_tabular_policy(1, 3, all_states(1, 1), 1);
  Eigen::VectorXd t(3);
  t << 12.0, -3.0, -11.0;
  const auto q = p.project_params(t);
  EXPECT_EQ(q[0], 10.0);
  EXPECT_EQ(q[1], -3.0);
  EXPECT_EQ(q[2], -10.0);
  EXPECT_EQ(p.project_params(q), q);
}

TEST(Project, NonExpansiveInSupNorm) {
  Rng rng(12);
  const auto p = make_tabular_policy(2, 3, all_states(2, 1), 1);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd x(6), y(6);
    for (int j = 0; j < 6; ++j) x[j] = 40 * rng.uniform() - 20, y[j] = 40 * rng.uniform() - 20;
    EXPECT_LE((p.project_params(x) - p.project_params(y)).cwiseAbs().maxCoeff(),
              (x - y).cwiseAbs().maxCoeff() + 1e-15);
  }
}

TEST(Project, SetParamsReportsClampAndStaysInBox) {
  auto p = make_tabular_policy(1, 2, all_states(1, 1), 1, 1.0, 2.0);
  Eigen::VectorXd t(2);
  t << 1.0, -1.5;
  EXPECT_FALSE(p.set_params(0, t));
  t << 3.0, 0.0;
  EXPECT_TRUE(p.set_params(0, t));
  EXPECT_EQ(p.params(0)[0], 2.0);
  EXPECT_TRUE(p.ascend_score(0, 0, 0, 100.0));
  EXPECT_LE(p.params(0).cwiseAbs().maxCoeff(), 2.0);
}

TEST(Ascend, MovesAlongScore) {
  auto p = make_tabular_policy(2, 2, all_states(2, 1), 1);
  const Eigen::VectorXd psi = p.score(0, 1, 1);
  p.ascend_score(0, 1, 1, 0.3);
  EXPECT_LT((p.params(0) - 0.3 * psi).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Policy, RejectsBadConstruction) {
  auto f = std::make_shared<PreferenceFeatures>(PreferenceFeatures::tabular(2, 2, all_states(2, 1), 1));
  EXPECT_THROW(NonStationaryPolicy(f, 0.0), std::invalid_argument);
  EXPECT_THROW(NonStationaryPolicy(f, 1.0, -1.0), std::invalid_argument);
  NonStationaryPolicy p(f);
  EXPECT_THROW(p.set_params(0, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

}  // namespace
}  // namespace fhcac
