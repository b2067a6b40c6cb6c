#include <filesystem>

#include <gtest/gtest.h>

#include "fhcac/serialization.hpp"
#include "oracles.hpp"

namespace fhcac {
namespace {

// Through text, as on disk.
json reparse(const json& doc) { return json::parse(doc.dump(1)); }

TEST(Serialization, ModelRoundTripsBitExactly) {
  Rng rng(1);
  const auto m = oracle::random_model(rng, {.num_states = 3, .num_actions = 2, .horizon = 3, .num_constraints = 2});
  const auto back = model_from_json(reparse(model_to_json(m)));
  const auto &a = m.data(), &b = back.data();
  EXPECT_EQ(a.kernels, b.kernels);
  EXPECT_EQ(a.rewards, b.rewards);
  EXPECT_EQ(a.terminal_rewards, b.terminal_rewards);
  EXPECT_EQ(a.constraint_costs, b.constraint_costs);
  EXPECT_EQ(a.terminal_constraint_costs, b.terminal_constraint_costs);
  EXPECT_EQ(a.thresholds, b.thresholds);
  EXPECT_EQ(a.initial_distribution, b.initial_distribution);
}

TEST(Serialization, ModelErrors) {
  Rng rng(2);
  const auto m = oracle::random_model(rng, {.num_states = 2, .num_actions = 2, .horizon = 1});
  auto doc = model_to_json(m);
  doc["format"] = "something/else";
  EXPECT_THROW(model_from_json(doc), std::runtime_error);
  doc = model_to_json(m);
  doc["terminal_rewards"] = {1.0};
  EXPECT_THROW(model_from_json(doc), std::runtime_error);
  doc = model_to_json(m);
  doc["kernels"][0].erase(0);
  EXPECT_THROW(model_from_json(doc), std::runtime_error);
  doc = model_to_json(m);
  doc.erase("rewards");
  EXPECT_THROW(model_from_json(doc), std::exception);
}

TEST(Serialization, TabularPolicyRoundTrip) {
  Rng rng(3);
  auto p = make_tabular_policy(4, 3, {{0, 2}, {0, 1, 2, 3}, {1}}, 2, 0.7, 5.0);
  oracle::randomize(p, rng, 5.0);
  const auto q = policy_from_json(reparse(policy_to_json(p)));
  EXPECT_EQ(q.temperature(), 0.7);
  EXPECT_EQ(q.param_bound(), 5.0);
  EXPECT_EQ(q.features().tabular_states(), p.features().tabular_states());
  for (int h = 0; h < 2; ++h) EXPECT_EQ(q.params(h), p.params(h));
}

TEST(Serialization, DensePolicyRoundTrip) {
  Rng rng(4);
  std::vector<Eigen::MatrixXd> f;
  for (int h = 0; h < 2; ++h) {
    Eigen::MatrixXd x(6, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform() - 0.5;
    f.push_back(x);
  }
  NonStationaryPolicy p(std::make_shared<PreferenceFeatures>(PreferenceFeatures::dense(3, 2, f)));
  oracle::randomize(p, rng);
  const auto q = policy_from_json(reparse(policy_to_json(p)));
  ASSERT_EQ(q.features().kind(), PreferenceFeatures::Kind::kDense);
  for (int h = 0; h < 2; ++h) {
    EXPECT_EQ(q.features().dense_features()[h], f[h]);
    EXPECT_EQ(q.params(h), p.params(h));
  }
  auto doc = policy_to_json(p);
  doc["params"][0].push_back(1.0);
  EXPECT_THROW(policy_from_json(doc), std::runtime_error);
}

TEST(Serialization, BasisAndCriticRoundTrip) {
  Rng rng(5);
  std::vector<Eigen::MatrixXd> f;
  for (int h = 0; h <= 2; ++h) {
    Eigen::MatrixXd x(2, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
    f.push_back(x);
  }
  const StageFeatureBasis basis(f, {{0, 1, 2}, {0, 2}, {1, 2}});
  const auto b = basis_from_json(reparse(basis_to_json(basis)));
  EXPECT_EQ(b.reachable_sets(), basis.reachable_sets());
  for (int h = 0; h <= 2; ++h) EXPECT_EQ(b.feature_matrices()[h], f[h]);

  auto c = CriticState::zeros(basis, 2);
  for (auto& v : c.v) v.setRandom();
  for (auto& k : c.w)
    for (auto& w : k) w.setRandom();
  const auto c2 = critic_from_json(reparse(critic_to_json(c)));
  ASSERT_EQ(c2.num_constraints(), 2);
  for (int h = 0; h <= 2; ++h) {
    EXPECT_EQ(c2.v[h], c.v[h]);
    EXPECT_EQ(c2.w[1][h], c.w[1][h]);
  }
}

TEST(Serialization, TabularBasisKeepsItsKind) {
  const auto basis = StageFeatureBasis::tabular(3, {{0}, {0, 1, 2}});
  EXPECT_TRUE(basis_from_json(reparse(basis_to_json(basis))).tabular());
}

TEST(Serialization, GridWorldAndTemplateRoundTrip) {
  GridWorldTemplate t;
  t.width = 4;
  t.height = 4;
  t.horizon = 6;
  t.reward_min = 0.5;
  t.reward_max = 1.5;
  t.shared_cells = 1;
  t.change_period = 2;
  const auto t2 = template_from_json(reparse(template_to_json(t)));
  EXPECT_EQ(t2.shared_cells, 1);
  EXPECT_EQ(t2.reward_max, 1.5);
  EXPECT_EQ(t2.change_period, 2);

  const auto c = generate_random_schedules(9, t2);
  const auto c2 = gridworld_from_json(reparse(gridworld_to_json(c)));
  EXPECT_EQ(c2.reward_schedule, c.reward_schedule);
  EXPECT_EQ(c2.bad_schedule, c.bad_schedule);
  EXPECT_EQ(c2.seed, 9u);
  EXPECT_EQ(c2.threshold, c.threshold);
  EXPECT_EQ(c2.slip, c.slip);
}

TEST(Serialization, FileHelpers) {
  const auto dir = std::filesystem::temp_directory_path() / "fhcac_serialization_test";
  std::filesystem::create_directories(dir);
  const json doc{{"x", 0.1 + 0.2}, {"y", {1, 2, 3}}};
  write_json_file(dir / "a.json", doc);
  EXPECT_EQ(read_json_file(dir / "a.json"), doc);
  EXPECT_EQ(read_json_file(dir / "a.json")["x"].get<double>(), 0.1 + 0.2);
  EXPECT_THROW(read_json_file(dir / "missing.json"), std::ios_base::failure);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace fhcac
