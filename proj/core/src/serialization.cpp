#include "fhcac/serialization.hpp"

#include <fstream>
#include <stdexcept>

namespace fhcac {
namespace {

constexpr const char* kModelFormat = "fhcac.cmdp/1";
constexpr const char* kPolicyFormat = "fhcac.policy/1";
constexpr const char* kCriticFormat = "fhcac.critic/1";
constexpr const char* kGridFormat = "fhcac.gridworld/1";

void expect_format(const json& doc, const char* format) {
  if (!doc.is_object()) throw std::runtime_error(std::string("expected a ") + format + " object");
  if (doc.contains("format") && doc.at("format").get<std::string>() != format)
    throw std::runtime_error(std::string("expected format ") + format + ", got " + doc.at("format").get<std::string>());
}

// Flat [h][s][a][s'] table <-> nested arrays.
json nest_stage_table(const CmdpData& d, const std::vector<double>& flat) {
  json stages = json::array();
  for (int h = 0; h < d.horizon; ++h) {
    json states = json::array();
    for (int s = 0; s < d.num_states; ++s) {
      json actions = json::array();
      for (int a = 0; a < d.num_actions; ++a) {
        const auto begin = flat.begin() + static_cast<std::ptrdiff_t>(d.index(h, s, a, 0));
        actions.push_back(std::vector<double>(begin, begin + d.num_states));
      }
      states.push_back(std::move(actions));
    }
    stages.push_back(std::move(states));
  }
  return stages;
}

std::vector<double> flatten_stage_table(const CmdpData& d, const json& nested, const char* what) {
  std::vector<double> flat(static_cast<std::size_t>(d.horizon) * d.num_states * d.num_actions * d.num_states);
  auto fail = [&] { throw std::runtime_error(std::string("model: ") + what + " table has the wrong shape"); };
  if (!nested.is_array() || static_cast<int>(nested.size()) != d.horizon) fail();
  for (int h = 0; h < d.horizon; ++h) {
    const auto& states = nested[h];
    if (!states.is_array() || static_cast<int>(states.size()) != d.num_states) fail();
    for (int s = 0; s < d.num_states; ++s) {
      const auto& actions = states[s];
      if (!actions.is_array() || static_cast<int>(actions.size()) != d.num_actions) fail();
      for (int a = 0; a < d.num_actions; ++a) {
        const auto row = actions[a].get<std::vector<double>>();
        if (static_cast<int>(row.size()) != d.num_states) fail();
        std::copy(row.begin(), row.end(), flat.begin() + static_cast<std::ptrdiff_t>(d.index(h, s, a, 0)));
      }
    }
  }
  return flat;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(std::move(row));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Eigen::MatrixXd matrix_from_json(const json& doc) {
  const auto rows = doc.at("rows").get<Eigen::Index>();
  const auto cols = doc.at("cols").get<Eigen::Index>();
  const auto& data = doc.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows) throw std::runtime_error("matrix: row count mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto row = data[static_cast<std::size_t>(r)].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != cols) throw std::runtime_error("matrix: column count mismatch");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& doc) {
  const auto values = doc.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json stage_vectors_to_json(const std::vector<Eigen::VectorXd>& vs) {
  json out = json::array();
  for (const auto& v : vs) out.push_back(vector_to_json(v));
  return out;
}

std::vector<Eigen::VectorXd> stage_vectors_from_json(const json& doc) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& v : doc) out.push_back(vector_from_json(v));
  return out;
}

json schedule_to_json(const CellSchedule& schedule) {
  json out = json::array();
  for (const auto& [stage, entries] : schedule) {
    json cells = json::array();
    for (const auto& e : entries) cells.push_back({{"cell", e.cell}, {"value", e.value}});
    out.push_back({{"stage", stage}, {"cells", std::move(cells)}});
  }
  return out;
}

CellSchedule schedule_from_json(const json& doc) {
  CellSchedule schedule;
  for (const auto& entry : doc) {
    auto& cells = schedule[entry.at("stage").get<int>()];
    for (const auto& c : entry.at("cells")) cells.push_back({c.at("cell").get<int>(), c.at("value").get<double>()});
  }
  return schedule;
}

}  // namespace

json model_to_json(const FiniteHorizonCMDP& model) {
  const auto& d = model.data();
  json constraints = json::array();
  for (int k = 0; k < d.num_constraints(); ++k) {
    constraints.push_back({{"threshold", d.thresholds[k]},
                           {"costs", nest_stage_table(d, d.constraint_costs[k])},
                           {"terminal_costs", d.terminal_constraint_costs[k]}});
  }
  return json{{"format", kModelFormat},
              {"num_states", d.num_states},
              {"num_actions", d.num_actions},
              {"horizon", d.horizon},
              {"kernels", nest_stage_table(d, d.kernels)},
              {"rewards", nest_stage_table(d, d.rewards)},
              {"terminal_rewards", d.terminal_rewards},
              {"constraints", std::move(constraints)},
              {"initial_distribution", d.initial_distribution}};
}

FiniteHorizonCMDP model_from_json(const json& doc) {
  expect_format(doc, kModelFormat);
  const int ns = doc.at("num_states").get<int>();
  const int na = doc.at("num_actions").get<int>();
  const int horizon = doc.at("horizon").get<int>();
  const auto& constraints = doc.contains("constraints") ? doc.at("constraints") : json::array();
  auto d = CmdpData::zeros(ns, na, horizon, static_cast<int>(constraints.size()));
  d.kernels = flatten_stage_table(d, doc.at("kernels"), "kernel");
  d.rewards = flatten_stage_table(d, doc.at("rewards"), "reward");
  d.terminal_rewards = doc.at("terminal_rewards").get<std::vector<double>>();
  d.initial_distribution = doc.at("initial_distribution").get<std::vector<double>>();
  for (std::size_t k = 0; k < constraints.size(); ++k) {
    const auto& c = constraints[k];
    d.thresholds[k] = c.at("threshold").get<double>();
    d.constraint_costs[k] = flatten_stage_table(d, c.at("costs"), "constraint cost");
    d.terminal_constraint_costs[k] = c.at("terminal_costs").get<std::vector<double>>();
  }
  try {
    return FiniteHorizonCMDP(std::move(d));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(e.what());
  }
}

json features_to_json(const PreferenceFeatures& features) {
  json doc{{"kind", features.id()},
           {"num_states", features.num_states()},
           {"num_actions", features.num_actions()},
           {"horizon", features.horizon()}};
  if (features.kind() == PreferenceFeatures::Kind::kTabular) {
    doc["reachable"] = features.tabular_states();
  } else {
    json stages = json::array();
    for (const auto& m : features.dense_features()) stages.push_back(matrix_to_json(m));
    doc["stages"] = std::move(stages);
  }
  return doc;
}

PreferenceFeatures features_from_json(const json& doc) {
  const auto kind = doc.at("kind").get<std::string>();
  const int ns = doc.at("num_states").get<int>();
  const int na = doc.at("num_actions").get<int>();
  if (kind == "tabular") {
    return PreferenceFeatures::tabular(ns, na, doc.at("reachable").get<std::vector<std::vector<int>>>(),
                                       doc.at("horizon").get<int>());
  }
  if (kind == "dense") {
    std::vector<Eigen::MatrixXd> stages;
    for (const auto& m : doc.at("stages")) stages.push_back(matrix_from_json(m));
    return PreferenceFeatures::dense(ns, na, std::move(stages));
  }
  throw std::runtime_error("unknown feature kind '" + kind + "'");
}

json policy_to_json(const NonStationaryPolicy& policy) {
  json params = json::array();
  for (int h = 0; h < policy.horizon(); ++h) params.push_back(vector_to_json(policy.params(h)));
  return json{{"format", kPolicyFormat},
              {"horizon", policy.horizon()},
              {"feature_spec", policy.features().id()},
              {"features", features_to_json(policy.features())},
              {"temperature", policy.temperature()},
              {"param_bound", policy.param_bound()},
              {"params", std::move(params)}};
}

NonStationaryPolicy policy_from_json(const json& doc) {
  expect_format(doc, kPolicyFormat);
  auto features = std::make_shared<const PreferenceFeatures>(features_from_json(doc.at("features")));
  NonStationaryPolicy policy(features, doc.value("temperature", 1.0), doc.value("param_bound", 10.0));
  const auto& params = doc.at("params");
  if (static_cast<int>(params.size()) != policy.horizon()) throw std::runtime_error("policy: wrong number of stages");
  for (int h = 0; h < policy.horizon(); ++h) {
    const auto theta = vector_from_json(params[static_cast<std::size_t>(h)]);
    if (theta.size() != policy.features().dim(h)) throw std::runtime_error("policy: parameter dimension mismatch");
    policy.set_params(h, theta);
  }
  return policy;
}

json basis_to_json(const StageFeatureBasis& basis) {
  json doc{{"tabular", basis.tabular()}, {"num_states", basis.num_states()}, {"reachable", basis.reachable_sets()}};
  if (!basis.tabular()) {
    json stages = json::array();
    for (const auto& m : basis.feature_matrices()) stages.push_back(matrix_to_json(m));
    doc["stages"] = std::move(stages);
  }
  return doc;
}

StageFeatureBasis basis_from_json(const json& doc) {
  auto reachable = doc.at("reachable").get<std::vector<std::vector<int>>>();
  if (doc.value("tabular", false)) return StageFeatureBasis::tabular(doc.at("num_states").get<int>(), std::move(reachable));
  std::vector<Eigen::MatrixXd> stages;
  for (const auto& m : doc.at("stages")) stages.push_back(matrix_from_json(m));
  return StageFeatureBasis(std::move(stages), std::move(reachable));
}

json critic_to_json(const CriticState& critic) {
  json w = json::array();
  for (const auto& k : critic.w) w.push_back(stage_vectors_to_json(k));
  return json{{"format", kCriticFormat}, {"v", stage_vectors_to_json(critic.v)}, {"w", std::move(w)}};
}

CriticState critic_from_json(const json& doc) {
  expect_format(doc, kCriticFormat);
  CriticState c;
  c.v = stage_vectors_from_json(doc.at("v"));
  for (const auto& k : doc.at("w")) c.w.push_back(stage_vectors_from_json(k));
  return c;
}

json checkpoint_to_json(const TrainerState& state) {
  return json{{"episode", state.episode_index},
              {"lambda", vector_to_json(state.lambda)},
              {"lambda_convention",
               state.options.convention == LambdaConvention::kNonPositive ? "nonpositive" : "nonnegative"},
              {"policy", policy_to_json(state.policy)},
              {"critic", critic_to_json(state.critic)}};
}

json gridworld_to_json(const GridWorldConfig& c) {
  return json{{"format", kGridFormat},
              {"width", c.width},
              {"height", c.height},
              {"horizon", c.horizon},
              {"slip", c.slip},
              {"threshold", c.threshold},
              {"seed", c.seed},
              {"start_distribution", c.start_distribution},
              {"reward_schedule", schedule_to_json(c.reward_schedule)},
              {"bad_schedule", schedule_to_json(c.bad_schedule)}};
}

GridWorldConfig gridworld_from_json(const json& doc) {
  expect_format(doc, kGridFormat);
  GridWorldConfig c;
  c.width = doc.at("width").get<int>();
  c.height = doc.at("height").get<int>();
  c.horizon = doc.at("horizon").get<int>();
  c.slip = doc.value("slip", 0.1);
  c.threshold = doc.value("threshold", 25.0);
  c.seed = doc.value("seed", std::uint64_t{0});
  c.start_distribution = doc.value("start_distribution", std::vector<double>{});
  if (doc.contains("reward_schedule")) c.reward_schedule = schedule_from_json(doc.at("reward_schedule"));
  if (doc.contains("bad_schedule")) c.bad_schedule = schedule_from_json(doc.at("bad_schedule"));
  return c;
}

json template_to_json(const GridWorldTemplate& t) {
  return json{{"width", t.width},
              {"height", t.height},
              {"horizon", t.horizon},
              {"slip", t.slip},
              {"threshold", t.threshold},
              {"reward_cells_per_stage", t.reward_cells_per_stage},
              {"bad_cells_per_stage", t.bad_cells_per_stage},
              {"reward_min", t.reward_min},
              {"reward_max", t.reward_max},
              {"cost_min", t.cost_min},
              {"cost_max", t.cost_max},
              {"change_period", t.change_period},
              {"disjoint", t.disjoint},
              {"shared_cells", t.shared_cells},
              {"start_distribution", t.start_distribution}};
}

GridWorldTemplate template_from_json(const json& doc) {
  GridWorldTemplate t;
  t.width = doc.value("width", t.width);
  t.height = doc.value("height", t.height);
  t.horizon = doc.value("horizon", t.horizon);
  t.slip = doc.value("slip", t.slip);
  t.threshold = doc.value("threshold", t.threshold);
  t.reward_cells_per_stage = doc.value("reward_cells_per_stage", t.reward_cells_per_stage);
  t.bad_cells_per_stage = doc.value("bad_cells_per_stage", t.bad_cells_per_stage);
  t.reward_min = doc.value("reward_min", t.reward_min);
  t.reward_max = doc.value("reward_max", t.reward_max);
  t.cost_min = doc.value("cost_min", t.cost_min);
  t.cost_max = doc.value("cost_max", t.cost_max);
  t.change_period = doc.value("change_period", t.change_period);
  t.disjoint = doc.value("disjoint", t.disjoint);
  t.shared_cells = doc.value("shared_cells", t.shared_cells);
  t.start_distribution = doc.value("start_distribution", t.start_distribution);
  return t;
}

json solution_to_json(const ExactSolution& sol) {
  json q = json::array();
  for (const auto& m : sol.Q) q.push_back(matrix_to_json(m));
  json w = json::array();
  for (const auto& k : sol.W) w.push_back(stage_vectors_to_json(k));
  return json{{"J", sol.J},
              {"constraint_values", vector_to_json(sol.constraint_values)},
              {"lagrangian", sol.lagrangian},
              {"V", stage_vectors_to_json(sol.V)},
              {"Q", std::move(q)},
              {"W", std::move(w)},
              {"d", stage_vectors_to_json(sol.d)}};
}

json reference_to_json(const ConstrainedReference& ref) {
  json doc{{"feasible", ref.feasible}, {"grid_points", ref.grid.size()}, {"monotonicity_notes", ref.monotonicity_notes}};
  if (ref.feasible) {
    doc["best_J"] = ref.best_J;
    doc["best_constraint_values"] = vector_to_json(ref.best_constraint_values);
    doc["best_lambda"] = vector_to_json(ref.best_lambda);
    doc["best_policy"] = ref.best_policy;
  }
  return doc;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  return json::parse(in);
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot write " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw std::ios_base::failure("write failed for " + path.string());
}

}  // namespace fhcac
