#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <ios>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fhcac/critic.hpp"
#include "fhcac/dp_oracle.hpp"
#include "fhcac/experiment.hpp"
#include "fhcac/gridworld.hpp"
#include "fhcac/metrics.hpp"
#include "fhcac/plot.hpp"
#include "fhcac/serialization.hpp"

namespace fs = std::filesystem;
using namespace fhcac;

namespace {

constexpr double kGradcheckTolerance = 1e-4;

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const ValidationError& e) {
    std::cerr << "invalid: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

nlohmann::json read_doc(const fs::path& path) {
  try {
    return read_json_file(path);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const std::ios_base::failure& e) {
    throw IoError(e.what());
  }
}

// Dense model from either a CMDP document or a grid-world config.
FiniteHorizonCMDP load_dense_model(const fs::path& path) {
  const auto doc = read_doc(path);
  std::optional<FiniteHorizonCMDP> model;
  try {
    if (doc.value("format", std::string()).rfind("fhcac.gridworld", 0) == 0) {
      const auto grid = gridworld_from_json(doc);
      const auto problems = validate_config(grid);
      if (!problems.empty()) throw ValidationError("grid world: " + problems.front());
      model.emplace(build(grid));
    } else {
      model.emplace(model_from_json(doc));
    }
  } catch (const ValidationError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  } catch (const std::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  const auto report = validate(*model);
  if (!report.ok()) throw ValidationError("model: " + report.summary());
  return std::move(*model);
}

struct OracleArgs {
  std::string model;
  std::string policy;
  std::vector<double> lambda;
  std::uint64_t seed = 0;
  double scale = 1.0;
  int grid_points = 101;
  std::string basis = "tabular";
};

NonStationaryPolicy oracle_policy(const FiniteHorizonCMDP& model, const OracleArgs& args, bool randomize) {
  if (!args.policy.empty()) {
    NonStationaryPolicy p = [&] {
      try {
        return policy_from_json(read_doc(args.policy));
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(args.policy + ": " + e.what());
      }
    }();
    if (p.horizon() != model.horizon() || p.num_states() != model.num_states() ||
        p.num_actions() != model.num_actions())
      throw ValidationError("policy does not match the model's dimensions");
    return p;
  }
  auto p = make_tabular_policy(model.num_states(), model.num_actions(), model.reachable_sets(), model.horizon());
  if (randomize) {
    Rng rng(args.seed);
    for (int h = 0; h < p.horizon(); ++h) {
      Eigen::VectorXd theta = p.params(h);
      for (auto& x : theta) x = args.scale * (2.0 * rng.uniform() - 1.0);
      p.set_params(h, theta);
    }
  }
  return p;
}

std::vector<double> oracle_lambda(const FiniteHorizonCMDP& model, const OracleArgs& args) {
  const auto M = static_cast<std::size_t>(model.num_constraints());
  if (args.lambda.empty()) return std::vector<double>(M, 0.0);
  if (args.lambda.size() != M) throw ValidationError("--lambda needs one value per constraint");
  for (double l : args.lambda)
    if (l > 0.0) throw ValidationError("--lambda values must be <= 0");
  return args.lambda;
}

void print_vector(const char* name, const Eigen::VectorXd& v) {
  std::printf("%s", name);
  for (double x : v) std::printf(" %.12g", x + 0.0);
  std::printf("\n");
}

int cmd_gradcheck(const OracleArgs& args) {
  const auto model = load_dense_model(args.model);
  const auto policy = oracle_policy(model, args, true);
  const auto lambda = oracle_lambda(model, args);
  const auto exact = exact_gradient(model, policy, lambda);
  const auto fd = finite_difference_gradient(model, policy, lambda);
  const auto cmp = compare_gradients(exact, fd);
  std::printf("max_relative_error %.6e\n", cmp.max_relative_error);
  std::printf("max_absolute_error %.6e\n", cmp.max_absolute_error);
  std::printf("worst_stage %d worst_coordinate %d\n", cmp.worst_stage, cmp.worst_coordinate);
  const bool ok = cmp.max_relative_error <= kGradcheckTolerance;
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

int cmd_solve(const OracleArgs& args) {
  const auto model = load_dense_model(args.model);
  ReferenceOptions opts;
  opts.grid_points = args.grid_points;
  if (opts.grid_points < 2 && model.num_constraints() > 0) throw ValidationError("--grid-points must be >= 2");
  const auto ref = constrained_reference(model, opts);
  std::printf("feasible %d\n", ref.feasible ? 1 : 0);
  std::printf("J* %.12g\n", ref.best_J);
  if (ref.feasible) {
    print_vector("S", ref.best_constraint_values);
    print_vector("lambda", ref.best_lambda);
  }
  for (const auto& note : ref.monotonicity_notes) std::printf("note %s\n", note.c_str());
  return 0;
}

int cmd_evaluate(const OracleArgs& args) {
  const auto model = load_dense_model(args.model);
  const auto policy = oracle_policy(model, args, false);
  const auto value = evaluate_policy(model, policy);
  std::printf("J %.12g\n", value.J);
  print_vector("S", value.constraint_values);
  return 0;
}

int cmd_fixedpoint(const OracleArgs& args) {
  const auto model = load_dense_model(args.model);
  const auto policy = oracle_policy(model, args, false);
  const auto lambda = oracle_lambda(model, args);
  const auto reach = model.reachable_sets();
  std::optional<StageFeatureBasis> basis;
  if (args.basis == "tabular") {
    basis.emplace(StageFeatureBasis::tabular(model.num_states(), reach));
  } else if (args.basis == "offset_tabular") {
    basis.emplace(StageFeatureBasis::offset_tabular(model.num_states(), reach));
  } else {
    try {
      basis.emplace(basis_from_json(read_doc(args.basis)));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(args.basis + ": " + e.what());
    }
  }
  const auto report = validate_basis(*basis, model, policy);
  if (!report.ok()) throw ValidationError("basis: " + report.summary());
  const auto fp = fixed_points(*basis, model, policy, lambda);
  const auto res = fixed_point_residuals(*basis, model, policy, lambda, fp);
  for (std::size_t h = 0; h < res.lagrangian.size(); ++h)
    std::printf("stage %zu lagrangian_residual %.3e\n", h, res.lagrangian[h]);
  for (std::size_t k = 0; k < res.constraints.size(); ++k)
    for (std::size_t h = 0; h < res.constraints[k].size(); ++h)
      std::printf("stage %zu constraint_%zu_residual %.3e\n", h, k + 1, res.constraints[k][h]);
  std::printf("max_residual %.3e\n", res.max());
  std::printf("value_at_start %.12g\n", basis->value(0, reach.front().front(), fp.lagrangian.front()));
  return 0;
}

int cmd_env_generate(const std::string& tmpl_path, std::uint64_t seed, const std::string& out,
                     std::optional<double> alpha_fraction) {
  GridWorldTemplate tmpl;
  try {
    tmpl = template_from_json(read_doc(tmpl_path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(tmpl_path + ": " + e.what());
  }
  auto config = generate_random_schedules(seed, tmpl);
  if (alpha_fraction) {
    // alpha = fraction * expected cost of the unconstrained greedy policy.
    const auto model = build(config);
    const std::vector<double> zero(1, 0.0);
    const auto value = evaluate_policy(model, decision_rule(greedy_policy(model, zero), model.num_actions()));
    config.threshold = *alpha_fraction * value.constraint_values[0];
    std::printf("unconstrained J %.12g S %.12g alpha %.12g\n", value.J, value.constraint_values[0], config.threshold);
  }
  try {
    write_json_file(out, gridworld_to_json(config));
  } catch (const std::ios_base::failure& e) {
    throw IoError(e.what());
  }
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int cmd_plot(const std::vector<std::string>& csvs, const std::string& out, std::optional<double> threshold,
             int constraint) {
  std::vector<PlotSeries> series;
  for (const auto& path : csvs) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    try {
      series.push_back({path, read_metric_csv(in)});
    } catch (const std::runtime_error& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  PlotOptions opts;
  opts.threshold = threshold;
  opts.constraint = constraint;
  std::ofstream os(out);
  if (!os) throw IoError("cannot write " + out);
  try {
    write_svg_plot(os, series, opts);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  os.flush();
  if (!os) throw IoError("write failed for " + out);
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out) {
  auto config = load_experiment_config(config_path);
  if (!out.empty()) config.output_dir = out;
  const auto result = run_experiment(config);
  for (const auto& r : result.runs) std::printf("seed %llu -> %s\n", static_cast<unsigned long long>(r.seed),
                                                r.directory.string().c_str());
  std::printf("aggregate -> %s\n", result.aggregate_csv.string().c_str());
  if (!result.plot_svg.empty()) std::printf("plot -> %s\n", result.plot_svg.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-horizon constrained actor-critic"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  auto* train = app.add_subcommand("train", "Run a configured multi-seed training experiment");
  train->add_option("--config", config_path, "Experiment config (JSON)")->required();
  train->add_option("--out", out_dir, "Output directory (overrides the config)");

  OracleArgs oargs;
  auto* oracle = app.add_subcommand("oracle", "Exact dynamic-programming checks on a dense model");
  oracle->require_subcommand(1);
  auto add_common = [&](CLI::App* cmd, bool with_policy) {
    cmd->add_option("--model", oargs.model, "Model file (CMDP or grid world JSON)")->required();
    if (with_policy) cmd->add_option("--policy", oargs.policy, "Policy file (JSON); default tabular");
  };
  auto* gradcheck = oracle->add_subcommand("gradcheck", "Exact gradient vs central finite differences");
  add_common(gradcheck, true);
  gradcheck->add_option("--lambda", oargs.lambda, "Multipliers (<= 0), one per constraint");
  gradcheck->add_option("--seed", oargs.seed, "Seed for random parameters when no policy is given");
  gradcheck->add_option("--scale", oargs.scale, "Random parameters are uniform in [-scale, scale]");
  auto* solve = oracle->add_subcommand("solve", "Constrained reference optimum over a multiplier grid");
  add_common(solve, false);
  solve->add_option("--grid-points", oargs.grid_points, "Grid points per multiplier");
  auto* evaluate = oracle->add_subcommand("evaluate", "Objective and constraint values of a policy");
  add_common(evaluate, true);
  auto* fixedpoint = oracle->add_subcommand("fixedpoint", "Critic fixed points and their residuals");
  add_common(fixedpoint, true);
  fixedpoint->add_option("--lambda", oargs.lambda, "Multipliers (<= 0), one per constraint");
  fixedpoint->add_option("--basis", oargs.basis, "tabular, offset_tabular or a basis JSON file");

  std::string tmpl_path, env_out;
  std::uint64_t env_seed = 0;
  auto* env = app.add_subcommand("env", "Grid-world utilities");
  env->require_subcommand(1);
  auto* generate = env->add_subcommand("generate", "Draw random schedules from a template");
  generate->add_option("--template", tmpl_path, "Template (JSON)")->required();
  generate->add_option("--seed", env_seed, "Seed")->required();
  generate->add_option("--out", env_out, "Output grid-world config")->required();
  double alpha_fraction = 0.0;
  auto* alpha_opt = generate->add_option("--alpha-fraction", alpha_fraction,
                                         "Set alpha to this fraction of the unconstrained optimum's expected cost")
                        ->check(CLI::PositiveNumber);

  std::vector<std::string> csvs;
  std::string svg_out;
  double threshold = 25.0;
  bool no_threshold = false;
  int constraint = 1;
  auto* plot = app.add_subcommand("plot", "Render metric CSVs as an SVG chart");
  plot->add_option("--csv", csvs, "Metric CSV files")->required()->expected(1, -1);
  plot->add_option("--out", svg_out, "Output SVG")->required();
  plot->add_option("--threshold", threshold, "Constraint threshold drawn as a dashed line");
  plot->add_flag("--no-threshold", no_threshold, "Omit the threshold line");
  plot->add_option("--constraint", constraint, "Constraint index k of ma_cost_k")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitParse;
  }

  return guarded([&]() -> int {
    if (*train) return cmd_train(config_path, out_dir);
    if (*gradcheck) return cmd_gradcheck(oargs);
    if (*solve) return cmd_solve(oargs);
    if (*evaluate) return cmd_evaluate(oargs);
    if (*fixedpoint) return cmd_fixedpoint(oargs);
    if (*generate) return cmd_env_generate(tmpl_path, env_seed, env_out,
                              *alpha_opt ? std::optional<double>(alpha_fraction) : std::nullopt);
    if (*plot)
      return cmd_plot(csvs, svg_out, no_threshold ? std::nullopt : std::optional<double>(threshold), constraint);
    return kExitParse;
  });
}
