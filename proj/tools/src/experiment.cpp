#include "fhcac/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <ios>
#include <mutex>
#include <sstream>
#include <thread>

#include "fhcac/gridworld.hpp"
#include "fhcac/metrics.hpp"
#include "fhcac/plot.hpp"
#include "fhcac/serialization.hpp"

namespace fhcac {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_document(const fs::path& path) {
  try {
    return read_json_file(path);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const std::ios_base::failure& e) {
    throw IoError(e.what());
  }
}

StepSize parse_step(const json& doc, StepSize fallback) {
  if (doc.is_null()) return fallback;
  StepSize s = fallback;
  s.exponent = doc.value("exponent", s.exponent);
  s.scale = doc.value("scale", s.scale);
  s.offset = doc.value("offset", s.offset);
  return s;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

json model_document(const ExperimentConfig& config) {
  return config.model_path.empty() ? config.model_inline : read_document(config.model_path);
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& doc, const fs::path& base_dir) {
  ExperimentConfig c;
  try {
    if (!doc.is_object()) throw ConfigError("experiment config must be a JSON object");
    c.source = doc;

    const json& model = doc.at("model");
    const std::string kind = model.value("kind", "gridworld");
    if (kind == "gridworld") {
      c.model_kind = ModelKind::kGridWorld;
    } else if (kind == "cmdp") {
      c.model_kind = ModelKind::kCmdp;
    } else {
      throw ConfigError("model.kind must be 'gridworld' or 'cmdp', got '" + kind + "'");
    }
    if (model.contains("path")) {
      c.model_path = resolve(base_dir, model.at("path").get<std::string>());
    } else if (model.contains("inline")) {
      c.model_inline = model.at("inline");
    } else {
      throw ConfigError("model needs either 'path' or 'inline'");
    }

    const json algo = doc.value("algorithm", json::object());
    const json sched = algo.value("schedules", json::object());
    c.trainer.schedules.critic = parse_step(sched.value("critic", json()), c.trainer.schedules.critic);
    c.trainer.schedules.actor = parse_step(sched.value("actor", json()), c.trainer.schedules.actor);
    c.trainer.schedules.multiplier = parse_step(sched.value("multiplier", json()), c.trainer.schedules.multiplier);
    c.trainer.lambda_floor = algo.value("lambda_floor", c.trainer.lambda_floor);
    c.param_bound = algo.value("param_bound", c.param_bound);
    c.temperature = algo.value("temperature", c.temperature);

    const std::string sweep = algo.value("critic_sweep", "synchronous");
    if (sweep == "synchronous") {
      c.trainer.sweep = CriticSweep::kSynchronous;
    } else if (sweep == "sequential") {
      c.trainer.sweep = CriticSweep::kSequential;
    } else {
      throw ConfigError("algorithm.critic_sweep must be 'synchronous' or 'sequential'");
    }
    const std::string conv = algo.value("lambda_convention", "nonpositive");
    if (conv == "nonpositive") {
      c.trainer.convention = LambdaConvention::kNonPositive;
    } else if (conv == "nonnegative") {
      c.trainer.convention = LambdaConvention::kNonNegative;
    } else {
      throw ConfigError("algorithm.lambda_convention must be 'nonpositive' or 'nonnegative'");
    }

    const json features = algo.value("features", json("tabular"));
    if (features.is_object()) {
      c.policy_path = resolve(base_dir, features.at("policy").get<std::string>());
    } else if (features.get<std::string>() != "tabular") {
      throw ConfigError("algorithm.features must be 'tabular' or {\"policy\": <path>}");
    }
    const json basis = algo.value("critic_basis", json("tabular"));
    if (basis.is_object()) {
      c.basis = BasisKind::kFile;
      c.basis_path = resolve(base_dir, basis.at("file").get<std::string>());
    } else if (basis.get<std::string>() == "tabular") {
      c.basis = BasisKind::kTabular;
    } else if (basis.get<std::string>() == "offset_tabular") {
      c.basis = BasisKind::kOffsetTabular;
    } else {
      throw ConfigError("algorithm.critic_basis must be 'tabular', 'offset_tabular' or {\"file\": <path>}");
    }

    const json& run = doc.at("run");
    c.num_episodes = run.at("num_episodes").get<std::int64_t>();
    c.seeds = run.at("seeds").get<std::vector<std::uint64_t>>();
    const auto window = run.value("window", std::int64_t{10000});
    c.checkpoint_interval = run.value("checkpoint_interval", std::int64_t{0});
    c.output_dir = resolve(base_dir, run.value("output_dir", std::string("runs")));

    if (c.seeds.empty()) throw ValidationError("run.seeds must not be empty");
    if (window < 1) throw ValidationError("run.window must be >= 1");
    if (c.num_episodes < 0) throw ValidationError("run.num_episodes must be >= 0");
    if (c.checkpoint_interval < 0) throw ValidationError("run.checkpoint_interval must be >= 0");
    c.window = static_cast<std::size_t>(window);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }

  if (!(c.temperature > 0.0)) throw ValidationError("algorithm.temperature must be positive");
  if (!(c.param_bound > 0.0)) throw ValidationError("algorithm.param_bound must be positive");
  if (!(c.trainer.lambda_floor < 0.0)) throw ValidationError("algorithm.lambda_floor must be negative");
  const auto report = check_schedules(c.trainer.schedules);
  if (!report.ok()) throw ValidationError("schedules: " + report.problems.front());
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  return parse_experiment_config(read_document(path), path.parent_path());
}

std::string config_hash(const ExperimentConfig& config) {
  json doc = config.source;
  if (doc.contains("run")) doc["run"].erase("output_dir");
  // The model contents, not only their location, identify the experiment.
  std::uint64_t h = fnv1a(doc.dump());
  h = fnv1a(model_document(config).dump(), h);
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

std::string run_id(const ExperimentConfig& config, std::uint64_t seed) {
  return config_hash(config).substr(0, 12) + "-seed" + std::to_string(seed);
}

LoadedModel load_model(const ExperimentConfig& config) {
  const json doc = model_document(config);
  LoadedModel out;
  if (config.model_kind == ModelKind::kCmdp) {
    std::shared_ptr<FiniteHorizonCMDP> model;
    try {
      model = std::make_shared<FiniteHorizonCMDP>(model_from_json(doc));
    } catch (const std::invalid_argument& e) {
      throw ValidationError(e.what());
    } catch (const std::exception& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
    const auto report = validate(*model);
    if (!report.ok()) throw ValidationError("model: " + report.summary());
    if (model->num_constraints() > 0) out.threshold = model->thresholds()[0];
    out.dense = model;
    out.env = model;
  } else {
    GridWorldConfig grid;
    try {
      grid = gridworld_from_json(doc);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("grid world: ") + e.what());
    }
    const auto problems = validate_config(grid);
    if (!problems.empty()) throw ValidationError("grid world: " + problems.front());
    out.threshold = grid.threshold;
    out.env = std::make_shared<GridWorld>(std::move(grid));
  }
  return out;
}

TrainerState make_run_state(const ExperimentConfig& config, const LoadedModel& model, std::uint64_t seed) {
  const Environment& env = *model.env;
  const auto reach = env.reachable_sets();
  try {
    std::shared_ptr<const StageFeatureBasis> basis;
    switch (config.basis) {
      case BasisKind::kTabular:
        basis = std::make_shared<StageFeatureBasis>(StageFeatureBasis::tabular(env.num_states(), reach));
        break;
      case BasisKind::kOffsetTabular:
        basis = std::make_shared<StageFeatureBasis>(StageFeatureBasis::offset_tabular(env.num_states(), reach));
        break;
      case BasisKind::kFile:
        basis = std::make_shared<StageFeatureBasis>(basis_from_json(read_document(config.basis_path)));
        break;
    }
    NonStationaryPolicy policy =
        config.policy_path.empty()
            ? make_tabular_policy(env.num_states(), env.num_actions(), reach, env.horizon(), config.temperature,
                                  config.param_bound)
            : policy_from_json(read_document(config.policy_path));
    return make_trainer_state(model.env, basis, std::move(policy), config.trainer, seed);
  } catch (const IoError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  } catch (const std::exception& e) {
    throw ValidationError(e.what());
  }
}

unsigned thread_limit() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FHC_AC_THREADS")) {
    unsigned v = 0;
    const char* end = env + std::char_traits<char>::length(env);
    auto res = std::from_chars(env, end, v);
    if (res.ec == std::errc() && res.ptr == end && v > 0) return v;
  }
  return hw;
}

namespace {

void write_checkpoint(const TrainerState& state, const fs::path& path) {
  try {
    write_json_file(path, checkpoint_to_json(state));
  } catch (const std::ios_base::failure& e) {
    throw IoError(e.what());
  }
}

RunArtifacts train_one(const ExperimentConfig& config, const LoadedModel& model, std::uint64_t seed) {
  RunArtifacts art;
  art.seed = seed;
  art.directory = config.output_dir / run_id(config, seed);
  art.metrics_csv = art.directory / "metrics.csv";
  art.checkpoint = art.directory / "checkpoint.json";

  TrainerState state = make_run_state(config, model, seed);
  std::error_code ec;
  fs::create_directories(art.directory, ec);
  if (ec) throw IoError("cannot create " + art.directory.string() + ": " + ec.message());
  {
    std::ofstream cfg(art.directory / "config.json");
    if (!cfg) throw IoError("cannot write config copy in " + art.directory.string());
    cfg << config.source.dump(1) << '\n';
  }

  std::ofstream csv(art.metrics_csv);
  if (!csv) throw IoError("cannot write " + art.metrics_csv.string());
  CsvMetricWriter writer(csv, model.env->num_constraints(), config.window);
  for (std::int64_t n = 0; n < config.num_episodes; ++n) {
    writer.record(train_episode(state));
    if (config.checkpoint_interval > 0 && (n + 1) % config.checkpoint_interval == 0)
      write_checkpoint(state, art.directory / ("checkpoint_" + std::to_string(n + 1) + ".json"));
  }
  csv.flush();
  if (!csv) throw IoError("write failed for " + art.metrics_csv.string());
  write_checkpoint(state, art.checkpoint);
  return art;
}

}  // namespace

void write_aggregate_csv(const std::vector<fs::path>& csvs, const fs::path& out) {
  std::vector<MetricTable> tables;
  for (const auto& p : csvs) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot read " + p.string());
    try {
      tables.push_back(read_metric_csv(in));
    } catch (const std::runtime_error& e) {
      throw ConfigError(p.string() + ": " + e.what());
    }
  }
  if (tables.empty()) throw ValidationError("aggregate: no runs");
  const int M = constraints_in_header(tables.front().header);
  if (M < 0) throw ConfigError("aggregate: unexpected CSV header");
  for (const auto& t : tables) {
    if (t.header != tables.front().header) throw ValidationError("aggregate: runs have different CSV schemas");
    if (t.rows.size() != tables.front().rows.size()) throw ValidationError("aggregate: runs have different lengths");
  }

  std::vector<std::string> stats{"ma_return"};
  for (int k = 1; k <= M; ++k) stats.push_back("ma_cost_" + std::to_string(k));

  std::ofstream os(out);
  if (!os) throw IoError("cannot write " + out.string());
  os << "episode,runs";
  for (const auto& s : stats) os << ',' << s << "_mean," << s << "_min," << s << "_max";
  os << '\n';
  const int episode_col = tables.front().column("episode");
  std::vector<int> cols;
  for (const auto& s : stats) cols.push_back(tables.front().column(s));
  for (std::size_t r = 0; r < tables.front().rows.size(); ++r) {
    os << format_double(tables.front().rows[r][episode_col]) << ',' << tables.size();
    for (int c : cols) {
      double sum = 0.0, lo = tables.front().rows[r][c], hi = lo;
      for (const auto& t : tables) {
        const double x = t.rows[r][c];
        sum += x;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
      os << ',' << format_double(sum / static_cast<double>(tables.size())) << ',' << format_double(lo) << ','
         << format_double(hi);
    }
    os << '\n';
  }
  if (!os) throw IoError("write failed for " + out.string());
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const LoadedModel model = load_model(config);
  // Fail on bad algorithm settings before any thread starts.
  (void)make_run_state(config, model, config.seeds.front());

  ExperimentResult result;
  result.runs.resize(config.seeds.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      try {
        result.runs[i] = train_one(config, model, config.seeds[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::min<unsigned>(thread_limit(), static_cast<unsigned>(config.seeds.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  const fs::path agg_dir = config.output_dir / (config_hash(config).substr(0, 12) + "-aggregate");
  std::error_code ec;
  fs::create_directories(agg_dir, ec);
  if (ec) throw IoError("cannot create " + agg_dir.string() + ": " + ec.message());
  std::vector<fs::path> csvs;
  for (const auto& r : result.runs) csvs.push_back(r.metrics_csv);
  result.aggregate_csv = agg_dir / "aggregate.csv";
  write_aggregate_csv(csvs, result.aggregate_csv);

  std::vector<PlotSeries> series;
  for (const auto& r : result.runs) {
    std::ifstream in(r.metrics_csv);
    series.push_back({"seed " + std::to_string(r.seed), read_metric_csv(in)});
  }
  PlotOptions opts;
  opts.threshold = model.threshold;
  if (model.env->num_constraints() > 0) {
    result.plot_svg = agg_dir / "plot.svg";
    std::ofstream svg(result.plot_svg);
    if (!svg) throw IoError("cannot write " + result.plot_svg.string());
    write_svg_plot(svg, series, opts);
  }
  return result;
}

}  // namespace fhcac
