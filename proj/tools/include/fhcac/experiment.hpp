#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fhcac/critic.hpp"
#include "fhcac/environment.hpp"
#include "fhcac/mdp_model.hpp"
#include "fhcac/policy.hpp"
#include "fhcac/trainer.hpp"

namespace fhcac {

// Failure classes of the experiment harness, mapped to CLI exit codes.
class ConfigError : public std::runtime_error {  // unparseable input (2)
  using std::runtime_error::runtime_error;
};
class ValidationError : public std::runtime_error {  // well-formed but invalid (3)
  using std::runtime_error::runtime_error;
};
class IoError : public std::runtime_error {  // unreadable or unwritable files (4)
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitParse = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitIo = 4;

enum class ModelKind { kCmdp, kGridWorld };
enum class BasisKind { kTabular, kOffsetTabular, kFile };

struct ExperimentConfig {
  // Model source: a path (relative to the config file) or an inline document.
  ModelKind model_kind = ModelKind::kGridWorld;
  std::filesystem::path model_path;
  nlohmann::json model_inline;

  TrainerOptions trainer;
  double temperature = 1.0;
  double param_bound = 10.0;
  std::filesystem::path policy_path;  // empty -> tabular policy with zero parameters
  BasisKind basis = BasisKind::kTabular;
  std::filesystem::path basis_path;

  std::int64_t num_episodes = 0;
  std::vector<std::uint64_t> seeds;
  std::size_t window = 10000;
  std::int64_t checkpoint_interval = 0;  // 0 -> final checkpoint only
  std::filesystem::path output_dir = "runs";

  nlohmann::json source;  // the document this was parsed from
};

// Throws ConfigError on malformed JSON or wrong types, ValidationError when a
// value violates the documented ranges. Relative paths are resolved against
// `base_dir`.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Hex FNV-1a of the config document's canonical dump.
std::string config_hash(const ExperimentConfig& config);
std::string run_id(const ExperimentConfig& config, std::uint64_t seed);

struct LoadedModel {
  std::shared_ptr<const Environment> env;
  std::shared_ptr<const FiniteHorizonCMDP> dense;  // null for generative grid worlds
  std::optional<double> threshold;  // alpha of the first constraint, if any
};

LoadedModel load_model(const ExperimentConfig& config);

// Policy, basis and trainer state for one seed, exactly as cmd_train builds them.
TrainerState make_run_state(const ExperimentConfig& config, const LoadedModel& model, std::uint64_t seed);

struct RunArtifacts {
  std::uint64_t seed = 0;
  std::filesystem::path directory;
  std::filesystem::path metrics_csv;
  std::filesystem::path checkpoint;
};

struct ExperimentResult {
  std::vector<RunArtifacts> runs;
  std::filesystem::path aggregate_csv;
  std::filesystem::path plot_svg;
};

// Concurrency cap from FHC_AC_THREADS, else the hardware concurrency (>= 1).
unsigned thread_limit();

// Trains every seed (concurrently, capped by thread_limit()), then aggregates
// the per-seed CSVs and renders a plot. Throws the error classes above.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Per-episode mean/min/max across runs of ma_return and each ma_cost_k.
// All inputs must share one schema and one length.
void write_aggregate_csv(const std::vector<std::filesystem::path>& csvs, const std::filesystem::path& out);

}  // namespace fhcac
