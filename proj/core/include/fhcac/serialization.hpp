#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "fhcac/critic.hpp"
#include "fhcac/dp_oracle.hpp"
#include "fhcac/gridworld.hpp"
#include "fhcac/mdp_model.hpp"
#include "fhcac/policy.hpp"
#include "fhcac/trainer.hpp"

// JSON documents for every persisted object. Doubles are written in
// round-trip form, so finite values survive save/load bit-exactly. Loaders
// throw std::runtime_error (via nlohmann::json::exception or explicitly) on
// malformed documents.
namespace fhcac {

using nlohmann::json;

json model_to_json(const FiniteHorizonCMDP& model);
FiniteHorizonCMDP model_from_json(const json& doc);

json features_to_json(const PreferenceFeatures& features);
PreferenceFeatures features_from_json(const json& doc);

json policy_to_json(const NonStationaryPolicy& policy);
NonStationaryPolicy policy_from_json(const json& doc);

json basis_to_json(const StageFeatureBasis& basis);
StageFeatureBasis basis_from_json(const json& doc);

json critic_to_json(const CriticState& critic);
CriticState critic_from_json(const json& doc);

// Policy, critic, multipliers and episode counter of a training run.
json checkpoint_to_json(const TrainerState& state);

json gridworld_to_json(const GridWorldConfig& config);
GridWorldConfig gridworld_from_json(const json& doc);

json template_to_json(const GridWorldTemplate& tmpl);
GridWorldTemplate template_from_json(const json& doc);

json solution_to_json(const ExactSolution& solution);
json reference_to_json(const ConstrainedReference& reference);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& doc);

}  // namespace fhcac
