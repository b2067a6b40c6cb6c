#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fhcac/critic.hpp"
#include "fhcac/environment.hpp"
#include "fhcac/mdp_model.hpp"
#include "fhcac/policy.hpp"
#include "fhcac/rng.hpp"

namespace fhcac {

// scale * (n + 1 + offset)^(-exponent). A positive offset starts the
// schedule further down its decay without changing its tail exponent.
struct StepSize {
  double exponent = 1.0;
  double scale = 1.0;
  std::int64_t offset = 0;
  double operator()(std::int64_t n) const;
};

// Critic (a), actor (b) and multiplier (c) schedules.
struct StepSizeSchedules {
  StepSize critic{0.6, 1.0};
  StepSize actor{0.8, 1.0};
  StepSize multiplier{1.0, 1.0};
};

struct ScheduleRatioSample {
  std::int64_t n = 0;
  double actor_over_critic = 0.0;
  double multiplier_over_actor = 0.0;
};

struct ScheduleReport {
  std::vector<std::string> problems;
  std::vector<ScheduleRatioSample> ratios;
  bool ok() const { return problems.empty(); }
};

// For power-law schedules the summability conditions reduce to
// 1/2 < exponent <= 1 for each schedule, and the timescale separation to
// strictly increasing exponents critic < actor < multiplier.
ScheduleReport check_schedules(const StepSizeSchedules& schedules);

// kNonPositive: lambda in [P, 0], lambda <- min(0, max(lambda - c * est, P)),
//               Lagrangian cost r + lambda * g.
// kNonNegative: mirrored; lambda in [0, -P], lambda <- clamp(lambda + c * est),
//               Lagrangian cost r - lambda * g.
enum class LambdaConvention { kNonPositive, kNonNegative };

struct TrainerOptions {
  StepSizeSchedules schedules;
  double lambda_floor = -100.0;  // P
  LambdaConvention convention = LambdaConvention::kNonPositive;
  CriticSweep sweep = CriticSweep::kSynchronous;
};

struct TrainerState {
  std::shared_ptr<const Environment> env;
  std::shared_ptr<const StageFeatureBasis> basis;
  NonStationaryPolicy policy;
  CriticState critic;
  Eigen::VectorXd lambda;  // stored in the configured convention
  std::int64_t episode_index = 0;
  TrainerOptions options;
  Rng rng;

  // Multipliers as they enter c^lambda (always the non-positive convention).
  std::vector<double> effective_lambda() const;
};

// Fresh state: zero policy parameters, zero critics, zero multipliers.
TrainerState make_trainer_state(std::shared_ptr<const Environment> env, std::shared_ptr<const StageFeatureBasis> basis,
                                NonStationaryPolicy policy, TrainerOptions options, std::uint64_t seed);

struct ActorUpdateResult {
  bool clamped = false;  // some coordinate hit +-theta_max
};

// theta_h <- Gamma[theta_h + b(n) psi_h(s_h, a_h) delta_h] for h < H, with
// delta_h the episode-start TD errors.
ActorUpdateResult actor_update(TrainerState& state, const Episode& episode, std::span<const double> td_errors);

struct LagrangeUpdateResult {
  bool hit_floor = false;  // some multiplier was clamped at P (or -P mirrored)
};

// lambda_k <- (lambda_k - c(n) w^(k)_0' phi_0(s_0))^- using the state's
// current constraint critic, which must still hold the episode-start weights.
LagrangeUpdateResult lagrange_update(TrainerState& state, const Episode& episode);

struct EpisodeMetrics {
  std::int64_t episode = 0;
  double total_reward = 0.0;
  std::vector<double> constraint_costs;
  std::vector<double> lambda;  // after this episode's update
  bool theta_clamped = false;
  bool lambda_floor_hit = false;
  double max_abs_theta = 0.0;
  double critic_norm = 0.0;  // ||v_0||
};

class MetricSink {
 public:
  virtual ~MetricSink() = default;
  virtual void record(const EpisodeMetrics& metrics) = 0;
};

// In-memory sink. Safe to share between concurrent runs.
class MetricRecorder final : public MetricSink {
 public:
  void record(const EpisodeMetrics& metrics) override;
  std::vector<EpisodeMetrics> snapshot() const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::vector<EpisodeMetrics> records_;
};

// Runs one episode of the actor-critic loop and returns its metrics.
EpisodeMetrics train_episode(TrainerState& state);

// Runs `num_episodes` episodes, forwarding metrics to `sink` when non-null.
void train(TrainerState& state, std::int64_t num_episodes, MetricSink* sink = nullptr);

struct StationarityReport {
  std::vector<double> stage_gradient_norms;  // ||Gamma'(theta_h, g_h(theta))||
  std::vector<double> multiplier_drift;      // |projected lambda drift| per constraint
  std::vector<double> constraint_violation;  // sum_s beta(s) Xi^(k)_0' phi_0(s)
  double max_stage_norm() const;
  double max_drift() const;
};

// Directional derivative of the box projection at `point` along `direction`.
Eigen::VectorXd projected_direction(const Eigen::VectorXd& point, const Eigen::VectorXd& direction, double lower,
                                    double upper);

// Exact (model-based) check of how close the current iterate is to the
// stationary sets: the projected approximate policy gradient per stage and
// the projected multiplier drift per constraint.
StationarityReport stationarity_diagnostics(const TrainerState& state, const FiniteHorizonCMDP& model);

}  // namespace fhcac
