#include "fhcac/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fhcac/dp_oracle.hpp"

namespace fhcac {

double StepSize::operator()(std::int64_t n) const {
  return scale * std::pow(static_cast<double>(n + offset) + 1.0, -exponent);
}

ScheduleReport check_schedules(const StepSizeSchedules& schedules) {
  ScheduleReport report;
  const struct {
    const char* name;
    const StepSize& step;
  } all[] = {{"critic", schedules.critic}, {"actor", schedules.actor}, {"multiplier", schedules.multiplier}};
  for (const auto& [name, step] : all) {
    std::ostringstream os;
    if (!(step.scale > 0.0)) {
      os << name << " scale must be positive (got " << step.scale << ")";
    } else if (!(step.exponent <= 1.0)) {
      os << name << " exponent " << step.exponent << " > 1: sum of steps is finite";
    } else if (!(step.exponent > 0.5)) {
      os << name << " exponent " << step.exponent << " <= 1/2: sum of squared steps diverges";
    } else if (step.offset < 0) {
      os << name << " offset must be non-negative (got " << step.offset << ")";
    }
    if (!os.str().empty()) report.problems.push_back(os.str());
  }
  if (!(schedules.critic.exponent < schedules.actor.exponent))
    report.problems.push_back("actor/critic step ratio does not vanish: need critic exponent < actor exponent");
  if (!(schedules.actor.exponent < schedules.multiplier.exponent))
    report.problems.push_back("multiplier/actor step ratio does not vanish: need actor exponent < multiplier exponent");
  for (std::int64_t n : {100LL, 10'000LL, 1'000'000LL}) {
    report.ratios.push_back({n, schedules.actor(n) / schedules.critic(n),
                             schedules.multiplier(n) / schedules.actor(n)});
  }
  return report;
}

std::vector<double> TrainerState::effective_lambda() const {
  std::vector<double> out(lambda.data(), lambda.data() + lambda.size());
  if (options.convention == LambdaConvention::kNonNegative)
    for (auto& x : out) x = -x;
  return out;
}

TrainerState make_trainer_state(std::shared_ptr<const Environment> env, std::shared_ptr<const StageFeatureBasis> basis,
                                NonStationaryPolicy policy, TrainerOptions options, std::uint64_t seed) {
  if (!env || !basis) throw std::invalid_argument("trainer: null environment or basis");
  if (policy.horizon() != env->horizon() || basis->horizon() != env->horizon())
    throw std::invalid_argument("trainer: horizon mismatch between environment, policy and basis");
  if (policy.num_states() != env->num_states() || basis->num_states() != env->num_states())
    throw std::invalid_argument("trainer: state count mismatch");
  if (policy.num_actions() != env->num_actions()) throw std::invalid_argument("trainer: action count mismatch");
  if (!(options.lambda_floor < 0.0)) throw std::invalid_argument("trainer: lambda_floor must be negative");
  const auto schedule_report = check_schedules(options.schedules);
  if (!schedule_report.ok()) throw std::invalid_argument("trainer: " + schedule_report.problems.front());
  auto critic = CriticState::zeros(*basis, env->num_constraints());
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(env->num_constraints());
  return TrainerState{std::move(env), std::move(basis), std::move(policy), std::move(critic),
                      std::move(lambda), 0, options, Rng(seed)};
}

ActorUpdateResult actor_update(TrainerState& state, const Episode& episode, std::span<const double> td_errors) {
  const int horizon = state.policy.horizon();
  if (episode.horizon() != horizon || static_cast<int>(td_errors.size()) < horizon)
    throw std::invalid_argument("actor_update: episode and TD errors must cover every stage");
  const double step = state.options.schedules.actor(state.episode_index);
  ActorUpdateResult result;
  if (step == 0.0) return result;
  for (int h = 0; h < horizon; ++h) {
    if (td_errors[h] == 0.0) continue;
    result.clamped |= state.policy.ascend_score(h, episode.states[h], episode.actions[h], step * td_errors[h]);
  }
  return result;
}

namespace {

double constraint_estimate(const TrainerState& state, int k, int initial_state) {
  return state.basis->value(0, initial_state, state.critic.w[k][0]);
}

bool apply_multiplier_step(TrainerState& state, int k, double estimate) {
  const double step = state.options.schedules.multiplier(state.episode_index);
  const double floor = state.options.lambda_floor;
  double& lambda = state.lambda[k];
  if (state.options.convention == LambdaConvention::kNonPositive) {
    const double proposed = lambda - step * estimate;
    lambda = std::min(0.0, std::max(proposed, floor));
    return proposed < floor;
  }
  const double proposed = lambda + step * estimate;
  lambda = std::max(0.0, std::min(proposed, -floor));
  return proposed > -floor;
}

}  // namespace

LagrangeUpdateResult lagrange_update(TrainerState& state, const Episode& episode) {
  LagrangeUpdateResult result;
  for (int k = 0; k < static_cast<int>(state.lambda.size()); ++k)
    result.hit_floor |= apply_multiplier_step(state, k, constraint_estimate(state, k, episode.states.front()));
  return result;
}

void MetricRecorder::record(const EpisodeMetrics& metrics) {
  std::lock_guard lock(mutex_);
  records_.push_back(metrics);
}

std::vector<EpisodeMetrics> MetricRecorder::snapshot() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::size_t MetricRecorder::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

EpisodeMetrics train_episode(TrainerState& state) {
  const Environment& env = *state.env;
  const StageFeatureBasis& basis = *state.basis;
  const int m = env.num_constraints();
  const std::int64_t n = state.episode_index;

  const Episode episode = rollout(env, state.policy, state.rng);
  const std::vector<double> lambda = state.effective_lambda();

  // The multiplier step uses the episode-start constraint critics.
  std::vector<double> estimates(m);
  for (int k = 0; k < m; ++k) estimates[k] = constraint_estimate(state, k, episode.states.front());

  const double critic_step = state.options.schedules.critic(n);
  const auto deltas =
      update_lagrangian_critic(state.critic, basis, env, episode, lambda, critic_step, state.options.sweep);
  const auto actor = actor_update(state, episode, deltas);

  EpisodeMetrics metrics;
  for (int k = 0; k < m; ++k) {
    update_constraint_critic(state.critic, basis, env, episode, k, critic_step, state.options.sweep);
    metrics.lambda_floor_hit |= apply_multiplier_step(state, k, estimates[k]);
  }

  metrics.episode = n;
  metrics.total_reward = episode.total_reward();
  metrics.constraint_costs.resize(m);
  for (int k = 0; k < m; ++k) metrics.constraint_costs[k] = episode.total_constraint_cost(k);
  metrics.lambda.assign(state.lambda.data(), state.lambda.data() + m);
  metrics.theta_clamped = actor.clamped;
  for (int h = 0; h < state.policy.horizon(); ++h)
    if (state.policy.params(h).size() > 0)
      metrics.max_abs_theta = std::max(metrics.max_abs_theta, state.policy.params(h).cwiseAbs().maxCoeff());
  metrics.critic_norm = state.critic.v.front().norm();
  ++state.episode_index;
  return metrics;
}

void train(TrainerState& state, std::int64_t num_episodes, MetricSink* sink) {
  if (num_episodes < 0) throw std::invalid_argument("train: negative episode count");
  for (std::int64_t i = 0; i < num_episodes; ++i) {
    const auto metrics = train_episode(state);
    if (sink) sink->record(metrics);
  }
}

double StationarityReport::max_stage_norm() const {
  return stage_gradient_norms.empty() ? 0.0 : *std::max_element(stage_gradient_norms.begin(), stage_gradient_norms.end());
}

double StationarityReport::max_drift() const {
  return multiplier_drift.empty() ? 0.0 : *std::max_element(multiplier_drift.begin(), multiplier_drift.end());
}

Eigen::VectorXd projected_direction(const Eigen::VectorXd& point, const Eigen::VectorXd& direction, double lower,
                                    double upper) {
  if (point.size() != direction.size()) throw std::invalid_argument("projected_direction: size mismatch");
  Eigen::VectorXd out = direction;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (point[i] >= upper && out[i] > 0.0) out[i] = 0.0;
    if (point[i] <= lower && out[i] < 0.0) out[i] = 0.0;
  }
  return out;
}

StationarityReport stationarity_diagnostics(const TrainerState& state, const FiniteHorizonCMDP& model) {
  const auto lambda = state.effective_lambda();
  const auto& basis = *state.basis;
  StationarityReport report;

  const auto grad = approximate_gradient(model, state.policy, lambda, basis);
  const double bound = state.policy.param_bound();
  for (int h = 0; h < state.policy.horizon(); ++h)
    report.stage_gradient_norms.push_back(projected_direction(state.policy.params(h), grad[h], -bound, bound).norm());

  const auto fp = fixed_points(basis, model, state.policy, lambda);
  const auto beta = model.initial_distribution();
  const double floor = state.options.lambda_floor;
  for (int k = 0; k < model.num_constraints(); ++k) {
    double violation = 0.0;
    for (int s = 0; s < model.num_states(); ++s)
      if (beta[s] > 0.0) violation += beta[s] * basis.value(0, s, fp.constraints[k][0]);
    report.constraint_violation.push_back(violation);
    Eigen::VectorXd point(1), direction(1);
    point[0] = state.lambda[k];
    Eigen::VectorXd drift;
    if (state.options.convention == LambdaConvention::kNonPositive) {
      direction[0] = -violation;
      drift = projected_direction(point, direction, floor, 0.0);
    } else {
      direction[0] = violation;
      drift = projected_direction(point, direction, 0.0, -floor);
    }
    report.multiplier_drift.push_back(std::abs(drift[0]));
  }
  return report;
}

}  // namespace fhcac
