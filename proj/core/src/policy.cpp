#include "fhcac/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fhcac {

PreferenceFeatures PreferenceFeatures::tabular(int num_states, int num_actions,
                                               const std::vector<std::vector<int>>& reachable,
                                               int horizon) {
  if (num_states <= 0 || num_actions <= 0 || horizon < 0)
    throw std::invalid_argument("tabular features: bad dimensions");
  if (static_cast<int>(reachable.size()) < horizon)
    throw std::invalid_argument("tabular features: need a reachable set per decision stage");
  PreferenceFeatures f;
  f.kind_ = Kind::kTabular;
  f.horizon_ = horizon;
  f.num_states_ = num_states;
  f.num_actions_ = num_actions;
  for (int h = 0; h < horizon; ++h) {
    std::vector<int> slots(num_states, -1);
    std::vector<int> states;
    for (int s : reachable[h]) {
      if (s < 0 || s >= num_states) throw std::invalid_argument("tabular features: state out of range");
      if (slots[s] >= 0) continue;
      slots[s] = static_cast<int>(states.size());
      states.push_back(s);
    }
    f.dims_.push_back(static_cast<int>(states.size()) * num_actions);
    f.states_.push_back(std::move(states));
    f.slots_.push_back(std::move(slots));
  }
  return f;
}

PreferenceFeatures PreferenceFeatures::dense(int num_states, int num_actions,
                                             std::vector<Eigen::MatrixXd> stage_features) {
  if (num_states <= 0 || num_actions <= 0) throw std::invalid_argument("dense features: bad dimensions");
  PreferenceFeatures f;
  f.kind_ = Kind::kDense;
  f.horizon_ = static_cast<int>(stage_features.size());
  f.num_states_ = num_states;
  f.num_actions_ = num_actions;
  for (const auto& m : stage_features) {
    if (m.rows() != static_cast<Eigen::Index>(num_states) * num_actions)
      throw std::invalid_argument("dense features: expected |S|*|A| rows per stage");
    f.dims_.push_back(static_cast<int>(m.cols()));
  }
  f.dense_ = std::move(stage_features);
  return f;
}

void PreferenceFeatures::preferences(int h, int s, const Eigen::VectorXd& theta,
                                     Eigen::Ref<Eigen::VectorXd> out) const {
  if (kind_ == Kind::kTabular) {
    const int slot = slots_[h][s];
    if (slot < 0) {
      out.setZero();
      return;
    }
    out = theta.segment(static_cast<Eigen::Index>(slot) * num_actions_, num_actions_);
    return;
  }
  out = dense_[h].middleRows(static_cast<Eigen::Index>(s) * num_actions_, num_actions_) * theta;
}

void PreferenceFeatures::add_feature(int h, int s, int a, double scale,
                                     Eigen::Ref<Eigen::VectorXd> target) const {
  if (kind_ == Kind::kTabular) {
    const int slot = slots_[h][s];
    if (slot >= 0) target[static_cast<Eigen::Index>(slot) * num_actions_ + a] += scale;
    return;
  }
  target += scale * dense_[h].row(static_cast<Eigen::Index>(s) * num_actions_ + a).transpose();
}

Eigen::VectorXd PreferenceFeatures::feature(int h, int s, int a) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dims_.at(h));
  add_feature(h, s, a, 1.0, x);
  return x;
}

NonStationaryPolicy::NonStationaryPolicy(std::shared_ptr<const PreferenceFeatures> features,
                                         double temperature, double param_bound)
    : features_(std::move(features)), temperature_(temperature), param_bound_(param_bound) {
  if (!features_) throw std::invalid_argument("policy: null features");
  if (!(temperature_ > 0.0)) throw std::invalid_argument("policy: temperature must be positive");
  if (!(param_bound_ > 0.0)) throw std::invalid_argument("policy: param_bound must be positive");
  for (int h = 0; h < features_->horizon(); ++h) theta_.push_back(Eigen::VectorXd::Zero(features_->dim(h)));
}

void NonStationaryPolicy::check_stage(int h) const {
  if (h < 0 || h >= horizon()) throw std::out_of_range("policy: stage " + std::to_string(h) + " out of range");
}

bool NonStationaryPolicy::set_params(int h, const Eigen::VectorXd& theta) {
  check_stage(h);
  if (theta.size() != features_->dim(h)) throw std::invalid_argument("policy: parameter dimension mismatch");
  theta_[h] = project_params(theta);
  return theta_[h] != theta;
}

void NonStationaryPolicy::action_distribution(int h, int s, Eigen::Ref<Eigen::VectorXd> out) const {
  check_stage(h);
  features_->preferences(h, s, theta_[h], out);
  out /= temperature_;
  const double top = out.maxCoeff();
  out = (out.array() - top).exp();
  out /= out.sum();
}

Eigen::VectorXd NonStationaryPolicy::action_distribution(int h, int s) const {
  Eigen::VectorXd mu(num_actions());
  action_distribution(h, s, mu);
  return mu;
}

int NonStationaryPolicy::sample_action(Rng& rng, int h, int s) const {
  const Eigen::VectorXd mu = action_distribution(h, s);
  return rng.categorical({mu.data(), static_cast<std::size_t>(mu.size())});
}

double NonStationaryPolicy::log_probability(int h, int s, int a) const {
  check_stage(h);
  Eigen::VectorXd pref(num_actions());
  features_->preferences(h, s, theta_[h], pref);
  pref /= temperature_;
  const double top = pref.maxCoeff();
  return pref[a] - top - std::log((pref.array() - top).exp().sum());
}

Eigen::VectorXd NonStationaryPolicy::score(int h, int s, int a) const {
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(features_->dim(h));
  add_score(h, s, a, 1.0, psi);
  return psi;
}

void NonStationaryPolicy::add_score(int h, int s, int a, double scale,
                                    Eigen::Ref<Eigen::VectorXd> target) const {
  const Eigen::VectorXd mu = action_distribution(h, s);
  const double c = scale / temperature_;
  features_->add_feature(h, s, a, c, target);
  for (int b = 0; b < num_actions(); ++b) features_->add_feature(h, s, b, -c * mu[b], target);
}

Eigen::VectorXd NonStationaryPolicy::project_params(const Eigen::VectorXd& theta) const {
  return theta.cwiseMax(-param_bound_).cwiseMin(param_bound_);
}

bool NonStationaryPolicy::ascend_score(int h, int s, int a, double step) {
  check_stage(h);
  add_score(h, s, a, step, theta_[h]);
  bool clamped = false;
  for (auto& x : theta_[h]) {
    if (x > param_bound_) {
      x = param_bound_;
      clamped = true;
    } else if (x < -param_bound_) {
      x = -param_bound_;
      clamped = true;
    }
  }
  return clamped;
}

NonStationaryPolicy make_tabular_policy(int num_states, int num_actions,
                                        const std::vector<std::vector<int>>& reachable, int horizon,
                                        double temperature, double param_bound) {
  auto features = std::make_shared<const PreferenceFeatures>(
      PreferenceFeatures::tabular(num_states, num_actions, reachable, horizon));
  return NonStationaryPolicy(std::move(features), temperature, param_bound);
}

}  // namespace fhcac
