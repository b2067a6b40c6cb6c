#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fhcac/rng.hpp"

namespace fhcac {

// State-action features x_h(s, a) defining linear preferences theta_h' x_h(s, a).
//
// Two layouts are supported:
//   tabular - one-hot over (reachable state, action) pairs of each stage, so
//             y_h = |S_h| * |A|. States outside S_h get the zero vector and
//             hence the uniform distribution.
//   dense   - arbitrary per-stage matrices with rows indexed s * |A| + a.
class PreferenceFeatures {
 public:
  enum class Kind { kTabular, kDense };

  static PreferenceFeatures tabular(int num_states, int num_actions,
                                    const std::vector<std::vector<int>>& reachable, int horizon);
  static PreferenceFeatures dense(int num_states, int num_actions,
                                  std::vector<Eigen::MatrixXd> stage_features);

  Kind kind() const { return kind_; }
  std::string id() const { return kind_ == Kind::kTabular ? "tabular" : "dense"; }
  int horizon() const { return horizon_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int dim(int h) const { return dims_.at(h); }

  // out[a] = theta' x_h(s, a) for every action.
  void preferences(int h, int s, const Eigen::VectorXd& theta, Eigen::Ref<Eigen::VectorXd> out) const;
  // target += scale * x_h(s, a)
  void add_feature(int h, int s, int a, double scale, Eigen::Ref<Eigen::VectorXd> target) const;
  Eigen::VectorXd feature(int h, int s, int a) const;

  // Tabular only: the stage's reachable states in slot order.
  const std::vector<std::vector<int>>& tabular_states() const { return states_; }
  // Dense only.
  const std::vector<Eigen::MatrixXd>& dense_features() const { return dense_; }

 private:
  PreferenceFeatures() = default;

  Kind kind_ = Kind::kTabular;
  int horizon_ = 0;
  int num_states_ = 0;
  int num_actions_ = 0;
  std::vector<int> dims_;
  std::vector<std::vector<int>> states_;  // tabular: S_h listing
  std::vector<std::vector<int>> slots_;   // tabular: state -> slot or -1
  std::vector<Eigen::MatrixXd> dense_;
};

// Non-stationary Gibbs policy: one softmax over linear preferences per stage,
// mu_h(s, a) proportional to exp(theta_h' x_h(s, a) / temperature).
// Parameters always lie in the box [-param_bound, param_bound].
class NonStationaryPolicy {
 public:
  explicit NonStationaryPolicy(std::shared_ptr<const PreferenceFeatures> features,
                               double temperature = 1.0, double param_bound = 10.0);

  int horizon() const { return features_->horizon(); }
  int num_states() const { return features_->num_states(); }
  int num_actions() const { return features_->num_actions(); }
  double temperature() const { return temperature_; }
  double param_bound() const { return param_bound_; }
  const PreferenceFeatures& features() const { return *features_; }
  const std::shared_ptr<const PreferenceFeatures>& shared_features() const { return features_; }

  const Eigen::VectorXd& params(int h) const { return theta_.at(h); }
  // Stores the projection of `theta`; returns true if any coordinate was clamped.
  bool set_params(int h, const Eigen::VectorXd& theta);

  void action_distribution(int h, int s, Eigen::Ref<Eigen::VectorXd> out) const;
  Eigen::VectorXd action_distribution(int h, int s) const;
  int sample_action(Rng& rng, int h, int s) const;
  double log_probability(int h, int s, int a) const;

  // psi_h(s, a) = grad log mu_h(s, a) = (x_h(s, a) - E_mu[x_h(s, .)]) / temperature.
  Eigen::VectorXd score(int h, int s, int a) const;
  void add_score(int h, int s, int a, double scale, Eigen::Ref<Eigen::VectorXd> target) const;

  // Gamma: per-coordinate clamp onto the parameter box.
  Eigen::VectorXd project_params(const Eigen::VectorXd& theta) const;

  // theta_h <- Gamma[theta_h + step * psi_h(s, a)]. Returns true if the
  // projection clamped a coordinate.
  bool ascend_score(int h, int s, int a, double step);

 private:
  void check_stage(int h) const;

  std::shared_ptr<const PreferenceFeatures> features_;
  double temperature_;
  double param_bound_;
  std::vector<Eigen::VectorXd> theta_;
};

// Shorthand for the default policy class on a given set of reachable states.
NonStationaryPolicy make_tabular_policy(int num_states, int num_actions,
                                        const std::vector<std::vector<int>>& reachable, int horizon,
                                        double temperature = 1.0, double param_bound = 10.0);

}  // namespace fhcac
