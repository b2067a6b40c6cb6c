#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fhcac/environment.hpp"
#include "fhcac/mdp_model.hpp"
#include "fhcac/policy.hpp"

namespace fhcac {

// Per-stage state features phi_h(s), h = 0..H, together with the reachable
// sets S_h the stage matrices Phi_h are restricted to.
class StageFeatureBasis {
 public:
  // features[h] is x_h by |S|; column s holds phi_h(s).
  StageFeatureBasis(std::vector<Eigen::MatrixXd> features, std::vector<std::vector<int>> reachable);

  // One-hot over S_h at every stage, so Phi_h is the identity on S_h.
  static StageFeatureBasis tabular(int num_states, std::vector<std::vector<int>> reachable);

  // Same span as tabular, but the first coordinate is a constant shared by
  // all of S_h and the remaining ones indicate S_h minus its first state.
  // Offsets common to every state (such as -alpha in the terminal constraint
  // cost) are then learned from every visit instead of state by state.
  static StageFeatureBasis offset_tabular(int num_states, std::vector<std::vector<int>> reachable);

  int horizon() const { return static_cast<int>(features_.size()) - 1; }
  int num_states() const { return static_cast<int>(features_.front().cols()); }
  int dim(int h) const { return static_cast<int>(features_.at(h).rows()); }
  bool tabular() const { return tabular_; }

  auto phi(int h, int s) const { return features_[h].col(s); }
  double value(int h, int s, const Eigen::VectorXd& weights) const { return phi(h, s).dot(weights); }

  const std::vector<int>& reachable(int h) const { return reachable_.at(h); }
  const std::vector<std::vector<int>>& reachable_sets() const { return reachable_; }
  const std::vector<Eigen::MatrixXd>& feature_matrices() const { return features_; }

  // Phi_h: |S_h| by x_h, rows phi_h(s)' for s in S_h.
  Eigen::MatrixXd stage_matrix(int h) const;

 private:
  std::vector<Eigen::MatrixXd> features_;
  std::vector<std::vector<int>> reachable_;
  bool tabular_ = false;
};

struct BasisReport {
  std::vector<std::string> problems;
  std::vector<int> bad_stages;
  bool ok() const { return problems.empty(); }
  std::string summary() const;
};

inline constexpr double kRankTolerance = 1e-10;

// Full column rank of every Phi_h (singular values above kRankTolerance),
// x_h <= |S_h|, and agreement of the basis' reachable sets with the model.
BasisReport validate_basis(const StageFeatureBasis& basis, const FiniteHorizonCMDP& model,
                           const NonStationaryPolicy& policy);

// v_h (Lagrangian critic) and w^(k)_h (constraint critics) for h = 0..H.
struct CriticState {
  std::vector<Eigen::VectorXd> v;
  std::vector<std::vector<Eigen::VectorXd>> w;  // [k][h]

  static CriticState zeros(const StageFeatureBasis& basis, int num_constraints);
  int num_constraints() const { return static_cast<int>(w.size()); }
  bool finite() const;
};

// How the within-episode critic sweep sees the next-stage weights.
//   kSynchronous - every TD error uses the episode-start weights.
//   kSequential  - stages are processed H, H-1, ..., 0 and each TD error
//                  bootstraps from the just-updated next-stage weights.
enum class CriticSweep { kSynchronous, kSequential };

// delta_h = c^lambda_h(s, a, s') + v_{h+1}' phi_{h+1}(s') - v_h' phi_h(s)
double td_error_lagrangian(const CriticState& critic, const StageFeatureBasis& basis, const Environment& env,
                           std::span<const double> lambda, int h, int s, int a, int next);
// xi^(k)_h = g^(k)_h(s, a, s') + w^(k)_{h+1}' phi_{h+1}(s') - w^(k)_h' phi_h(s)
double td_error_constraint(const CriticState& critic, const StageFeatureBasis& basis, const Environment& env,
                           int k, int h, int s, int a, int next);

// One TD sweep over the episode. Returns the errors that drove the update:
// entries 0..H-1 are the stage TD errors, entry H the terminal residual.
std::vector<double> update_lagrangian_critic(CriticState& critic, const StageFeatureBasis& basis,
                                             const Environment& env, const Episode& episode,
                                             std::span<const double> lambda, double step,
                                             CriticSweep sweep = CriticSweep::kSynchronous);
std::vector<double> update_constraint_critic(CriticState& critic, const StageFeatureBasis& basis,
                                             const Environment& env, const Episode& episode, int k, double step,
                                             CriticSweep sweep = CriticSweep::kSynchronous);

// Limits of the TD iterates for frozen (theta, lambda), solved backwards:
//   Lambda_H = (Phi' D Phi)^-1 Phi' D C_H
//   Lambda_h = (Phi_h' D_h Phi_h)^-1 (Phi_h' D_h P_h Phi_{h+1} Lambda_{h+1} + Phi_h' D_h C_h)
// and likewise Xi^(k) with the constraint costs (terminal cost shifted by -alpha).
struct CriticFixedPoints {
  std::vector<Eigen::VectorXd> lagrangian;               // Lambda_h
  std::vector<std::vector<Eigen::VectorXd>> constraints;  // Xi^(k)_h, [k][h]
};

CriticFixedPoints fixed_points(const StageFeatureBasis& basis, const FiniteHorizonCMDP& model,
                               const NonStationaryPolicy& policy, std::span<const double> lambda);

// Norms of the expected TD vector fields f_h evaluated at the given weights,
// computed by direct summation over (s, a, s').
struct FixedPointResiduals {
  std::vector<double> lagrangian;
  std::vector<std::vector<double>> constraints;
  double max() const;
};

FixedPointResiduals fixed_point_residuals(const StageFeatureBasis& basis, const FiniteHorizonCMDP& model,
                                          const NonStationaryPolicy& policy, std::span<const double> lambda,
                                          const CriticFixedPoints& weights);

}  // namespace fhcac
