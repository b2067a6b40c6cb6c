#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fhcac/mdp_model.hpp"
#include "fhcac/policy.hpp"

namespace fhcac {

class StageFeatureBasis;

// Exact finite-horizon computations on dense models. These are the ground
// truth the learning components are tested against; everything here is a
// pure function of its inputs.

// mu_h(s, a) for h < H, one |S| x |A| table per stage.
using DecisionRule = std::vector<Eigen::MatrixXd>;
// action[h][s]
using DeterministicPolicy = std::vector<std::vector<int>>;
// Per-stage vectors indexed by h = 0..H-1 (gradients, baselines).
using StageVectors = std::vector<Eigen::VectorXd>;

DecisionRule decision_rule(const NonStationaryPolicy& policy);
DecisionRule decision_rule(const DeterministicPolicy& policy, int num_actions);

struct OccupationMeasures {
  std::vector<Eigen::VectorXd> d;          // d_h(s), h = 0..H
  std::vector<std::vector<int>> reachable;  // S_h = {s : d_h(s) > 0}
};

OccupationMeasures occupation_measures(const FiniteHorizonCMDP& model, const DecisionRule& rule);
OccupationMeasures occupation_measures(const FiniteHorizonCMDP& model, const NonStationaryPolicy& policy);

struct ExactSolution {
  std::vector<Eigen::VectorXd> V;               // V^{pi,lambda}_h, h = 0..H
  std::vector<Eigen::MatrixXd> Q;               // Q^{pi,lambda}_h, h = 0..H-1
  std::vector<std::vector<Eigen::VectorXd>> W;  // W^{pi,(k)}_h, [k][h], h = 0..H
  std::vector<Eigen::VectorXd> d;               // occupation measures, h = 0..H
  double J = 0.0;                               // objective
  Eigen::VectorXd constraint_values;            // S^(k)
  double lagrangian = 0.0;                      // sum_s beta(s) V_0(s)
};

ExactSolution backward_induction(const FiniteHorizonCMDP& model, const DecisionRule& rule,
                                 std::span<const double> lambda);
ExactSolution backward_induction(const FiniteHorizonCMDP& model, const NonStationaryPolicy& policy,
                                 std::span<const double> lambda);

struct PolicyValue {
  double J = 0.0;
  Eigen::VectorXd constraint_values;
};

PolicyValue evaluate_policy(const FiniteHorizonCMDP& model, const DecisionRule& rule);
PolicyValue evaluate_policy(const FiniteHorizonCMDP& model, const NonStationaryPolicy& policy);

// L(pi, lambda) = J + sum_k lambda_k (S^(k) - alpha_k).
double lagrangian_value(const FiniteHorizonCMDP& model, const NonStationaryPolicy& policy,
                        std::span<const double> lambda);

// grad_{theta_h} L = sum_s d_h(s) sum_a grad mu_h(s, a) (Q_h(s, a) - b_h(s)).
// An empty baseline means b = 0.
StageVectors exact_gradient(const FiniteHorizonCMDP& model, const NonStationaryPolicy& policy,
                            std::span<const double> lambda, const StageVectors& baseline = {});

// Central differences of lagrangian_value in every parameter coordinate.
StageVectors finite_difference_gradient(const FiniteHorizonCMDP& model, const NonStationaryPolicy& policy,
                                        std::span<const double> lambda, double epsilon = 1e-5);

// g_h(theta): the policy gradient with the critic fixed points standing in
// for the value functions (both as bootstrap and as baseline).
StageVectors approximate_gradient(const FiniteHorizonCMDP& model, const NonStationaryPolicy& policy,
                                  std::span<const double> lambda, const StageFeatureBasis& basis);

double relative_error(double a, double b, double floor = 1e-8);

struct GradientComparison {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  int worst_stage = -1;
  int worst_coordinate = -1;
};

GradientComparison compare_gradients(const StageVectors& a, const StageVectors& b, double floor = 1e-8);

// Deterministic policy maximizing the Lagrangian objective by backward
// induction on c^lambda. Ties go to the lowest action id.
DeterministicPolicy greedy_policy(const FiniteHorizonCMDP& model, std::span<const double> lambda);

struct ReferenceOptions {
  int grid_points = 101;         // per multiplier coordinate
  double lambda_floor = -100.0;  // grid spans [lambda_floor, 0]
  double feasibility_tolerance = 1e-9;
};

struct ReferenceGridPoint {
  Eigen::VectorXd lambda;
  double J = 0.0;
  Eigen::VectorXd constraint_values;
  bool feasible = false;
};

struct ConstrainedReference {
  bool feasible = false;
  double best_J = 0.0;
  Eigen::VectorXd best_constraint_values;
  Eigen::VectorXd best_lambda;
  DeterministicPolicy best_policy;
  std::vector<ReferenceGridPoint> grid;
  // Grid neighbours where S^(k) increased as lambda_k became more negative.
  std::vector<std::string> monotonicity_notes;
};

// Desk-scale constrained optimum: best objective among the lambda-greedy
// deterministic policies on a multiplier grid that satisfy every constraint.
ConstrainedReference constrained_reference(const FiniteHorizonCMDP& model, const ReferenceOptions& options = {});

}  // namespace fhcac
