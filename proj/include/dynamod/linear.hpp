#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dynamod/data.hpp"

namespace dynamod {

/// Weight vectors are laid out as d feature weights followed by the
/// intercept, so every linear model here has d + 1 coefficients.
double linear_score(const Vector& w, std::span<const double> x);
Vector linear_scores(const Matrix& X, const Vector& w);

/// Column-wise standardization fitted on one split and reused on others.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& X);
  static Standardizer identity(std::size_t d);
  Matrix apply(const Matrix& X) const;
  /// Weights fitted on standardized columns, expressed on raw columns.
  Vector to_raw(const Vector& w_std) const;
  /// Inverse of to_raw.
  Vector to_standardized(const Vector& w_raw) const;
};

/// Gate and cheap predictor over one shared feature space.
struct LinearPair {
  Vector g;
  Vector f1;

  static LinearPair zeros(std::size_t d) { return {Vector::Zero(d + 1), Vector::Zero(d + 1)}; }
  std::size_t dims() const { return static_cast<std::size_t>(g.size()) - 1; }
  /// Features with a nonzero coefficient in either model; intercepts excluded.
  std::vector<std::size_t> used_features() const;
};

struct ProxConfig {
  int max_iters = 5000;
  double tolerance = 1e-10;  ///< relative objective change
  double init_step = 1.0;
  double backtrack = 0.5;
  bool standardize = true;

  void validate() const;
};

struct LogisticOptions {
  bool standardize = true;
  int max_iters = 5000;
  double grad_tol = 1e-6;
  std::optional<Vector> init;  ///< raw-space start; zero when absent
};

/// (1/N) sum_i w_i log(1 + exp(-y_i f(x_i))) + (l2/2)||f||^2 with an
/// unpenalized intercept. `grad` may be null.
double weighted_logistic_objective(const Matrix& X, const Vector& y, const Vector& weights, double l2,
                                   const Vector& w, Vector* grad);

Vector fit_weighted_logistic(const Matrix& X, const Vector& y, const Vector& weights, double l2,
                             const LogisticOptions& opts = {});

/// Unweighted fit through the weighted solver with unit weights.
Vector fit_logistic(const Matrix& X, const Vector& y, double l2, const LogisticOptions& opts = {});

/// L1-regularized logistic regression for each C in the grid (penalty
/// ||w||_1 / (C N) against the mean loss), followed by nested supports from
/// thresholding |w| at every distinct nonzero magnitude. Supports are returned
/// de-duplicated, in order of first appearance, with ascending indices.
std::vector<std::vector<std::size_t>> fit_l1_logistic_path(const Matrix& X, const Vector& y,
                                                          const std::vector<double>& c_grid);

/// Smooth part of the joint objective for fixed q:
///   (1/N) sum_i (1-q_i)(loss(y_i f1_i) + softplus(g_i)) + q_i softplus(-g_i).
/// `grad` may be null.
double joint_smooth_objective(const Matrix& X, const Vector& y, const Vector& q, const LinearPair& p,
                              LinearPair* grad);

/// gamma * sum_a c_a * sqrt(g_a^2 + f1_a^2).
double group_penalty(const LinearPair& p, double gamma, const std::vector<double>& costs);

/// Proximal map of t * ||v||_2 on one group.
std::pair<double, double> group_soft_threshold(std::pair<double, double> v, double t);

struct GroupLassoResult {
  LinearPair pair;           ///< raw-space coefficients
  std::vector<double> trace; ///< objective per accepted iteration, first entry at the start point
  int iterations = 0;
  bool converged = false;
};

/// Proximal gradient with backtracking on the joint objective with the
/// cost-weighted group penalty on raw coefficients. Standardization, when on,
/// only preconditions the iterations. Each accepted step is a descent step.
GroupLassoResult fit_joint_group_lasso(const Matrix& X, const Vector& y, const Vector& q, double gamma,
                                       const std::vector<double>& costs, const ProxConfig& cfg = {},
                                       const std::optional<LinearPair>& init = std::nullopt);

/// Minimizes sum_i (t_i - w.phi_i)^2 + ridge ||w||^2. Phi already contains
/// any intercept column. Throws std::runtime_error on a singular system with
/// ridge = 0.
Vector fit_least_squares(const Matrix& Phi, const Vector& targets, double ridge);

}  // namespace dynamod
