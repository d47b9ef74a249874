#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "dynamod/data.hpp"
#include "dynamod/linear.hpp"
#include "dynamod/losses.hpp"
#include "dynamod/projection.hpp"
#include "dynamod/system.hpp"
#include "dynamod/trees.hpp"

namespace dynamod {

enum class Distance { Kl, Symmetrized };

/// Start of the linear loop: f1 from an L2 logistic fit and g = 0, or every
/// feature weight of both models set to 1 with zero intercepts.
enum class LinInit { Logistic, Ones };

struct TrainConfig {
  double p_full = 0.5;
  double gamma = 0.0;
  int max_outer = 50;
  /// Stop when the relative objective change drops below this; 0 runs
  /// every outer iteration.
  double tolerance = 1e-5;

  // linear
  ProxConfig prox;
  LinInit lin_init = LinInit::Logistic;
  double init_l2 = 1.0;  ///< penalty of the initial f1 logistic fit

  // boosted trees
  int init_trees = 10;  ///< GreedyMiser trees used to initialize f1
  int rounds = 5;       ///< paired boosting rounds per outer iteration
  int depth = 4;
  int min_leaf = 1;
  double learning_rate = 0.1;

  // least squares
  AdmmConfig admm;
  double ridge = 1e-3;  ///< gate least-squares ridge
  double f1_l2 = 1e-3;  ///< f1 weighted-logistic penalty

  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  AdaptiveSystem system;
  GatingPosterior posterior;
  /// Objective after every half step (linear) or every outer iteration.
  std::vector<double> trace;
  /// Objective just before and just after each q update, from the second
  /// outer iteration on.
  std::vector<std::pair<double, double>> q_steps;
  int iterations = 0;
  bool converged = false;
};

/// Mean over rows of q(-log p0) + (1-q) loss(y f1) + D(q, gate score), plus
/// the model's penalty: the cost-weighted group norm for linear pairs, gamma times the cost of used features for
/// ensembles, and nothing for other scorers.
double objective_opt2(const AdaptiveSystem& sys, const Vector& q, const Dataset& data, const F0Scores& f0,
                      double gamma, const CostVector& costs, Distance distance);

/// Alternates the closed-form q update with the group-lasso fit of (g, f1).
/// The start follows cfg.lin_init unless `init` is given.
TrainResult train_dynamod_lin(const Dataset& train, const F0Scores& f0, const CostVector& costs,
                              const TrainConfig& cfg, const std::optional<LinearPair>& init = std::nullopt);

/// Alternates the q update with `rounds` paired boosting rounds. f1 starts
/// from `init_trees` GreedyMiser trees, g from the empty ensemble.
TrainResult train_dynamod_gbrt(const Dataset& train, const F0Scores& f0, const CostVector& costs,
                               const TrainConfig& cfg);

/// Symmetrized-distance variant on raw features: ADMM q update, least squares
/// on logit(q) for g, weighted logistic with weights 1 - q for f1.
TrainResult train_dynamod_lstsq(const Dataset& train, const F0Scores& f0, const TrainConfig& cfg);

/// Same loop over leaf_transform(base, x). f1 starts at the base ensemble's
/// own leaf weights and g at the confidence gate tau - |f1(x)|.
TrainResult train_dynamod_lstsq_leaf(const Dataset& train, const F0Scores& f0, const Ensemble& base, double tau,
                                     const TrainConfig& cfg);

}  // namespace dynamod
