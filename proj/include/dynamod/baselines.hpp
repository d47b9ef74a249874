#pragma once

#include <cstdint>
#include <vector>

#include "dynamod/data.hpp"
#include "dynamod/system.hpp"
#include "dynamod/trees.hpp"

namespace dynamod {

struct GreedyConfig {
  std::vector<double> c_grid;             ///< inverse L1 strengths for the support path
  std::vector<double> class_weights;      ///< weight on the "f1 wrong" pseudo-label
  double l2 = 1.0;                        ///< penalty of the f1 and gate logistic fits

  /// 20 log-spaced C values in [1e-3, 1e2] and 9 weights in [0.1, 0.9].
  static GreedyConfig defaults();
};

struct GreedySystem {
  AdaptiveSystem system;
  std::vector<std::size_t> support;
  double class_weight = 0.0;
};

/// For every support on the L1 path: an L2 logistic f1 on the support, then
/// one gate per class weight, trained on the support against the indicator
/// that f1 misclassifies the row. The gate score is positive where the gate
/// predicts a miss, so those rows go to f0. Empty supports are skipped.
std::vector<GreedySystem> greedy_l1_pipeline(const Dataset& train, const GreedyConfig& cfg);

/// Gate score tau - |f1(x)|; f1 is the ensemble itself.
AdaptiveSystem confidence_gate(const Ensemble& f1, double tau);

/// Empirical q-quantile of |f1(x)| over the rows of X (linear interpolation).
double margin_quantile(const Ensemble& f1, const Matrix& X, double q);

/// Routes each row to f0 with probability p, keyed by (seed, row index).
AdaptiveSystem uniform_gate(const Scorer& f1, double p, std::uint64_t seed);

}  // namespace dynamod
