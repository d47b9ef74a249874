#pragma once

#include <span>
#include <utility>
#include <vector>

#include "dynamod/data.hpp"
#include "dynamod/losses.hpp"

namespace dynamod {

/// Internal nodes carry a feature and threshold (x[feature] <= threshold goes
/// left); leaves carry a value and feature == -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

class RegressionTree {
 public:
  RegressionTree() = default;
  RegressionTree(std::vector<TreeNode> nodes, int max_depth);

  double predict(std::span<const double> x) const;
  /// Node id of the leaf x falls into.
  int leaf_of(std::span<const double> x) const;
  /// Leaf node ids in ascending order; this is the leaf-feature column order.
  std::vector<int> leaves() const;
  std::size_t leaf_count() const;
  int depth() const;
  int max_depth() const { return max_depth_; }
  /// Sorted, unique features appearing at internal nodes.
  std::vector<std::size_t> features_used() const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }

 private:
  std::vector<TreeNode> nodes_;
  int max_depth_ = 0;
};

/// Per-feature row orders, sorted by value with ties broken by row index.
/// Build once per training matrix and share across trees.
class FeatureIndex {
 public:
  explicit FeatureIndex(const Matrix& X);
  const std::vector<int>& order(std::size_t feature) const { return order_[feature]; }
  std::size_t dims() const { return order_.size(); }

 private:
  std::vector<std::vector<int>> order_;
};

struct CartParams {
  int depth = 4;
  int min_leaf = 1;
  double gamma = 0.0;
};

/// Greedy regression tree on `residuals` with squared-error impurity. Using a
/// feature whose `unused` flag is set costs gamma * costs[a] once per tree, at
/// the first node that splits on it; nodes are expanded breadth first, left to
/// right. A split is kept only if it lowers the penalized impurity. Ties go to
/// the lowest feature index, then the lowest threshold.
RegressionTree fit_cart(const Matrix& X, const FeatureIndex& index, const Vector& residuals,
                        const std::vector<double>& costs, const std::vector<bool>& unused,
                        const CartParams& params);

RegressionTree fit_cart(const Matrix& X, const Vector& residuals, const std::vector<double>& costs,
                        const std::vector<bool>& unused, double gamma, int depth, int min_leaf);

/// Sum of learning_rate * tree(x) over the trees.
struct Ensemble {
  std::vector<RegressionTree> trees;
  double learning_rate = 0.1;

  double score(std::span<const double> x) const;
  Vector scores(const Matrix& X) const;
  std::vector<std::size_t> features_used() const;
  std::size_t leaf_count() const;
  /// learning_rate * leaf value, in leaf-feature column order.
  Vector leaf_weights() const;
};

/// Cheap predictor and gate ensembles with the shared acquisition flags:
/// unused[a] is true until some accepted tree in either ensemble splits on a.
struct EnsemblePair {
  Ensemble f1;
  Ensemble g;
  std::vector<bool> unused;

  static EnsemblePair empty(std::size_t d, double learning_rate);
  void mark_used(const RegressionTree& tree);
  std::vector<std::size_t> features_used() const;
};

/// Negative gradient of log(1 + exp(-y f)) with respect to f.
inline double logistic_negative_gradient(double y, double f) { return y * sigmoid(-y * f); }

/// Sum over rows of q softplus(-g) + (1-q)(loss(y f1) + softplus(g)).
double pair_loss_sum(const Vector& y, const Vector& q, const Vector& f1_scores, const Vector& g_scores);

/// Per-row negative derivatives of pair_loss_sum with respect to the f1 and
/// g scores.
std::pair<Vector, Vector> pair_negative_gradients(const Vector& y, const Vector& q, const Vector& f1_scores,
                                                  const Vector& g_scores);

struct BoostParams {
  double gamma = 0.0;
  int depth = 4;
  int min_leaf = 1;
};

/// Training-set scores kept in step with an EnsemblePair.
struct PairScores {
  Vector f1;
  Vector g;
};

/// One round: fit and append an f1 tree, update flags, then fit and append a
/// g tree against the same q, update flags.
void boost_pair_round(EnsemblePair& ep, PairScores& scores, const Matrix& X, const FeatureIndex& index,
                      const Vector& y, const Vector& q, const std::vector<double>& costs,
                      const BoostParams& params);

/// Cost-aware gradient boosting of the logistic loss. The returned flags
/// mark features used by the ensemble.
struct GreedyMiserResult {
  Ensemble ensemble;
  std::vector<bool> unused;
};

GreedyMiserResult fit_greedymiser(const Matrix& X, const Vector& y, const std::vector<double>& costs,
                                  double gamma, int n_trees, int depth, double learning_rate, int min_leaf = 1);

struct PlainGbrt {
  Ensemble ensemble;
  F0Scores train_scores;
};

/// Cost-blind boosted logistic ensemble, used as the internal full model.
PlainGbrt fit_plain_gbrt(const Matrix& X, const Vector& y, int n_trees, int depth, double learning_rate,
                         int min_leaf = 1);

/// One-hot leaf membership per tree followed by |ensemble score|.
Matrix leaf_transform(const Ensemble& ensemble, const Matrix& X);
/// Single-row variant of leaf_transform.
Vector leaf_transform_row(const Ensemble& ensemble, std::span<const double> x);

}  // namespace dynamod
