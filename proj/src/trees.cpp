#include "dynamod/trees.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dynamod {

namespace {
/// Gains below this fraction of the node's residual energy are rounding noise.
constexpr double kRelSplitTol = 1e-10;

std::span<const double> row_span(const Matrix& X, Eigen::Index i) {
  return {X.data() + i * X.cols(), static_cast<std::size_t>(X.cols())};
}
}  // namespace

RegressionTree::RegressionTree(std::vector<TreeNode> nodes, int max_depth)
    : nodes_(std::move(nodes)), max_depth_(max_depth) {
  if (nodes_.empty()) throw std::invalid_argument("RegressionTree: no nodes");
}

int RegressionTree::leaf_of(std::span<const double> x) const {
  int k = 0;
  while (!nodes_[static_cast<std::size_t>(k)].is_leaf()) {
    const auto& nd = nodes_[static_cast<std::size_t>(k)];
    k = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
  }
  return k;
}

double RegressionTree::predict(std::span<const double> x) const {
  return nodes_[static_cast<std::size_t>(leaf_of(x))].value;
}

std::vector<int> RegressionTree::leaves() const {
  std::vector<int> out;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (nodes_[k].is_leaf()) out.push_back(static_cast<int>(k));
  }
  return out;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

int RegressionTree::depth() const {
  std::vector<int> level(nodes_.size(), 0);
  int best = 0;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const auto& nd = nodes_[k];
    if (nd.is_leaf()) {
      best = std::max(best, level[k]);
    } else {
      level[static_cast<std::size_t>(nd.left)] = level[k] + 1;
      level[static_cast<std::size_t>(nd.right)] = level[k] + 1;
    }
  }
  return best;
}

std::vector<std::size_t> RegressionTree::features_used() const {
  std::vector<std::size_t> out;
  for (const auto& nd : nodes_) {
    if (!nd.is_leaf()) out.push_back(static_cast<std::size_t>(nd.feature));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

FeatureIndex::FeatureIndex(const Matrix& X) : order_(static_cast<std::size_t>(X.cols())) {
  const auto n = static_cast<int>(X.rows());
  for (std::size_t a = 0; a < order_.size(); ++a) {
    auto& ord = order_[a];
    ord.resize(static_cast<std::size_t>(n));
    std::iota(ord.begin(), ord.end(), 0);
    const auto col = static_cast<Eigen::Index>(a);
    std::stable_sort(ord.begin(), ord.end(), [&](int i, int j) { return X(i, col) < X(j, col); });
  }
}

RegressionTree fit_cart(const Matrix& X, const FeatureIndex& index, const Vector& residuals,
                        const std::vector<double>& costs, const std::vector<bool>& unused,
                        const CartParams& params) {
  const auto n = static_cast<std::size_t>(X.rows());
  const auto d = static_cast<std::size_t>(X.cols());
  if (params.depth < 1) throw std::invalid_argument("fit_cart: depth must be >= 1");
  if (params.min_leaf < 1) throw std::invalid_argument("fit_cart: min_leaf must be >= 1");
  if (static_cast<std::size_t>(residuals.size()) != n || costs.size() != d || unused.size() != d ||
      index.dims() != d) {
    throw std::invalid_argument("fit_cart: dimension mismatch");
  }
  if (n == 0) throw std::invalid_argument("fit_cart: empty node");

  std::vector<TreeNode> nodes(1);
  std::vector<int> node_of(n, 0);
  std::vector<bool> in_tree(d, false);
  std::vector<int> frontier{0};

  struct Candidate {
    double gain = 0.0;
    double threshold = 0.0;
    bool valid = false;
  };

  for (int level = 0; level < params.depth && !frontier.empty(); ++level) {
    const std::size_t m = frontier.size();
    std::vector<int> slot(nodes.size(), -1);
    for (std::size_t k = 0; k < m; ++k) slot[static_cast<std::size_t>(frontier[k])] = static_cast<int>(k);

    std::vector<double> total(m, 0.0);
    std::vector<double> energy(m, 0.0);
    std::vector<int> count(m, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const int k = slot[static_cast<std::size_t>(node_of[i])];
      if (k < 0) continue;
      const double r = residuals[static_cast<Eigen::Index>(i)];
      total[static_cast<std::size_t>(k)] += r;
      energy[static_cast<std::size_t>(k)] += 0.5 * r * r;
      ++count[static_cast<std::size_t>(k)];
    }

    // Best unpenalized split per (node, feature).
    std::vector<Candidate> best(m * d);
    std::vector<int> cnt(m);
    std::vector<double> sum(m);
    std::vector<double> last(m);
    for (std::size_t a = 0; a < d; ++a) {
      std::fill(cnt.begin(), cnt.end(), 0);
      std::fill(sum.begin(), sum.end(), 0.0);
      const auto col = static_cast<Eigen::Index>(a);
      for (const int i : index.order(a)) {
        const int ks = slot[static_cast<std::size_t>(node_of[static_cast<std::size_t>(i)])];
        if (ks < 0) continue;
        const auto k = static_cast<std::size_t>(ks);
        const double v = X(i, col);
        if (cnt[k] > 0 && v > last[k]) {
          const int nl = cnt[k];
          const int nr = count[k] - nl;
          if (nl >= params.min_leaf && nr >= params.min_leaf) {
            const double sl = sum[k];
            const double sr = total[k] - sl;
            const double gain = 0.5 * (sl * sl / nl + sr * sr / nr - total[k] * total[k] / count[k]);
            auto& c = best[k * d + a];
            if (!c.valid || gain > c.gain) {
              double thr = last[k] + 0.5 * (v - last[k]);
              if (!(thr < v)) thr = last[k];
              c = {gain, thr, true};
            }
          }
        }
        ++cnt[k];
        sum[k] += residuals[i];
        last[k] = v;
      }
    }

    // Choose splits node by node; a feature first used here is free for
    // later nodes of the same tree.
    std::vector<int> next;
    std::vector<int> split_feature(nodes.size(), -1);
    for (std::size_t k = 0; k < m; ++k) {
      int best_a = -1;
      double best_net = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        const auto& c = best[k * d + a];
        if (!c.valid) continue;
        const double penalty = (unused[a] && !in_tree[a]) ? params.gamma * costs[a] : 0.0;
        const double net = c.gain - penalty;
        if (best_a < 0 || net > best_net) {
          best_a = static_cast<int>(a);
          best_net = net;
        }
      }
      if (best_a < 0 || !(best_net > kRelSplitTol * energy[k])) continue;

      const int id = frontier[k];
      const auto& c = best[k * d + static_cast<std::size_t>(best_a)];
      const int left = static_cast<int>(nodes.size());
      nodes.emplace_back();
      nodes.emplace_back();
      auto& nd = nodes[static_cast<std::size_t>(id)];
      nd.feature = best_a;
      nd.threshold = c.threshold;
      nd.left = left;
      nd.right = left + 1;
      in_tree[static_cast<std::size_t>(best_a)] = true;
      next.push_back(left);
      next.push_back(left + 1);
    }

    for (std::size_t i = 0; i < n; ++i) {
      const auto& nd = nodes[static_cast<std::size_t>(node_of[i])];
      if (nd.is_leaf()) continue;
      node_of[i] = X(static_cast<Eigen::Index>(i), nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    frontier = std::move(next);
  }

  std::vector<double> leaf_sum(nodes.size(), 0.0);
  std::vector<int> leaf_count(nodes.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    leaf_sum[static_cast<std::size_t>(node_of[i])] += residuals[static_cast<Eigen::Index>(i)];
    ++leaf_count[static_cast<std::size_t>(node_of[i])];
  }
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k].is_leaf()) {
      nodes[k].value = leaf_count[k] > 0 ? leaf_sum[k] / leaf_count[k] : 0.0;
    }
  }
  return RegressionTree(std::move(nodes), params.depth);
}

RegressionTree fit_cart(const Matrix& X, const Vector& residuals, const std::vector<double>& costs,
                        const std::vector<bool>& unused, double gamma, int depth, int min_leaf) {
  const FeatureIndex index(X);
  return fit_cart(X, index, residuals, costs, unused, CartParams{depth, min_leaf, gamma});
}

double Ensemble::score(std::span<const double> x) const {
  double s = 0.0;
  for (const auto& t : trees) s += learning_rate * t.predict(x);
  return s;
}

Vector Ensemble::scores(const Matrix& X) const {
  Vector s = Vector::Zero(X.rows());
  for (const auto& t : trees) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) s[i] += learning_rate * t.predict(row_span(X, i));
  }
  return s;
}

std::vector<std::size_t> Ensemble::features_used() const {
  std::vector<std::size_t> out;
  for (const auto& t : trees) {
    const auto f = t.features_used();
    out.insert(out.end(), f.begin(), f.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t Ensemble::leaf_count() const {
  std::size_t total = 0;
  for (const auto& t : trees) total += t.leaf_count();
  return total;
}

Vector Ensemble::leaf_weights() const {
  Vector w(static_cast<Eigen::Index>(leaf_count()));
  Eigen::Index j = 0;
  for (const auto& t : trees) {
    for (const int leaf : t.leaves()) w[j++] = learning_rate * t.nodes()[static_cast<std::size_t>(leaf)].value;
  }
  return w;
}

EnsemblePair EnsemblePair::empty(std::size_t d, double learning_rate) {
  EnsemblePair ep;
  ep.f1.learning_rate = learning_rate;
  ep.g.learning_rate = learning_rate;
  ep.unused.assign(d, true);
  return ep;
}

void EnsemblePair::mark_used(const RegressionTree& tree) {
  for (const auto a : tree.features_used()) unused[a] = false;
}

std::vector<std::size_t> EnsemblePair::features_used() const {
  std::vector<std::size_t> out;
  for (std::size_t a = 0; a < unused.size(); ++a) {
    if (!unused[a]) out.push_back(a);
  }
  return out;
}

double pair_loss_sum(const Vector& y, const Vector& q, const Vector& f1_scores, const Vector& g_scores) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    s += q[i] * logistic_loss(g_scores[i]) +
         (1.0 - q[i]) * (logistic_loss(y[i] * f1_scores[i]) + logistic_loss(-g_scores[i]));
  }
  return s;
}

std::pair<Vector, Vector> pair_negative_gradients(const Vector& y, const Vector& q, const Vector& f1_scores,
                                                  const Vector& g_scores) {
  const auto n = y.size();
  Vector rf(n);
  Vector rg(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    rf[i] = (1.0 - q[i]) * logistic_negative_gradient(y[i], f1_scores[i]);
    rg[i] = q[i] * sigmoid(-g_scores[i]) - (1.0 - q[i]) * sigmoid(g_scores[i]);
  }
  return {std::move(rf), std::move(rg)};
}

void boost_pair_round(EnsemblePair& ep, PairScores& scores, const Matrix& X, const FeatureIndex& index,
                      const Vector& y, const Vector& q, const std::vector<double>& costs,
                      const BoostParams& params) {
  const auto n = X.rows();
  if (y.size() != n || q.size() != n || scores.f1.size() != n || scores.g.size() != n) {
    throw std::invalid_argument("boost_pair_round: shape mismatch");
  }
  const CartParams cart{params.depth, params.min_leaf, params.gamma};

  // The g gradient does not depend on f1, but it is evaluated after the f1
  // update anyway to mirror the round's ordering.
  {
    const Vector rf = pair_negative_gradients(y, q, scores.f1, scores.g).first;
    RegressionTree tree = fit_cart(X, index, rf, costs, ep.unused, cart);
    for (Eigen::Index i = 0; i < n; ++i) scores.f1[i] += ep.f1.learning_rate * tree.predict(row_span(X, i));
    ep.mark_used(tree);
    ep.f1.trees.push_back(std::move(tree));
  }
  {
    const Vector rg = pair_negative_gradients(y, q, scores.f1, scores.g).second;
    RegressionTree tree = fit_cart(X, index, rg, costs, ep.unused, cart);
    for (Eigen::Index i = 0; i < n; ++i) scores.g[i] += ep.g.learning_rate * tree.predict(row_span(X, i));
    ep.mark_used(tree);
    ep.g.trees.push_back(std::move(tree));
  }
}

GreedyMiserResult fit_greedymiser(const Matrix& X, const Vector& y, const std::vector<double>& costs,
                                  double gamma, int n_trees, int depth, double learning_rate, int min_leaf) {
  if (n_trees < 1) throw std::invalid_argument("fit_greedymiser: n_trees must be >= 1");
  const auto n = X.rows();
  const FeatureIndex index(X);
  GreedyMiserResult out;
  out.ensemble.learning_rate = learning_rate;
  out.unused.assign(static_cast<std::size_t>(X.cols()), true);
  const CartParams cart{depth, min_leaf, gamma};

  Vector f = Vector::Zero(n);
  Vector r(n);
  for (int t = 0; t < n_trees; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) r[i] = logistic_negative_gradient(y[i], f[i]);
    RegressionTree tree = fit_cart(X, index, r, costs, out.unused, cart);
    for (Eigen::Index i = 0; i < n; ++i) f[i] += learning_rate * tree.predict(row_span(X, i));
    for (const auto a : tree.features_used()) out.unused[a] = false;
    out.ensemble.trees.push_back(std::move(tree));
  }
  return out;
}

PlainGbrt fit_plain_gbrt(const Matrix& X, const Vector& y, int n_trees, int depth, double learning_rate,
                         int min_leaf) {
  if (n_trees < 1) throw std::invalid_argument("fit_plain_gbrt: n_trees must be >= 1");
  const std::vector<double> zero_costs(static_cast<std::size_t>(X.cols()), 0.0);
  PlainGbrt out;
  out.ensemble = fit_greedymiser(X, y, zero_costs, 0.0, n_trees, depth, learning_rate, min_leaf).ensemble;
  out.train_scores = F0Scores::from_margins(out.ensemble.scores(X), y, F0Scores::Source::Trained);
  return out;
}

Vector leaf_transform_row(const Ensemble& ensemble, std::span<const double> x) {
  Vector phi = Vector::Zero(static_cast<Eigen::Index>(ensemble.leaf_count()) + 1);
  Eigen::Index offset = 0;
  double score = 0.0;
  for (const auto& t : ensemble.trees) {
    const auto leaves = t.leaves();
    const int leaf = t.leaf_of(x);
    const auto pos = std::lower_bound(leaves.begin(), leaves.end(), leaf) - leaves.begin();
    phi[offset + pos] = 1.0;
    offset += static_cast<Eigen::Index>(leaves.size());
    score += ensemble.learning_rate * t.nodes()[static_cast<std::size_t>(leaf)].value;
  }
  phi[offset] = std::abs(score);
  return phi;
}

Matrix leaf_transform(const Ensemble& ensemble, const Matrix& X) {
  if (ensemble.trees.empty()) throw std::invalid_argument("leaf_transform: empty ensemble");
  Matrix Phi(X.rows(), static_cast<Eigen::Index>(ensemble.leaf_count()) + 1);
  for (Eigen::Index i = 0; i < X.rows(); ++i) Phi.row(i) = leaf_transform_row(ensemble, row_span(X, i)).transpose();
  return Phi;
}

}  // namespace dynamod
