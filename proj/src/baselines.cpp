#include "dynamod/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "dynamod/linear.hpp"

namespace dynamod {

namespace {

Matrix select_columns(const Matrix& X, const std::vector<std::size_t>& cols) {
  Matrix out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(cols[j]));
  }
  return out;
}

// Embeds weights over `cols` (intercept last) into a full d + 1 vector.
Vector expand(const Vector& w, const std::vector<std::size_t>& cols, std::size_t d) {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(d) + 1);
  for (std::size_t j = 0; j < cols.size(); ++j) out[static_cast<Eigen::Index>(cols[j])] = w[static_cast<Eigen::Index>(j)];
  out[static_cast<Eigen::Index>(d)] = w[w.size() - 1];
  return out;
}

}  // namespace

GreedyConfig GreedyConfig::defaults() {
  GreedyConfig cfg;
  for (int k = 0; k < 20; ++k) cfg.c_grid.push_back(std::pow(10.0, -3.0 + 5.0 * k / 19.0));
  for (int k = 1; k <= 9; ++k) cfg.class_weights.push_back(0.1 * k);
  return cfg;
}

std::vector<GreedySystem> greedy_l1_pipeline(const Dataset& train, const GreedyConfig& cfg) {
  if (cfg.c_grid.empty() || cfg.class_weights.empty()) throw std::invalid_argument("greedy_l1_pipeline: empty grid");
  for (const double w : cfg.class_weights) {
    if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("greedy_l1_pipeline: class weights must lie in [0, 1]");
  }
  const auto d = train.dims();
  const auto n = train.X.rows();

  std::vector<GreedySystem> out;
  for (const auto& support : fit_l1_logistic_path(train.X, train.y, cfg.c_grid)) {
    if (support.empty()) {
      std::clog << "greedy_l1_pipeline: skipping empty support\n";
      continue;
    }
    const Matrix Xs = select_columns(train.X, support);
    const Vector f1_s = fit_logistic(Xs, train.y, cfg.l2);
    const Vector f1 = expand(f1_s, support, d);

    // Pseudo-label +1 marks rows f1 gets right.
    Vector right(n);
    const Vector s = linear_scores(Xs, f1_s);
    for (Eigen::Index i = 0; i < n; ++i) right[i] = (s[i] > 0.0 ? 1.0 : -1.0) == train.y[i] ? 1.0 : -1.0;

    for (const double cw : cfg.class_weights) {
      Vector weights(n);
      for (Eigen::Index i = 0; i < n; ++i) weights[i] = right[i] > 0.0 ? 1.0 - cw : cw;
      Vector gate;
      if (weights.sum() > 0.0) {
        gate = -expand(fit_weighted_logistic(Xs, right, weights, cfg.l2), support, d);
      } else {
        gate = Vector::Zero(static_cast<Eigen::Index>(d) + 1);
      }
      GreedySystem gs;
      gs.system.gate = LinearScorer{gate};
      gs.system.f1 = LinearScorer{f1};
      gs.system.algorithm = "greedy";
      gs.system.params = {0.0, cw, 0.0};
      gs.support = support;
      gs.class_weight = cw;
      out.push_back(std::move(gs));
    }
  }
  return out;
}

AdaptiveSystem confidence_gate(const Ensemble& f1, double tau) {
  if (!(tau >= 0.0)) throw std::invalid_argument("confidence_gate: tau must be >= 0");
  const auto L = static_cast<Eigen::Index>(f1.leaf_count());
  Vector w = Vector::Zero(L + 2);
  w[L] = -1.0;
  w[L + 1] = tau;
  AdaptiveSystem sys;
  sys.gate = LeafLinearScorer{f1, std::move(w)};
  sys.f1 = EnsembleScorer{f1};
  sys.algorithm = "confidence";
  return sys;
}

double margin_quantile(const Ensemble& f1, const Matrix& X, double q) {
  if (X.rows() == 0 || !(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("margin_quantile: bad input");
  std::vector<double> m(static_cast<std::size_t>(X.rows()));
  const Vector s = f1.scores(X);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::abs(s[static_cast<Eigen::Index>(i)]);
  std::sort(m.begin(), m.end());
  const double pos = q * static_cast<double>(m.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, m.size() - 1);
  return m[lo] + (pos - static_cast<double>(lo)) * (m[hi] - m[lo]);
}

AdaptiveSystem uniform_gate(const Scorer& f1, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("uniform_gate: p must lie in [0, 1]");
  AdaptiveSystem sys;
  sys.gate = RandomScorer{p, seed};
  sys.f1 = f1;
  sys.algorithm = "uniform";
  sys.params = {0.0, p, 0.0};
  return sys;
}

}  // namespace dynamod
