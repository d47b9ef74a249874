#include "dynamod/system.hpp"

#include <algorithm>
#include <stdexcept>

namespace dynamod {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<std::size_t> merge_sorted(std::vector<std::size_t> a, const std::vector<std::size_t>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

double leaf_linear_score(const LeafLinearScorer& s, std::span<const double> x) {
  const Vector phi = leaf_transform_row(s.base, x);
  const auto k = phi.size();
  double out = s.w[k];
  for (Eigen::Index j = 0; j < k; ++j) out += s.w[j] * phi[j];
  return out;
}

}  // namespace

double hashed_uniform(std::uint64_t seed, std::size_t row) {
  const std::uint64_t h = splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(row));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double Scorer::score(std::span<const double> x, std::size_t row) const {
  return std::visit(Overloaded{
                        [&](const LinearScorer& s) { return linear_score(s.w, x); },
                        [&](const EnsembleScorer& s) { return s.ensemble.score(x); },
                        [&](const LeafLinearScorer& s) { return leaf_linear_score(s, x); },
                        [&](const RandomScorer& s) { return s.p - hashed_uniform(s.seed, row); },
                    },
                    v_);
}

Vector Scorer::scores(const Matrix& X) const {
  if (const auto* ens = std::get_if<EnsembleScorer>(&v_)) return ens->ensemble.scores(X);
  // Linear scorers also go row by row so batch and single-row scores agree bitwise.
  Vector out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out[i] = score({X.data() + i * X.cols(), static_cast<std::size_t>(X.cols())}, static_cast<std::size_t>(i));
  }
  return out;
}

std::vector<std::size_t> Scorer::features_used() const {
  return std::visit(
      Overloaded{
          [](const LinearScorer& s) {
            std::vector<std::size_t> out;
            for (Eigen::Index a = 0; a + 1 < s.w.size(); ++a) {
              if (s.w[a] != 0.0) out.push_back(static_cast<std::size_t>(a));
            }
            return out;
          },
          [](const EnsembleScorer& s) { return s.ensemble.features_used(); },
          [](const LeafLinearScorer& s) {
            // A tree is read if any of its leaf weights is live, or if the
            // margin column is, since that needs the whole base score.
            const auto L = static_cast<Eigen::Index>(s.base.leaf_count());
            const bool margin_live = s.w[L] != 0.0;
            std::vector<std::size_t> out;
            Eigen::Index offset = 0;
            for (const auto& t : s.base.trees) {
              const auto k = static_cast<Eigen::Index>(t.leaf_count());
              if (margin_live || (s.w.segment(offset, k).array() != 0.0).any()) {
                out = merge_sorted(std::move(out), t.features_used());
              }
              offset += k;
            }
            return out;
          },
          [](const RandomScorer&) { return std::vector<std::size_t>{}; },
      },
      v_);
}

std::vector<std::size_t> AdaptiveSystem::features_used() const {
  return merge_sorted(gate.features_used(), f1.features_used());
}

Prediction predict(const AdaptiveSystem& sys, std::span<const double> x, std::size_t row, double y,
                   const F0Scores& f0, const CostVector& costs) {
  Prediction p;
  p.routed = sys.gate.score(x, row) > 0.0;
  if (p.routed) {
    p.label = f0.predicted_label(row, y);
    p.cost = costs.total();
  } else {
    p.label = sys.f1.score(x, row) > 0.0 ? 1.0 : -1.0;
    for (const auto a : sys.features_used()) p.cost += costs[a];
  }
  return p;
}

TradeoffPoint evaluate(const AdaptiveSystem& sys, const Dataset& data, const F0Scores& f0, const CostVector& costs) {
  const std::size_t n = data.rows();
  if (n == 0 || f0.size() != n || costs.size() != data.dims()) {
    throw std::invalid_argument("evaluate: data, f0 scores and costs disagree in size");
  }
  const Vector gate = sys.gate.scores(data.X);
  const Vector f1 = sys.f1.scores(data.X);
  double unrouted_cost = 0.0;
  for (const auto a : sys.features_used()) unrouted_cost += costs[a];

  std::size_t correct = 0;
  std::size_t routed = 0;
  double cost = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double y = data.y[k];
    double label;
    if (gate[k] > 0.0) {
      ++routed;
      label = f0.predicted_label(i, y);
      cost += costs.total();
    } else {
      label = f1[k] > 0.0 ? 1.0 : -1.0;
      cost += unrouted_cost;
    }
    if (label == y) ++correct;
  }
  TradeoffPoint out;
  out.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  // When every row costs the same the mean is that cost, not a rounded sum.
  if (routed == n || unrouted_cost == costs.total()) {
    out.avg_cost = costs.total();
  } else if (routed == 0) {
    out.avg_cost = unrouted_cost;
  } else {
    out.avg_cost = cost / static_cast<double>(n);
  }
  out.frac_to_f0 = static_cast<double>(routed) / static_cast<double>(n);
  out.params = sys.params;
  return out;
}

}  // namespace dynamod
