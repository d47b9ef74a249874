#pragma once

#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dynamod/data.hpp"
#include "dynamod/linear.hpp"
#include "dynamod/losses.hpp"
#include "dynamod/trees.hpp"

namespace dynamod {

/// w over raw features, intercept last.
struct LinearScorer {
  Vector w;
};

struct EnsembleScorer {
  Ensemble ensemble;
};

/// Linear model over leaf_transform(base, x) followed by an intercept, so w
/// has base.leaf_count() + 2 entries.
struct LeafLinearScorer {
  Ensemble base;
  Vector w;
};

/// Score p - u with u uniform in [0, 1), a pure function of (seed, row).
struct RandomScorer {
  double p = 0.0;
  std::uint64_t seed = 0;
};

class Scorer {
 public:
  using Variant = std::variant<LinearScorer, EnsembleScorer, LeafLinearScorer, RandomScorer>;

  Scorer() : v_(LinearScorer{Vector::Zero(1)}) {}
  template <class T>
    requires std::constructible_from<Variant, T&&>
  Scorer(T&& s) : v_(std::forward<T>(s)) {}  // NOLINT(google-explicit-constructor)

  /// `row` is only consulted by RandomScorer.
  double score(std::span<const double> x, std::size_t row) const;
  Vector scores(const Matrix& X) const;
  /// Sorted features the scorer reads.
  std::vector<std::size_t> features_used() const;

  const Variant& variant() const { return v_; }
  template <class T>
  const T* get_if() const {
    return std::get_if<T>(&v_);
  }

 private:
  Variant v_;
};

/// uniform [0, 1) draw keyed by (seed, row).
double hashed_uniform(std::uint64_t seed, std::size_t row);

struct RunParams {
  double gamma = 0.0;
  double p_full = 0.0;
  double lr = 0.0;
};

/// Gate plus cheap predictor; the full model is represented by F0Scores at
/// evaluation time. Route to f0 iff the gate score is strictly positive.
struct AdaptiveSystem {
  Scorer gate;
  Scorer f1;
  std::string algorithm;
  RunParams params;

  /// Sorted union of gate and f1 features.
  std::vector<std::size_t> features_used() const;
};

struct Prediction {
  double label = 0.0;
  bool routed = false;
  double cost = 0.0;
};

/// f0's label comes from its score on the example, which needs the true
/// label `y` because F0Scores store log p(y | x).
Prediction predict(const AdaptiveSystem& sys, std::span<const double> x, std::size_t row, double y,
                   const F0Scores& f0, const CostVector& costs);

struct TradeoffPoint {
  double accuracy = 0.0;
  double avg_cost = 0.0;
  double frac_to_f0 = 0.0;
  RunParams params;
};

TradeoffPoint evaluate(const AdaptiveSystem& sys, const Dataset& data, const F0Scores& f0, const CostVector& costs);

}  // namespace dynamod
