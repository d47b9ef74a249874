#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dynamod/baselines.hpp"
#include "dynamod/dynamod.hpp"
#include "dynamod/serialize.hpp"

namespace dynamod {

enum class Algorithm { Lin, Gbrt, Lstsq, Greedy, Confidence, Uniform };

std::string to_string(Algorithm a);
/// Throws std::invalid_argument on an unknown name.
Algorithm parse_algorithm(const std::string& name);

/// `count` points from lo to hi, evenly spaced in log10 (log_grid) or
/// linearly (linear_grid). count = 1 yields {lo}.
std::vector<double> log_grid(double lo, double hi, int count);
std::vector<double> linear_grid(double lo, double hi, int count);

/// Grid values override gamma, p_full and learning_rate of `train`. For
/// lstsq, confidence and uniform the p_full grid holds target routed
/// fractions; for greedy the points come from the class-weight grid instead.
struct SweepConfig {
  Algorithm algorithm = Algorithm::Lin;
  std::vector<double> gammas{0.0};
  std::vector<double> p_fulls{0.5};
  std::vector<double> lrs{0.1};
  std::optional<double> budget;
  TrainConfig train;
  GreedyConfig greedy = GreedyConfig::defaults();
  int threads = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SweepData {
  Dataset train;
  Dataset val;
  Dataset test;
  F0Scores f0_train;
  F0Scores f0_val;
  F0Scores f0_test;
  CostVector costs;
  /// Cheap boosted model for the local-remote setting. When set, lstsq runs
  /// on its leaf features and confidence/uniform gate it; otherwise lstsq runs
  /// on raw features and uniform uses an L2 logistic f1.
  std::optional<Ensemble> f1_base;
};

struct SweepPoint {
  std::string algorithm;
  RunParams params;
  std::uint64_t seed = 0;
  TradeoffPoint val;
  TradeoffPoint test;
  double objective = 0.0;  ///< final training objective; NaN for baselines
  bool converged = false;
  std::string error;       ///< non-empty when the point failed
  std::optional<AdaptiveSystem> system;

  bool ok() const { return error.empty(); }
};

struct SweepReport {
  std::vector<SweepPoint> points;
  std::vector<std::size_t> frontier;  ///< indices into points, validation cost ascending
  std::optional<std::size_t> budget_choice;
};

/// Indices of the non-dominated points (maximize accuracy, minimize cost),
/// sorted by cost with ties kept in input order.
std::vector<std::size_t> pareto_frontier(const std::vector<TradeoffPoint>& points);

/// Trains and evaluates every grid point on a pool of cfg.threads workers.
/// A failing point is recorded with its error and excluded from selection.
SweepReport run_sweep(const SweepData& data, const SweepConfig& cfg);

/// One validation row and one test row per successful point; failed points
/// get a validation row with NaN metrics.
void write_sweep_csv(const SweepReport& report, const std::filesystem::path& path);
void write_frontier_csv(const SweepReport& report, const std::filesystem::path& path);
Json sweep_manifest(const SweepReport& report, const SweepConfig& cfg);

/// `git describe` of the tree the library was built from.
std::string build_tag();

}  // namespace dynamod
