#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

namespace dynamod {

/// Row-major so a single example is a contiguous span.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Raised for malformed or inconsistent input data (CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense binary classification data. Labels are stored as -1/+1.
struct Dataset {
  Matrix X;
  Vector y;
  std::vector<std::string> feature_names;

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(X.cols()); }

  /// Checks the shape, finiteness and label invariants; throws DataError.
  void validate() const;

  /// Rows selected in the given order.
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

/// Per-feature acquisition costs, aligned with a Dataset's columns.
struct CostVector {
  std::vector<double> c;

  std::size_t size() const { return c.size(); }
  double operator[](std::size_t a) const { return c[a]; }
  double total() const;

  static CostVector unit(std::size_t d) { return CostVector{std::vector<double>(d, 1.0)}; }
};

struct SplitSpec {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
  std::uint64_t seed = 0;
};

std::vector<std::string> default_feature_names(std::size_t d);

/// Reads a comma-separated file with a header row. The label column may hold
/// {-1,+1} or {0,1}; 0 is mapped to -1.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column = "label");

/// Writes features followed by a `label` column in {-1,+1}; values are
/// printed with round-trip precision.
void write_csv(const Dataset& ds, const std::filesystem::path& path);

/// Loads a `feature,cost` file. With no path every feature costs 1.
CostVector load_costs(const std::optional<std::filesystem::path>& path,
                      const std::vector<std::string>& feature_names);

void write_costs(const CostVector& costs, const std::vector<std::string>& feature_names,
                 const std::filesystem::path& path);

/// The four-cluster 2-D problem: centers (1,1), (-1,1), (-1,-1), (-1,-3) with
/// 20/20/15/15 points, noise sd 0.01. Clusters 1 and 3 are labelled -1.
Dataset gen_synthetic(std::uint64_t seed);

/// Nonlinear binary task used for the local/remote experiments: a smooth
/// decision surface over the first few of `d` standard normal features with
/// label noise, so deep ensembles beat shallow ones by a visible margin.
Dataset gen_nonlinear(std::size_t n, std::size_t d, std::uint64_t seed);

/// Wider task with `d` features where label information is spread unevenly
/// across features; stands in for particle-identification style data.
Dataset gen_wide(std::size_t n, std::size_t d, std::uint64_t seed);

/// Deterministic shuffled partition into train/val/test.
std::tuple<Dataset, Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec);

/// Row indices of each part, in the same order `split` uses.
std::tuple<std::vector<std::size_t>, std::vector<std::size_t>, std::vector<std::size_t>>
split_indices(std::size_t n, const SplitSpec& spec);

}  // namespace dynamod
