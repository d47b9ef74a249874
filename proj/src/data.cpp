#include "dynamod/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "csv_util.hpp"

namespace dynamod {

void Dataset::validate() const {
  if (X.rows() < 1 || X.cols() < 1) {
    throw DataError("dataset must have at least one row and one feature");
  }
  if (y.size() != X.rows()) {
    throw DataError("label count does not match row count");
  }
  if (feature_names.size() != dims()) {
    throw DataError("feature name count does not match column count");
  }
  if (!X.allFinite()) {
    throw DataError("feature matrix contains NaN or Inf");
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != -1.0 && y[i] != 1.0) {
      throw DataError("label at row " + std::to_string(i) + " is not -1/+1");
    }
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(rows[k]);
    out.X.row(static_cast<Eigen::Index>(k)) = X.row(r);
    out.y[static_cast<Eigen::Index>(k)] = y[r];
  }
  out.feature_names = feature_names;
  return out;
}

double CostVector::total() const { return std::accumulate(c.begin(), c.end(), 0.0); }

std::vector<std::string> default_feature_names(std::size_t d) {
  std::vector<std::string> names;
  names.reserve(d);
  for (std::size_t a = 0; a < d; ++a) names.push_back("f" + std::to_string(a + 1));
  return names;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": missing header row");
  const auto header = detail::split_csv_line(line);
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) {
    throw DataError(path.string() + ": no label column '" + label_column + "'");
  }
  const auto label_idx = static_cast<std::size_t>(label_it - header.begin());

  Dataset ds;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (k != label_idx) ds.feature_names.push_back(header[k]);
  }

  std::vector<double> values;
  std::vector<double> labels;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError(path.string() + ": row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    }
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const auto v = detail::parse_double(cells[k]);
      if (!v || !std::isfinite(*v)) {
        throw DataError(path.string() + ": unparseable value '" + cells[k] + "' at row " +
                        std::to_string(row) + ", column \"" + header[k] + "\"");
      }
      if (k == label_idx) {
        if (*v == 0.0 || *v == -1.0) {
          labels.push_back(-1.0);
        } else if (*v == 1.0) {
          labels.push_back(1.0);
        } else {
          throw DataError(path.string() + ": label '" + cells[k] + "' at row " +
                          std::to_string(row) + " is not in {-1,0,1}");
        }
      } else {
        values.push_back(*v);
      }
    }
  }
  if (row == 0) throw DataError(path.string() + ": no data rows");

  const auto d = static_cast<Eigen::Index>(ds.feature_names.size());
  ds.X = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(row), d);
  ds.y = Eigen::Map<Vector>(labels.data(), static_cast<Eigen::Index>(row));
  ds.validate();
  return ds;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& name : ds.feature_names) out << name << ',';
  out << "label\n";
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
    for (Eigen::Index a = 0; a < ds.X.cols(); ++a) {
      out << detail::format_double(ds.X(i, a)) << ',';
    }
    out << (ds.y[i] > 0 ? "1" : "-1") << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

CostVector load_costs(const std::optional<std::filesystem::path>& path,
                      const std::vector<std::string>& feature_names) {
  if (!path) return CostVector::unit(feature_names.size());

  std::ifstream in(*path);
  if (!in) throw DataError("cannot open " + path->string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path->string() + ": missing header row");
  const auto header = detail::split_csv_line(line);
  if (header.size() != 2 || header[0] != "feature" || header[1] != "cost") {
    throw DataError(path->string() + ": header must be 'feature,cost'");
  }

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t a = 0; a < feature_names.size(); ++a) index.emplace(feature_names[a], a);

  std::vector<double> c(feature_names.size(), 0.0);
  std::vector<bool> seen(feature_names.size(), false);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 2) throw DataError(path->string() + ": malformed row '" + line + "'");
    const auto it = index.find(cells[0]);
    if (it == index.end()) throw DataError(path->string() + ": unknown feature '" + cells[0] + "'");
    const auto v = detail::parse_double(cells[1]);
    if (!v || !std::isfinite(*v)) {
      throw DataError(path->string() + ": bad cost for '" + cells[0] + "'");
    }
    if (*v < 0.0) throw DataError(path->string() + ": negative cost for '" + cells[0] + "'");
    c[it->second] = *v;
    seen[it->second] = true;
  }
  for (std::size_t a = 0; a < seen.size(); ++a) {
    if (!seen[a]) throw DataError(path->string() + ": missing feature '" + feature_names[a] + "'");
  }
  CostVector costs{std::move(c)};
  if (!(costs.total() > 0.0)) throw DataError(path->string() + ": total cost must be positive");
  return costs;
}

void write_costs(const CostVector& costs, const std::vector<std::string>& feature_names,
                 const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "feature,cost\n";
  for (std::size_t a = 0; a < costs.size(); ++a) {
    out << feature_names[a] << ',' << detail::format_double(costs[a]) << '\n';
  }
}

Dataset gen_synthetic(std::uint64_t seed) {
  struct Cluster {
    double cx, cy;
    int count;
    double label;
  };
  constexpr Cluster clusters[] = {
      {1.0, 1.0, 20, -1.0}, {-1.0, 1.0, 20, 1.0}, {-1.0, -1.0, 15, -1.0}, {-1.0, -3.0, 15, 1.0}};
  constexpr double sd = 0.01;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sd);

  Dataset ds;
  ds.X.resize(70, 2);
  ds.y.resize(70);
  Eigen::Index i = 0;
  for (const auto& cl : clusters) {
    for (int k = 0; k < cl.count; ++k, ++i) {
      ds.X(i, 0) = cl.cx + noise(rng);
      ds.X(i, 1) = cl.cy + noise(rng);
      ds.y[i] = cl.label;
    }
  }
  ds.feature_names = default_feature_names(2);
  return ds;
}

Dataset gen_nonlinear(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (d < 6) throw std::invalid_argument("gen_nonlinear needs d >= 6");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Dataset ds;
  ds.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  ds.y.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
    for (Eigen::Index a = 0; a < ds.X.cols(); ++a) ds.X(i, a) = normal(rng);
    const auto x = ds.X.row(i);
    const double s = 1.5 * std::sin(1.5 * x[0]) * std::cos(x[1]) + x[2] * x[3] +
                     0.5 * (x[4] * x[4] - 1.0) + 0.3 * x[5];
    ds.y[i] = (s + 0.3 * normal(rng)) > 0.0 ? 1.0 : -1.0;
  }
  ds.feature_names = default_feature_names(d);
  return ds;
}

Dataset gen_wide(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (d < 10) throw std::invalid_argument("gen_wide needs d >= 10");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Informative weights decay geometrically; the tail is pure noise.
  std::vector<double> w(d, 0.0);
  for (std::size_t a = 0; a < std::min<std::size_t>(d, 12); ++a) w[a] = 2.0 * std::pow(0.75, a);

  Dataset ds;
  ds.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  ds.y.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index a = 0; a < ds.X.cols(); ++a) {
      ds.X(i, a) = normal(rng);
      s += w[static_cast<std::size_t>(a)] * ds.X(i, a);
    }
    s += 1.2 * ds.X(i, 0) * ds.X(i, 1) - 0.8 * std::abs(ds.X(i, 2));
    ds.y[i] = (s + 0.5 * normal(rng)) > 0.0 ? 1.0 : -1.0;
  }
  ds.feature_names = default_feature_names(d);
  return ds;
}

std::tuple<std::vector<std::size_t>, std::vector<std::size_t>, std::vector<std::size_t>>
split_indices(std::size_t n, const SplitSpec& spec) {
  if (!(spec.train > 0.0 && spec.val > 0.0 && spec.test > 0.0)) {
    throw std::invalid_argument("split fractions must be positive");
  }
  if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must sum to 1");
  }
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(spec.val * static_cast<double>(n)));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw std::invalid_argument("split of " + std::to_string(n) + " rows leaves an empty part");
  }

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(spec.seed);
  // Fisher-Yates with an explicit draw so the permutation does not depend on
  // the standard library's shuffle implementation.
  for (std::size_t k = n; k > 1; --k) {
    const std::size_t j = static_cast<std::size_t>(rng() % k);
    std::swap(perm[k - 1], perm[j]);
  }
  std::vector<std::size_t> tr(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> va(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                              perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  std::vector<std::size_t> te(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  return {std::move(tr), std::move(va), std::move(te)};
}

std::tuple<Dataset, Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  auto [tr, va, te] = split_indices(ds.rows(), spec);
  return {ds.subset(tr), ds.subset(va), ds.subset(te)};
}

}  // namespace dynamod
