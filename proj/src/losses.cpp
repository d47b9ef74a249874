#include "dynamod/losses.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "csv_util.hpp"

namespace dynamod {

namespace {
constexpr double kLogSumExpSwitch = 30.0;

double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }
}  // namespace

double logistic_loss(double margin) {
  if (margin > kLogSumExpSwitch) return std::exp(-margin);  // log1p(e^-m) ~ e^-m
  if (margin < -kLogSumExpSwitch) return -margin + std::log1p(std::exp(margin));
  return std::log1p(std::exp(-margin));
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double logit(double q) {
  q = clamp_prob(q);
  return std::log(q) - std::log1p(-q);
}

double kl_bernoulli(double q0, double p0) {
  q0 = std::clamp(q0, 0.0, 1.0);
  p0 = clamp_prob(p0);
  const double kl = xlogx(q0) - q0 * std::log(p0) + xlogx(1.0 - q0) - (1.0 - q0) * std::log1p(-p0);
  return std::max(kl, 0.0);
}

double kl_bernoulli_logit(double q0, double score) {
  q0 = std::clamp(q0, 0.0, 1.0);
  // -log sigmoid(s) = softplus(-s), -log(1 - sigmoid(s)) = softplus(s)
  const double kl = -entropy(q0) + q0 * logistic_loss(score) + (1.0 - q0) * logistic_loss(-score);
  return std::max(kl, 0.0);
}

double sym_logodds_dist(double q0, double score) {
  const double r = logit(q0) - score;
  return r * r;
}

double entropy(double q0) {
  q0 = std::clamp(q0, 0.0, 1.0);
  return -xlogx(q0) - xlogx(1.0 - q0);
}

JensenPair composite_nll(double q0, double g_score, double loss_f1, double logp_f0) {
  // log of p0 * exp(logp_f0) + p1 * exp(-loss_f1), with log p0 = -softplus(-g).
  const double a = -logistic_loss(g_score) + logp_f0;
  const double b = -logistic_loss(-g_score) - loss_f1;
  const double m = std::max(a, b);
  const double log_mix = m + std::log(std::exp(a - m) + std::exp(b - m));

  JensenPair out;
  out.lhs = -log_mix;
  out.rhs = q0 * (-logp_f0) + (1.0 - q0) * loss_f1 + kl_bernoulli_logit(q0, g_score);
  return out;
}

double F0Scores::neg_loglik(std::size_t i) const { return std::min(-logp[i], kMaxNegLogLik); }

bool F0Scores::correct(std::size_t i) const { return logp[i] > -std::log(2.0); }

F0Scores F0Scores::from_margins(const Vector& scores, const Vector& y, Source source) {
  F0Scores out;
  out.source = source;
  out.logp.resize(static_cast<std::size_t>(scores.size()));
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    out.logp[static_cast<std::size_t>(i)] = -logistic_loss(y[i] * scores[i]);
  }
  return out;
}

F0Scores load_f0_scores(const std::filesystem::path& path, std::size_t expected_rows) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": missing header row");
  const auto header = detail::split_csv_line(line);
  if (header.size() != 2 || header[0] != "row_index" || header[1] != "logp") {
    throw DataError(path.string() + ": header must be 'row_index,logp'");
  }
  F0Scores f0;
  f0.source = F0Scores::Source::Loaded;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 2) throw DataError(path.string() + ": malformed row '" + line + "'");
    const auto idx = detail::parse_double(cells[0]);
    const auto lp = detail::parse_double(cells[1]);
    if (!idx || *idx != static_cast<double>(f0.logp.size())) {
      throw DataError(path.string() + ": row_index out of sequence at '" + line + "'");
    }
    if (!lp || std::isnan(*lp) || *lp > 0.0) {
      throw DataError(path.string() + ": logp must be <= 0 at row " + cells[0]);
    }
    f0.logp.push_back(std::max(*lp, -kMaxNegLogLik));
  }
  if (f0.logp.size() != expected_rows) {
    throw DataError(path.string() + ": has " + std::to_string(f0.logp.size()) +
                    " rows, dataset has " + std::to_string(expected_rows));
  }
  return f0;
}

void write_f0_scores(const F0Scores& f0, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "row_index,logp\n";
  for (std::size_t i = 0; i < f0.logp.size(); ++i) {
    out << i << ',' << detail::format_double(f0.logp[i]) << '\n';
  }
}

}  // namespace dynamod
