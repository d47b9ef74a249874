#include "dynamod/projection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace dynamod {

namespace {

void check_p_full(double p_full) {
  if (!(p_full >= 0.0 && p_full <= 1.0)) {
    throw std::invalid_argument("p_full must lie in [0, 1]");
  }
}

double mean_sigmoid_shifted(const Vector& diff, double beta) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < diff.size(); ++i) s += sigmoid(diff[i] - beta);
  return s / static_cast<double>(diff.size());
}

}  // namespace

PerExampleTerms compute_terms_kl(const Vector& margins_f1, const Vector& gate_scores, const F0Scores& f0) {
  const auto n = margins_f1.size();
  if (gate_scores.size() != n || static_cast<Eigen::Index>(f0.size()) != n) {
    throw std::invalid_argument("compute_terms_kl: length mismatch");
  }
  PerExampleTerms t;
  t.A.resize(n);
  t.B.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    t.A[i] = logistic_loss(margins_f1[i]) + logistic_loss(-gate_scores[i]);
    t.B[i] = f0.neg_loglik(static_cast<std::size_t>(i)) + logistic_loss(gate_scores[i]);
  }
  return t;
}

GatingPosterior i_project_kl(const PerExampleTerms& terms, double p_full) {
  check_p_full(p_full);
  const auto n = terms.A.size();
  if (terms.B.size() != n || n == 0) throw std::invalid_argument("i_project_kl: bad term lengths");
  if (!terms.A.allFinite() || !terms.B.allFinite()) {
    throw std::invalid_argument("i_project_kl: non-finite terms");
  }

  const Vector diff = terms.A - terms.B;
  GatingPosterior out;

  if (p_full == 0.0) {
    // The only feasible point. Report a multiplier large enough that the
    // closed form is below 1e-26 everywhere.
    out.q = Vector::Zero(n);
    out.beta = std::max(diff.maxCoeff(), 0.0) + 60.0;
    return out;
  }

  auto posterior = [&](double beta) {
    Vector q(n);
    for (Eigen::Index i = 0; i < n; ++i) q[i] = sigmoid(diff[i] - beta);
    return q;
  };

  if (mean_sigmoid_shifted(diff, 0.0) <= p_full) {
    out.q = posterior(0.0);
    return out;
  }

  double lo = 0.0;
  double hi = 100.0;
  while (mean_sigmoid_shifted(diff, hi) > p_full) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e15) throw std::runtime_error("i_project_kl: multiplier bracket diverged");
  }
  for (int it = 0; it < 300 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (mean_sigmoid_shifted(diff, mid) > p_full) {
      lo = mid;
    } else {
      hi = mid;
    }
    ++out.iterations;
  }
  // hi is on the feasible side.
  out.beta = hi;
  out.q = posterior(hi);
  return out;
}

double kl_projection_objective(const PerExampleTerms& terms, const Vector& q) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    s += (1.0 - q[i]) * terms.A[i] + q[i] * terms.B[i] - entropy(q[i]);
  }
  return s / static_cast<double>(q.size());
}

void AdmmConfig::validate() const {
  if (!(rho > 0.0) || max_iters < 1 || !(tolerance > 0.0)) {
    throw std::invalid_argument("AdmmConfig requires rho > 0, max_iters >= 1, tolerance > 0");
  }
}

double symmetrized_objective(const Vector& A, const Vector& gate_scores, const Vector& q) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    s += (1.0 - q[i]) * A[i] + sym_logodds_dist(q[i], gate_scores[i]);
  }
  return s / static_cast<double>(q.size());
}

double solve_symmetrized_scalar(double a, double g, double rho, double c) {
  const double t_min = logit(kProbEps);
  const double t_max = logit(1.0 - kProbEps);
  auto h = [&](double t) {
    const double q = sigmoid(t);
    const double r = t - g;
    const double d = q - c;
    return (1.0 - q) * a + r * r + 0.5 * rho * d * d;
  };

  // Every t with (t - g)^2 above this bound is worse than t = g.
  const double radius = std::sqrt(std::abs(a) + 0.5 * rho * (std::abs(c) + 1.0) * (std::abs(c) + 1.0)) + 1.0;
  const double lo = std::clamp(g - radius, t_min, t_max);
  const double hi = std::clamp(g + radius, t_min, t_max);
  if (!(hi > lo)) return std::clamp(sigmoid(lo), kProbEps, 1.0 - kProbEps);

  constexpr int kGrid = 256;
  std::array<double, kGrid + 1> ts{};
  std::array<double, kGrid + 1> hs{};
  const double step = (hi - lo) / kGrid;
  for (int k = 0; k <= kGrid; ++k) {
    ts[k] = k == kGrid ? hi : lo + step * k;
    hs[k] = h(ts[k]);
  }

  // Local minima of the grid, best three refined by golden section.
  std::vector<int> minima;
  for (int k = 0; k <= kGrid; ++k) {
    const bool left_ok = k == 0 || hs[k] <= hs[k - 1];
    const bool right_ok = k == kGrid || hs[k] <= hs[k + 1];
    if (left_ok && right_ok) minima.push_back(k);
  }
  std::sort(minima.begin(), minima.end(), [&](int x, int y) { return hs[x] < hs[y]; });
  if (minima.size() > 3) minima.resize(3);

  double best_t = ts[minima.front()];
  double best_h = hs[minima.front()];
  constexpr double kInvPhi = 0.6180339887498949;
  for (const int k : minima) {
    double l = ts[std::max(k - 1, 0)];
    double r = ts[std::min(k + 1, kGrid)];
    double x1 = r - kInvPhi * (r - l);
    double x2 = l + kInvPhi * (r - l);
    double h1 = h(x1);
    double h2 = h(x2);
    while (r - l > 1e-10) {
      if (h1 < h2) {
        r = x2;
        x2 = x1;
        h2 = h1;
        x1 = r - kInvPhi * (r - l);
        h1 = h(x1);
      } else {
        l = x1;
        x1 = x2;
        h1 = h2;
        x2 = l + kInvPhi * (r - l);
        h2 = h(x2);
      }
    }
    const double t = 0.5 * (l + r);
    const double ht = h(t);
    if (ht < best_h) {
      best_h = ht;
      best_t = t;
    }
  }
  return std::clamp(sigmoid(best_t), kProbEps, 1.0 - kProbEps);
}

Vector project_capped_box(const Vector& w, double p_full) {
  check_p_full(p_full);
  Vector v = w.cwiseMax(0.0).cwiseMin(1.0);
  const double n = static_cast<double>(w.size());
  if (v.sum() <= p_full * n) return v;
  // Shift down by lambda >= 0 until the clipped mean meets the cap.
  double lo = 0.0;
  double hi = std::max(w.maxCoeff(), 0.0);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double s = (w.array() - mid).cwiseMax(0.0).cwiseMin(1.0).sum();
    if (s > p_full * n) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return (w.array() - hi).cwiseMax(0.0).cwiseMin(1.0).matrix();
}

GatingPosterior project_symmetrized(const Vector& A, const Vector& gate_scores, double p_full,
                                    const AdmmConfig& cfg) {
  cfg.validate();
  check_p_full(p_full);
  const auto n = A.size();
  if (gate_scores.size() != n || n == 0) throw std::invalid_argument("project_symmetrized: bad lengths");
  if (!A.allFinite() || !gate_scores.allFinite()) {
    throw std::invalid_argument("project_symmetrized: non-finite input");
  }

  GatingPosterior out;
  if (p_full == 0.0) {
    out.q = Vector::Zero(n);
    return out;
  }

  // Feasible warm start: the gate's own posterior, scaled under the cap.
  Vector warm(n);
  for (Eigen::Index i = 0; i < n; ++i) warm[i] = sigmoid(gate_scores[i]);
  if (warm.mean() > p_full) warm *= p_full / warm.mean();
  const double warm_obj = symmetrized_objective(A, gate_scores, warm);

  double rho = cfg.rho;
  Vector v = warm;
  Vector u = Vector::Zero(n);
  Vector q = warm;
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  out.converged = false;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      q[i] = solve_symmetrized_scalar(A[i], gate_scores[i], rho, v[i] - u[i]);
    }
    const Vector v_old = v;
    v = project_capped_box(q + u, p_full);
    u += q - v;
    out.iterations = it;
    out.primal_residual = (q - v).norm() / sqrt_n;
    out.dual_residual = rho * (v - v_old).norm() / sqrt_n;
    if (out.primal_residual < cfg.tolerance && out.dual_residual < cfg.tolerance) {
      out.converged = true;
      break;
    }
    // Residual balancing keeps the two residuals within a factor of ten.
    if (out.primal_residual > 10.0 * out.dual_residual) {
      rho *= 2.0;
      u /= 2.0;
    } else if (out.dual_residual > 10.0 * out.primal_residual) {
      rho /= 2.0;
      u *= 2.0;
    }
  }

  Vector result = q;
  if (result.mean() > p_full + 1e-6) result = v;
  if (symmetrized_objective(A, gate_scores, result) > warm_obj) result = warm;
  out.q = std::move(result);
  out.beta = rho * u.mean();
  return out;
}

}  // namespace dynamod
