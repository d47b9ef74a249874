#include "dynamod/linear.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dynamod/losses.hpp"
#include "optim.hpp"

namespace dynamod {

double linear_score(const Vector& w, std::span<const double> x) {
  const auto d = w.size() - 1;
  double s = w[d];
  for (Eigen::Index a = 0; a < d; ++a) s += w[a] * x[static_cast<std::size_t>(a)];
  return s;
}

Vector linear_scores(const Matrix& X, const Vector& w) {
  const auto d = X.cols();
  return (X * w.head(d)).array() + w[d];
}

Standardizer Standardizer::fit(const Matrix& X) {
  Standardizer s;
  const double n = static_cast<double>(X.rows());
  s.mean = X.colwise().mean().transpose();
  s.scale.resize(X.cols());
  for (Eigen::Index a = 0; a < X.cols(); ++a) {
    const double var = (X.col(a).array() - s.mean[a]).square().sum() / n;
    s.scale[a] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Standardizer Standardizer::identity(std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  return {Vector::Zero(n), Vector::Ones(n)};
}

Matrix Standardizer::apply(const Matrix& X) const {
  Matrix Z = X;
  for (Eigen::Index a = 0; a < X.cols(); ++a) {
    Z.col(a) = (X.col(a).array() - mean[a]) / scale[a];
  }
  return Z;
}

Vector Standardizer::to_raw(const Vector& w_std) const {
  const auto d = mean.size();
  Vector w(d + 1);
  double b = w_std[d];
  for (Eigen::Index a = 0; a < d; ++a) {
    w[a] = w_std[a] / scale[a];
    b -= w[a] * mean[a];
  }
  w[d] = b;
  return w;
}

Vector Standardizer::to_standardized(const Vector& w_raw) const {
  const auto d = mean.size();
  Vector w(d + 1);
  double b = w_raw[d];
  for (Eigen::Index a = 0; a < d; ++a) {
    w[a] = w_raw[a] * scale[a];
    b += w_raw[a] * mean[a];
  }
  w[d] = b;
  return w;
}

std::vector<std::size_t> LinearPair::used_features() const {
  std::vector<std::size_t> used;
  for (std::size_t a = 0; a < dims(); ++a) {
    const auto k = static_cast<Eigen::Index>(a);
    if (g[k] != 0.0 || f1[k] != 0.0) used.push_back(a);
  }
  return used;
}

void ProxConfig::validate() const {
  if (max_iters < 1 || !(tolerance > 0.0) || !(init_step > 0.0) || !(backtrack > 0.0 && backtrack < 1.0)) {
    throw std::invalid_argument("ProxConfig: need max_iters >= 1, tolerance > 0, step > 0, backtrack in (0,1)");
  }
}

double weighted_logistic_objective(const Matrix& X, const Vector& y, const Vector& weights, double l2,
                                   const Vector& w, Vector* grad) {
  const auto n = X.rows();
  const auto d = X.cols();
  const Vector s = linear_scores(X, w);
  const double inv_n = 1.0 / static_cast<double>(n);
  double f = 0.0;
  Vector r(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = y[i] * s[i];
    f += weights[i] * logistic_loss(m);
    r[i] = -weights[i] * y[i] * sigmoid(-m) * inv_n;
  }
  f = f * inv_n + 0.5 * l2 * w.head(d).squaredNorm();
  if (grad) {
    grad->resize(d + 1);
    grad->head(d) = X.transpose() * r + l2 * w.head(d);
    (*grad)[d] = r.sum();
  }
  return f;
}

Vector fit_weighted_logistic(const Matrix& X, const Vector& y, const Vector& weights, double l2,
                             const LogisticOptions& opts) {
  if (weights.size() != X.rows() || y.size() != X.rows()) {
    throw std::invalid_argument("fit_weighted_logistic: dimension mismatch");
  }
  if ((weights.array() < 0.0).any()) throw std::invalid_argument("fit_weighted_logistic: negative weight");
  if (!(weights.maxCoeff() > 0.0)) throw std::invalid_argument("fit_weighted_logistic: all weights are zero");
  if (!(l2 >= 0.0)) throw std::invalid_argument("fit_weighted_logistic: l2 must be >= 0");

  const auto d = static_cast<std::size_t>(X.cols());
  const Standardizer st = opts.standardize ? Standardizer::fit(X) : Standardizer::identity(d);
  const Matrix Z = opts.standardize ? st.apply(X) : X;
  Vector x0 = opts.init ? st.to_standardized(*opts.init) : Vector::Zero(X.cols() + 1);

  detail::LbfgsOptions lo;
  lo.max_iters = opts.max_iters;
  lo.grad_tol = opts.grad_tol;
  const auto res = detail::minimize_lbfgs(
      [&](const Vector& w, Vector& g) { return weighted_logistic_objective(Z, y, weights, l2, w, &g); },
      std::move(x0), lo);
  return st.to_raw(res.x);
}

Vector fit_logistic(const Matrix& X, const Vector& y, double l2, const LogisticOptions& opts) {
  return fit_weighted_logistic(X, y, Vector::Ones(X.rows()), l2, opts);
}

namespace {

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

/// FISTA on mean logistic loss + lambda ||w||_1 (intercept free).
Vector fit_l1_logistic(const Matrix& Z, const Vector& y, double lambda, Vector w) {
  const auto d = Z.cols();
  const Vector ones = Vector::Ones(Z.rows());
  auto smooth = [&](const Vector& v, Vector* g) { return weighted_logistic_objective(Z, y, ones, 0.0, v, g); };
  auto prox = [&](const Vector& v, double step) {
    Vector out = v;
    for (Eigen::Index a = 0; a < d; ++a) out[a] = soft_threshold(v[a], step * lambda);
    return out;
  };
  auto full = [&](const Vector& v) { return smooth(v, nullptr) + lambda * v.head(d).lpNorm<1>(); };

  Vector z = w;
  double t = 1.0;
  double step = 1.0;
  double f_prev = full(w);
  Vector grad;
  for (int it = 0; it < 20000; ++it) {
    const double fz = smooth(z, &grad);
    Vector w_next;
    while (true) {
      w_next = prox(z - step * grad, step);
      const Vector diff = w_next - z;
      if (smooth(w_next, nullptr) <= fz + grad.dot(diff) + diff.squaredNorm() / (2.0 * step) + 1e-15) break;
      step *= 0.5;
    }
    const double f_next = full(w_next);
    if (f_next > f_prev) {
      // Monotone restart.
      z = w;
      t = 1.0;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = w_next + ((t - 1.0) / t_next) * (w_next - w);
    const double change = std::abs(f_prev - f_next);
    w = std::move(w_next);
    t = t_next;
    f_prev = f_next;
    if (change <= 1e-12 * std::max(1.0, std::abs(f_next))) break;
  }
  return w;
}

}  // namespace

std::vector<std::vector<std::size_t>> fit_l1_logistic_path(const Matrix& X, const Vector& y,
                                                          const std::vector<double>& c_grid) {
  if (c_grid.empty()) throw std::invalid_argument("fit_l1_logistic_path: empty C grid");
  for (const double c : c_grid) {
    if (!(c > 0.0)) throw std::invalid_argument("fit_l1_logistic_path: C values must be positive");
  }
  const auto d = X.cols();
  const Standardizer st = Standardizer::fit(X);
  const Matrix Z = st.apply(X);
  const double n = static_cast<double>(X.rows());

  std::vector<std::vector<std::size_t>> supports;
  auto add = [&](std::vector<std::size_t> s) {
    if (std::find(supports.begin(), supports.end(), s) == supports.end()) supports.push_back(std::move(s));
  };

  Vector w = Vector::Zero(d + 1);
  for (const double c : c_grid) {
    w = fit_l1_logistic(Z, y, 1.0 / (c * n), w);
    std::vector<double> mags;
    for (Eigen::Index a = 0; a < d; ++a) {
      if (w[a] != 0.0) mags.push_back(std::abs(w[a]));
    }
    if (mags.empty()) {
      add({});
      continue;
    }
    std::sort(mags.begin(), mags.end(), std::greater<>());
    mags.erase(std::unique(mags.begin(), mags.end()), mags.end());
    for (const double m : mags) {
      std::vector<std::size_t> s;
      for (Eigen::Index a = 0; a < d; ++a) {
        if (std::abs(w[a]) >= m) s.push_back(static_cast<std::size_t>(a));
      }
      add(std::move(s));
    }
  }
  return supports;
}

double joint_smooth_objective(const Matrix& X, const Vector& y, const Vector& q, const LinearPair& p,
                              LinearPair* grad) {
  const auto n = X.rows();
  const auto d = X.cols();
  const Vector sf = linear_scores(X, p.f1);
  const Vector sg = linear_scores(X, p.g);
  const double inv_n = 1.0 / static_cast<double>(n);
  double f = 0.0;
  Vector rf(n);
  Vector rg(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double keep = 1.0 - q[i];
    const double m = y[i] * sf[i];
    f += keep * (logistic_loss(m) + logistic_loss(-sg[i])) + q[i] * logistic_loss(sg[i]);
    rf[i] = -keep * y[i] * sigmoid(-m) * inv_n;
    rg[i] = (keep * sigmoid(sg[i]) - q[i] * sigmoid(-sg[i])) * inv_n;
  }
  if (grad) {
    grad->f1.resize(d + 1);
    grad->g.resize(d + 1);
    grad->f1.head(d) = X.transpose() * rf;
    grad->f1[d] = rf.sum();
    grad->g.head(d) = X.transpose() * rg;
    grad->g[d] = rg.sum();
  }
  return f * inv_n;
}

double group_penalty(const LinearPair& p, double gamma, const std::vector<double>& costs) {
  double s = 0.0;
  for (std::size_t a = 0; a < costs.size(); ++a) {
    const auto k = static_cast<Eigen::Index>(a);
    s += costs[a] * std::hypot(p.g[k], p.f1[k]);
  }
  return gamma * s;
}

std::pair<double, double> group_soft_threshold(std::pair<double, double> v, double t) {
  if (t < 0.0) throw std::invalid_argument("group_soft_threshold: negative threshold");
  const double norm = std::hypot(v.first, v.second);
  if (norm <= t) return {0.0, 0.0};
  const double shrink = 1.0 - t / norm;
  return {shrink * v.first, shrink * v.second};
}

GroupLassoResult fit_joint_group_lasso(const Matrix& X, const Vector& y, const Vector& q, double gamma,
                                       const std::vector<double>& costs, const ProxConfig& cfg,
                                       const std::optional<LinearPair>& init) {
  cfg.validate();
  const auto n = X.rows();
  const auto d = X.cols();
  if (y.size() != n || q.size() != n || static_cast<Eigen::Index>(costs.size()) != d) {
    throw std::invalid_argument("fit_joint_group_lasso: dimension mismatch");
  }
  if (!(gamma >= 0.0)) throw std::invalid_argument("fit_joint_group_lasso: gamma must be >= 0");
  if (init && (init->g.size() != d + 1 || init->f1.size() != d + 1)) {
    throw std::invalid_argument("fit_joint_group_lasso: init has wrong dimension");
  }

  const Standardizer st = cfg.standardize ? Standardizer::fit(X) : Standardizer::identity(static_cast<std::size_t>(d));
  const Matrix Z = cfg.standardize ? st.apply(X) : X;

  LinearPair cur = LinearPair::zeros(static_cast<std::size_t>(d));
  if (init) cur = {st.to_standardized(init->g), st.to_standardized(init->f1)};

  // Standardization only preconditions: group a is charged c_a / scale_a on
  // standardized weights, which is c_a on the raw ones.
  std::vector<double> wcost(costs);
  for (Eigen::Index a = 0; a < d; ++a) wcost[static_cast<std::size_t>(a)] /= st.scale[a];

  auto prox = [&](const LinearPair& v, double step) {
    LinearPair out = v;
    for (Eigen::Index a = 0; a < d; ++a) {
      const auto [gg, ff] = group_soft_threshold({v.g[a], v.f1[a]}, step * gamma * wcost[static_cast<std::size_t>(a)]);
      out.g[a] = gg;
      out.f1[a] = ff;
    }
    return out;
  };

  GroupLassoResult res;
  LinearPair grad;
  double smooth_cur = joint_smooth_objective(Z, y, q, cur, &grad);
  double obj_cur = smooth_cur + group_penalty(cur, gamma, wcost);
  if (!std::isfinite(obj_cur)) throw std::runtime_error("fit_joint_group_lasso: non-finite objective");
  res.trace.push_back(obj_cur);

  double step = cfg.init_step;
  for (int it = 0; it < cfg.max_iters; ++it) {
    step /= cfg.backtrack;  // let the step grow back between iterations
    LinearPair next;
    double smooth_next = 0.0;
    bool found = false;
    for (int ls = 0; ls < 100; ++ls) {
      LinearPair trial{cur.g - step * grad.g, cur.f1 - step * grad.f1};
      next = prox(trial, step);
      smooth_next = joint_smooth_objective(Z, y, q, next, nullptr);
      const double dg = (next.g - cur.g).squaredNorm() + (next.f1 - cur.f1).squaredNorm();
      const double lin = grad.g.dot(next.g - cur.g) + grad.f1.dot(next.f1 - cur.f1);
      if (smooth_next <= smooth_cur + lin + dg / (2.0 * step)) {
        found = true;
        break;
      }
      step *= cfg.backtrack;
    }
    if (!found) break;
    const double obj_next = smooth_next + group_penalty(next, gamma, wcost);
    if (!std::isfinite(obj_next)) throw std::runtime_error("fit_joint_group_lasso: non-finite objective");
    ++res.iterations;
    if (obj_next > obj_cur) {
      // Rounding-level ascent; the current point is already stationary.
      res.converged = true;
      break;
    }
    const double change = obj_cur - obj_next;
    cur = std::move(next);
    obj_cur = obj_next;
    smooth_cur = joint_smooth_objective(Z, y, q, cur, &grad);
    res.trace.push_back(obj_cur);
    if (change <= cfg.tolerance * std::max(1.0, std::abs(obj_cur))) {
      res.converged = true;
      break;
    }
  }
  res.pair = {st.to_raw(cur.g), st.to_raw(cur.f1)};
  // Standardization keeps exact zeros, so group sparsity survives the mapping.
  return res;
}

Vector fit_least_squares(const Matrix& Phi, const Vector& targets, double ridge) {
  if (Phi.rows() < 1 || targets.size() != Phi.rows()) {
    throw std::invalid_argument("fit_least_squares: dimension mismatch");
  }
  if (!(ridge >= 0.0)) throw std::invalid_argument("fit_least_squares: ridge must be >= 0");
  const auto k = Phi.cols();
  if (ridge == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Phi);
    if (qr.rank() < k) throw std::runtime_error("fit_least_squares: singular system with ridge = 0");
    return qr.solve(targets);
  }
  Eigen::MatrixXd gram = Phi.transpose() * Phi;
  gram.diagonal().array() += ridge;
  const Vector rhs = Phi.transpose() * targets;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  return ldlt.solve(rhs);
}

}  // namespace dynamod
