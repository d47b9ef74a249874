#include "optim.hpp"

#include <cmath>
#include <deque>
#include <vector>

namespace dynamod::detail {

LbfgsResult minimize_lbfgs(const ObjectiveFn& fn, Vector x0, const LbfgsOptions& opts) {
  LbfgsResult res;
  res.x = std::move(x0);
  Vector grad(res.x.size());
  res.value = fn(res.x, grad);
  res.grad_norm = grad.norm();

  std::deque<Vector> s_hist;
  std::deque<Vector> y_hist;
  std::deque<double> rho_hist;
  Vector new_grad(res.x.size());

  while (res.grad_norm > opts.grad_tol && res.iterations < opts.max_iters) {
    // Two-loop recursion for the search direction.
    Vector dir = -grad;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * s_hist[k].dot(dir);
      dir -= alpha[k] * y_hist[k];
    }
    if (!s_hist.empty()) {
      dir *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    } else {
      dir /= std::max(1.0, res.grad_norm);
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * y_hist[k].dot(dir);
      dir += (alpha[k] - beta) * s_hist[k];
    }

    double slope = grad.dot(dir);
    if (!(slope < 0.0)) {
      // Lost descent; restart from steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -grad / std::max(1.0, res.grad_norm);
      slope = grad.dot(dir);
    }

    double step = 1.0;
    Vector x_new;
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = res.x + step * dir;
      f_new = fn(x_new, new_grad);
      if (std::isfinite(f_new) && f_new <= res.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++res.iterations;
    if (!accepted) break;

    Vector s = x_new - res.x;
    Vector yv = new_grad - grad;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    res.x = std::move(x_new);
    res.value = f_new;
    grad = new_grad;
    res.grad_norm = grad.norm();
  }
  res.converged = res.grad_norm <= opts.grad_tol;
  return res;
}

}  // namespace dynamod::detail
