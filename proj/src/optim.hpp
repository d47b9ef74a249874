#pragma once

#include <functional>

#include "dynamod/data.hpp"

namespace dynamod::detail {

/// Returns f(x) and writes the gradient into `grad`.
using ObjectiveFn = std::function<double(const Vector& x, Vector& grad)>;

struct LbfgsOptions {
  int max_iters = 2000;
  double grad_tol = 1e-6;
  int memory = 10;
};

struct LbfgsResult {
  Vector x;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Limited-memory BFGS with a backtracking Armijo line search. Deterministic
/// for a given starting point.
LbfgsResult minimize_lbfgs(const ObjectiveFn& fn, Vector x0, const LbfgsOptions& opts);

}  // namespace dynamod::detail
