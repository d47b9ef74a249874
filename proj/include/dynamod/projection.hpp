#pragma once

#include "dynamod/data.hpp"
#include "dynamod/losses.hpp"

namespace dynamod {

/// Soft routing posterior: q[i] = q(z = 0 | x_i), the probability that row i
/// is sent to the full model.
struct GatingPosterior {
  Vector q;
  double beta = 0.0;       ///< multiplier of the mean-routing constraint
  bool converged = true;   ///< false when an iterative solver hit its cap
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;

  double mean() const { return q.size() ? q.mean() : 0.0; }
};

/// Per-example costs of routing to f1 (A) and to f0 (B).
struct PerExampleTerms {
  Vector A;
  Vector B;
};

/// A_i = loss(y_i f1_i) + softplus(g_i), B_i = -log p(y_i|f0) + softplus(-g_i).
/// `margins_f1` are y_i f1(x_i).
PerExampleTerms compute_terms_kl(const Vector& margins_f1, const Vector& gate_scores, const F0Scores& f0);

/// Minimizes mean_i [(1-q_i)A_i + q_i B_i - H(q_i)] subject to mean(q) <= p_full.
/// The solution is q_i = sigmoid(A_i - B_i - beta); beta is found by bisection.
GatingPosterior i_project_kl(const PerExampleTerms& terms, double p_full);

/// mean_i [(1-q_i)A_i + q_i B_i - H(q_i)], the quantity i_project_kl minimizes.
double kl_projection_objective(const PerExampleTerms& terms, const Vector& q);

struct AdmmConfig {
  double rho = 1.0;
  int max_iters = 500;
  double tolerance = 1e-6;

  void validate() const;
};

/// The symmetrized-distance objective mean_i [(1-q_i)A_i + (logit(q_i) - g_i)^2].
double symmetrized_objective(const Vector& A, const Vector& gate_scores, const Vector& q);

/// Best q in [eps, 1-eps] for (1-q)a + (logit(q) - g)^2 + (rho/2)(q - c)^2.
/// The function is not convex in q; the search runs in log-odds space over a
/// bracket that must contain the minimizer, then refines the best cells.
double solve_symmetrized_scalar(double a, double g, double rho, double c);

/// ADMM over the split q = v, v in {v in [0,1]^n : mean(v) <= p_full}.
/// A non-converged run is flagged on the result, never thrown.
GatingPosterior project_symmetrized(const Vector& A, const Vector& gate_scores, double p_full,
                                    const AdmmConfig& cfg = {});

/// Euclidean projection onto {v in [0,1]^n : mean(v) <= p_full}.
Vector project_capped_box(const Vector& w, double p_full);

}  // namespace dynamod
