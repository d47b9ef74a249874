#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dynamod/data.hpp"

namespace dynamod {

/// Probabilities are clamped to [kProbEps, 1 - kProbEps] before logs/logits.
inline constexpr double kProbEps = 1e-12;
/// -log p(y | f0) is capped here so per-example terms stay finite.
inline constexpr double kMaxNegLogLik = 50.0;

/// log(1 + exp(-margin)) without overflow.
double logistic_loss(double margin);

/// log(1 + exp(t)).
inline double softplus(double t) { return logistic_loss(-t); }

double sigmoid(double t);

/// log(q / (1 - q)) with q clamped away from the endpoints.
double logit(double q);

/// Excess loss of the cheap model over the full model.
inline double deviance(double loss_f1, double loss_f0) { return loss_f1 - loss_f0; }

/// KL(Bern(q0) || Bern(p0)). p0 is clamped into the open interval.
double kl_bernoulli(double q0, double p0);

/// KL(Bern(q0) || Bern(sigmoid(score))), evaluated in log-odds form so that
/// extreme gate scores do not lose precision.
double kl_bernoulli_logit(double q0, double score);

/// (logit(q0) - score)^2.
double sym_logodds_dist(double q0, double score);

/// Binary entropy in nats, with 0 log 0 = 0.
double entropy(double q0);

struct JensenPair {
  double lhs;  ///< -log of the mixture likelihood
  double rhs;  ///< expected component loss plus KL to the gate
};

/// Both sides of the variational bound on the composite system's negative
/// log-likelihood. q0 and the gate weight the full model (z = 0).
JensenPair composite_nll(double q0, double g_score, double loss_f1, double logp_f0);

/// Per-example log p(y_i | f0), the only view of the full model used here.
struct F0Scores {
  enum class Source { Trained, Loaded };

  std::vector<double> logp;
  Source source = Source::Loaded;

  std::size_t size() const { return logp.size(); }

  /// -log p(y|f0), capped at kMaxNegLogLik.
  double neg_loglik(std::size_t i) const;

  /// f0 classifies row i correctly iff p(y_i|f0) > 1/2.
  bool correct(std::size_t i) const;

  /// The label f0 predicts for row i given the true label.
  double predicted_label(std::size_t i, double y) const { return correct(i) ? y : -y; }

  /// Builds scores from raw f0 margins y_i f0(x_i).
  static F0Scores from_margins(const Vector& scores, const Vector& y, Source source);
};

/// CSV with header `row_index,logp`; rows must be 0..n-1 in order.
F0Scores load_f0_scores(const std::filesystem::path& path, std::size_t expected_rows);
void write_f0_scores(const F0Scores& f0, const std::filesystem::path& path);

}  // namespace dynamod
