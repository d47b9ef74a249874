#include "dynamod/dynamod.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dynamod {

namespace {

double rel_change(double prev, double cur) { return std::abs(prev - cur) / std::max(1.0, std::abs(prev)); }

Vector margins(const Vector& scores, const Vector& y) { return scores.cwiseProduct(y); }

Matrix with_intercept(const Matrix& Phi) {
  Matrix out(Phi.rows(), Phi.cols() + 1);
  out.leftCols(Phi.cols()) = Phi;
  out.col(Phi.cols()).setOnes();
  return out;
}

AdaptiveSystem linear_system(const LinearPair& pair, const TrainConfig& cfg) {
  AdaptiveSystem sys;
  sys.gate = LinearScorer{pair.g};
  sys.f1 = LinearScorer{pair.f1};
  sys.algorithm = "lin";
  sys.params = {cfg.gamma, cfg.p_full, 0.0};
  return sys;
}

// Shared loop of the symmetrized variant. Phi carries no intercept column;
// `wrap` turns (g, f1) weight vectors over Phi into scorers.
template <class Wrap>
TrainResult lstsq_loop(const Dataset& train, const Matrix& Phi, const F0Scores& f0, Vector g_w, Vector f1_w,
                       const TrainConfig& cfg, Wrap wrap) {
  const auto n = train.X.rows();
  const Matrix Phi1 = with_intercept(Phi);
  const CostVector no_costs{std::vector<double>(train.dims(), 0.0)};

  TrainResult res;
  res.system = wrap(g_w, f1_w);
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_outer; ++it) {
    const Vector f1_scores = linear_scores(Phi, f1_w);
    const Vector g_scores = linear_scores(Phi, g_w);
    Vector A(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      A[i] = logistic_loss(train.y[i] * f1_scores[i]) - f0.neg_loglik(static_cast<std::size_t>(i));
    }
    if (res.posterior.q.size() == n) {
      const double before = objective_opt2(res.system, res.posterior.q, train, f0, 0.0, no_costs, Distance::Symmetrized);
      res.posterior = project_symmetrized(A, g_scores, cfg.p_full, cfg.admm);
      res.q_steps.emplace_back(
          before, objective_opt2(res.system, res.posterior.q, train, f0, 0.0, no_costs, Distance::Symmetrized));
    } else {
      res.posterior = project_symmetrized(A, g_scores, cfg.p_full, cfg.admm);
    }
    const Vector& q = res.posterior.q;

    Vector targets(n);
    for (Eigen::Index i = 0; i < n; ++i) targets[i] = logit(q[i]);
    g_w = fit_least_squares(Phi1, targets, cfg.ridge);

    const Vector weights = Vector::Ones(n) - q;
    if (weights.sum() > 0.0) {
      LogisticOptions lo;
      lo.init = f1_w;
      f1_w = fit_weighted_logistic(Phi, train.y, weights, cfg.f1_l2, lo);
    }

    res.system = wrap(g_w, f1_w);
    const double obj = objective_opt2(res.system, q, train, f0, 0.0, no_costs, Distance::Symmetrized);
    res.trace.push_back(obj);
    res.iterations = it + 1;
    if (rel_change(prev, obj) < cfg.tolerance) {
      res.converged = true;
      break;
    }
    prev = obj;
  }
  return res;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(p_full >= 0.0 && p_full <= 1.0)) throw std::invalid_argument("TrainConfig: p_full must lie in [0, 1]");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("TrainConfig: gamma must be >= 0");
  if (max_outer < 1) throw std::invalid_argument("TrainConfig: max_outer must be >= 1");
  if (!(tolerance >= 0.0)) throw std::invalid_argument("TrainConfig: tolerance must be >= 0");
  if (init_trees < 0 || rounds < 1 || depth < 1 || min_leaf < 1 || !(learning_rate > 0.0)) {
    throw std::invalid_argument("TrainConfig: bad boosting parameters");
  }
  if (!(init_l2 >= 0.0) || !(ridge >= 0.0) || !(f1_l2 >= 0.0)) {
    throw std::invalid_argument("TrainConfig: penalties must be >= 0");
  }
  prox.validate();
  admm.validate();
}

double objective_opt2(const AdaptiveSystem& sys, const Vector& q, const Dataset& data, const F0Scores& f0,
                      double gamma, const CostVector& costs, Distance distance) {
  const auto n = data.X.rows();
  if (q.size() != n || static_cast<Eigen::Index>(f0.size()) != n || costs.size() != data.dims()) {
    throw std::invalid_argument("objective_opt2: size mismatch");
  }
  const Vector f1 = sys.f1.scores(data.X);
  const Vector g = sys.gate.scores(data.X);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = distance == Distance::Kl ? kl_bernoulli_logit(q[i], g[i]) : sym_logodds_dist(q[i], g[i]);
    sum += q[i] * f0.neg_loglik(static_cast<std::size_t>(i)) + (1.0 - q[i]) * logistic_loss(data.y[i] * f1[i]) + d;
  }
  double penalty = 0.0;
  const auto* lg = sys.gate.get_if<LinearScorer>();
  const auto* lf = sys.f1.get_if<LinearScorer>();
  if (lg && lf) {
    for (std::size_t a = 0; a < data.dims(); ++a) {
      const auto k = static_cast<Eigen::Index>(a);
      penalty += costs[a] * std::hypot(lg->w[k], lf->w[k]);
    }
  } else if (sys.gate.get_if<EnsembleScorer>() && sys.f1.get_if<EnsembleScorer>()) {
    for (const auto a : sys.features_used()) penalty += costs[a];
  }
  return sum / static_cast<double>(n) + gamma * penalty;
}

TrainResult train_dynamod_lin(const Dataset& train, const F0Scores& f0, const CostVector& costs,
                              const TrainConfig& cfg, const std::optional<LinearPair>& init) {
  cfg.validate();
  const auto d = train.dims();
  if (f0.size() != train.rows() || costs.size() != d) throw std::invalid_argument("train_dynamod_lin: size mismatch");

  LinearPair pair = LinearPair::zeros(d);
  if (init) {
    pair = *init;
  } else if (cfg.lin_init == LinInit::Ones) {
    pair.g.head(static_cast<Eigen::Index>(d)).setOnes();
    pair.f1.head(static_cast<Eigen::Index>(d)).setOnes();
  } else {
    LogisticOptions lo;
    lo.standardize = cfg.prox.standardize;
    pair.f1 = fit_logistic(train.X, train.y, cfg.init_l2, lo);
  }

  TrainResult res;
  res.system = linear_system(pair, cfg);
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_outer; ++it) {
    const auto terms = compute_terms_kl(margins(linear_scores(train.X, pair.f1), train.y),
                                        linear_scores(train.X, pair.g), f0);
    if (res.posterior.q.size() == train.X.rows()) {
      const double before = objective_opt2(res.system, res.posterior.q, train, f0, cfg.gamma, costs, Distance::Kl);
      res.posterior = i_project_kl(terms, cfg.p_full);
      res.q_steps.emplace_back(before,
                               objective_opt2(res.system, res.posterior.q, train, f0, cfg.gamma, costs, Distance::Kl));
    } else {
      res.posterior = i_project_kl(terms, cfg.p_full);
    }
    res.trace.push_back(objective_opt2(res.system, res.posterior.q, train, f0, cfg.gamma, costs, Distance::Kl));

    const auto fit = fit_joint_group_lasso(train.X, train.y, res.posterior.q, cfg.gamma, costs.c, cfg.prox, pair);
    pair = fit.pair;
    res.system = linear_system(pair, cfg);
    const double obj = objective_opt2(res.system, res.posterior.q, train, f0, cfg.gamma, costs, Distance::Kl);
    res.trace.push_back(obj);
    res.iterations = it + 1;
    if (rel_change(prev, obj) < cfg.tolerance) {
      res.converged = true;
      break;
    }
    prev = obj;
  }
  return res;
}

TrainResult train_dynamod_gbrt(const Dataset& train, const F0Scores& f0, const CostVector& costs,
                               const TrainConfig& cfg) {
  cfg.validate();
  const auto d = train.dims();
  const auto n = train.X.rows();
  if (f0.size() != train.rows() || costs.size() != d) throw std::invalid_argument("train_dynamod_gbrt: size mismatch");

  EnsemblePair ep = EnsemblePair::empty(d, cfg.learning_rate);
  if (cfg.init_trees > 0) {
    auto gm = fit_greedymiser(train.X, train.y, costs.c, cfg.gamma, cfg.init_trees, cfg.depth, cfg.learning_rate,
                              cfg.min_leaf);
    ep.f1 = std::move(gm.ensemble);
    ep.unused = std::move(gm.unused);
  }
  PairScores scores{ep.f1.scores(train.X), Vector::Zero(n)};
  const FeatureIndex index(train.X);
  const BoostParams bp{cfg.gamma, cfg.depth, cfg.min_leaf};

  auto make_system = [&] {
    AdaptiveSystem sys;
    sys.gate = EnsembleScorer{ep.g};
    sys.f1 = EnsembleScorer{ep.f1};
    sys.algorithm = "gbrt";
    sys.params = {cfg.gamma, cfg.p_full, cfg.learning_rate};
    return sys;
  };

  TrainResult res;
  res.system = make_system();
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_outer; ++it) {
    const auto terms = compute_terms_kl(margins(scores.f1, train.y), scores.g, f0);
    if (res.posterior.q.size() == n) {
      const double before = objective_opt2(res.system, res.posterior.q, train, f0, cfg.gamma, costs, Distance::Kl);
      res.posterior = i_project_kl(terms, cfg.p_full);
      res.q_steps.emplace_back(before,
                               objective_opt2(res.system, res.posterior.q, train, f0, cfg.gamma, costs, Distance::Kl));
    } else {
      res.posterior = i_project_kl(terms, cfg.p_full);
    }
    for (int t = 0; t < cfg.rounds; ++t) {
      boost_pair_round(ep, scores, train.X, index, train.y, res.posterior.q, costs.c, bp);
    }
    res.system = make_system();
    const double obj = objective_opt2(res.system, res.posterior.q, train, f0, cfg.gamma, costs, Distance::Kl);
    res.trace.push_back(obj);
    res.iterations = it + 1;
    if (rel_change(prev, obj) < cfg.tolerance) {
      res.converged = true;
      break;
    }
    prev = obj;
  }
  return res;
}

TrainResult train_dynamod_lstsq(const Dataset& train, const F0Scores& f0, const TrainConfig& cfg) {
  cfg.validate();
  if (f0.size() != train.rows()) throw std::invalid_argument("train_dynamod_lstsq: size mismatch");
  const auto d = static_cast<Eigen::Index>(train.dims());
  const Vector f1_w = fit_logistic(train.X, train.y, cfg.init_l2);
  return lstsq_loop(train, train.X, f0, Vector::Zero(d + 1), f1_w, cfg, [&](const Vector& g, const Vector& f) {
    AdaptiveSystem sys;
    sys.gate = LinearScorer{g};
    sys.f1 = LinearScorer{f};
    sys.algorithm = "lstsq";
    sys.params = {0.0, cfg.p_full, 0.0};
    return sys;
  });
}

TrainResult train_dynamod_lstsq_leaf(const Dataset& train, const F0Scores& f0, const Ensemble& base, double tau,
                                     const TrainConfig& cfg) {
  cfg.validate();
  if (f0.size() != train.rows()) throw std::invalid_argument("train_dynamod_lstsq_leaf: size mismatch");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw std::invalid_argument("train_dynamod_lstsq_leaf: tau must be >= 0");
  const Matrix Phi = leaf_transform(base, train.X);
  const auto L = static_cast<Eigen::Index>(base.leaf_count());

  Vector f1_w = Vector::Zero(L + 2);
  f1_w.head(L) = base.leaf_weights();
  Vector g_w = Vector::Zero(L + 2);
  g_w[L] = -1.0;
  g_w[L + 1] = tau;

  return lstsq_loop(train, Phi, f0, std::move(g_w), std::move(f1_w), cfg, [&](const Vector& g, const Vector& f) {
    AdaptiveSystem sys;
    sys.gate = LeafLinearScorer{base, g};
    sys.f1 = LeafLinearScorer{base, f};
    sys.algorithm = "lstsq";
    sys.params = {0.0, cfg.p_full, 0.0};
    return sys;
  });
}

}  // namespace dynamod
