#include <doctest.h>

#include <random>

#include "dynamod/baselines.hpp"
#include "dynamod/dynamod.hpp"
#include "test_util.hpp"

using namespace dynamod;

namespace {

struct Problem {
  Dataset train;
  F0Scores f0;
  CostVector costs;
};

Problem random_problem(std::uint64_t seed, Eigen::Index n, Eigen::Index d) {
  std::mt19937_64 rng(seed);
  Problem p;
  p.train = testutil::random_dataset(rng, n, d);
  const auto g = fit_plain_gbrt(p.train.X, p.train.y, 30, 3, 0.2);
  p.f0 = g.train_scores;
  p.costs.c.resize(static_cast<std::size_t>(d));
  std::uniform_real_distribution<double> U(0.2, 2.0);
  for (auto& c : p.costs.c) c = U(rng);
  return p;
}

bool monotone(const std::vector<double>& trace, double slack) {
  for (std::size_t k = 1; k < trace.size(); ++k)
    if (trace[k] > trace[k - 1] + slack) return false;
  return true;
}

}  // namespace

TEST_CASE("objective_opt2 matches a hand sum on three rows") {
  Dataset ds;
  ds.X.resize(3, 1);
  ds.X << 1.0, -2.0, 0.5;
  ds.y.resize(3);
  ds.y << 1.0, -1.0, -1.0;
  ds.feature_names = {"a"};
  F0Scores f0;
  f0.logp = {-0.1, -0.2, -3.0};
  AdaptiveSystem sys;
  Vector g(2), f(2);
  g << 0.5, -0.2;
  f << 2.0, 0.1;
  sys.gate = LinearScorer{g};
  sys.f1 = LinearScorer{f};
  Vector q(3);
  q << 0.1, 0.7, 0.4;
  const double gs[] = {0.3, -1.2, 0.05};
  const double fs[] = {2.1, -3.9, 1.1};
  double kl = 0.0, sym = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double base = q[i] * -f0.logp[static_cast<std::size_t>(i)] + (1 - q[i]) * std::log1p(std::exp(-ds.y[i] * fs[i]));
    const double p0 = 1.0 / (1.0 + std::exp(-gs[i]));
    kl += base + q[i] * std::log(q[i] / p0) + (1 - q[i]) * std::log((1 - q[i]) / (1 - p0));
    const double r = std::log(q[i] / (1 - q[i])) - gs[i];
    sym += base + r * r;
  }
  const CostVector c{{2.0}};
  const double pen = 0.1 * 2.0 * std::hypot(0.5, 2.0);
  CHECK(objective_opt2(sys, q, ds, f0, 0.1, c, Distance::Kl) == doctest::Approx(kl / 3 + pen).epsilon(1e-12));
  CHECK(objective_opt2(sys, q, ds, f0, 0.0, c, Distance::Symmetrized) == doctest::Approx(sym / 3).epsilon(1e-12));
}

TEST_CASE("DynaMod-Lin: monotone trace and the routing cap") {
  const auto p = random_problem(101, 300, 8);
  TrainConfig cfg;
  cfg.gamma = 0.01;
  cfg.p_full = 0.3;
  cfg.max_outer = 15;
  cfg.tolerance = 0.0;
  const auto r = train_dynamod_lin(p.train, p.f0, p.costs, cfg);
  CHECK(r.iterations == 15);
  CHECK(r.trace.size() == 30);
  CHECK(monotone(r.trace, 1e-9));
  CHECK(r.posterior.q.mean() <= cfg.p_full + 1e-6);
  for (const auto& [before, after] : r.q_steps) CHECK(after <= before + 1e-9);
  CHECK(r.system.algorithm == "lin");
  CHECK(r.system.params.gamma == 0.01);
}

TEST_CASE("DynaMod-Lin: huge gamma leaves intercept-only models") {
  const auto p = random_problem(103, 150, 4);
  TrainConfig cfg;
  cfg.gamma = 1e3;
  cfg.p_full = 0.5;
  const auto r = train_dynamod_lin(p.train, p.f0, p.costs, cfg);
  CHECK(r.system.features_used().empty());
}

TEST_CASE("DynaMod-Lin: P_full = 1 and gamma = 0 end no worse than the start") {
  const auto p = random_problem(107, 150, 4);
  TrainConfig cfg;
  cfg.p_full = 1.0;
  cfg.max_outer = 10;
  const auto r = train_dynamod_lin(p.train, p.f0, p.costs, cfg);
  CHECK(r.trace.back() <= r.trace.front() + 1e-12);
}

TEST_CASE("DynaMod-Lin: with no routing f1 is the plain logistic fit") {
  std::mt19937_64 rng(109);
  auto ds = testutil::random_dataset(rng, 200, 3);
  // Flip a few labels so the data are not separable.
  for (int i = 0; i < 200; i += 7) ds.y[i] = -ds.y[i];
  const auto f0 = fit_plain_gbrt(ds.X, ds.y, 10, 2, 0.2).train_scores;
  TrainConfig cfg;
  cfg.p_full = 0.0;
  cfg.tolerance = 1e-14;
  cfg.max_outer = 5;
  cfg.prox.tolerance = 1e-15;
  cfg.prox.max_iters = 50000;
  const auto r = train_dynamod_lin(ds, f0, CostVector::unit(3), cfg);
  LogisticOptions lo;
  lo.grad_tol = 1e-10;
  const Vector want = fit_logistic(ds.X, ds.y, 0.0, lo);
  const Vector got = r.system.f1.get_if<LinearScorer>()->w;
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(r.posterior.q.isZero());
}

TEST_CASE("DynaMod-Lin: explicit start and the all-ones start") {
  const auto p = random_problem(113, 100, 3);
  TrainConfig cfg;
  cfg.max_outer = 1;
  cfg.lin_init = LinInit::Ones;
  CHECK_NOTHROW(train_dynamod_lin(p.train, p.f0, p.costs, cfg));
  CHECK_THROWS_AS(train_dynamod_lin(p.train, p.f0, CostVector::unit(2), cfg), std::invalid_argument);
  cfg.p_full = 2.0;
  CHECK_THROWS_AS(train_dynamod_lin(p.train, p.f0, p.costs, cfg), std::invalid_argument);
}

TEST_CASE("DynaMod-Gbrt: q steps descend and P_full = 0 reproduces GreedyMiser") {
  const auto p = random_problem(127, 200, 5);
  TrainConfig cfg;
  cfg.p_full = 0.25;
  cfg.gamma = 0.5;
  cfg.init_trees = 4;
  cfg.rounds = 2;
  cfg.depth = 3;
  cfg.max_outer = 6;
  cfg.tolerance = 0.0;
  const auto r = train_dynamod_gbrt(p.train, p.f0, p.costs, cfg);
  REQUIRE(r.q_steps.size() == 5);
  for (const auto& [before, after] : r.q_steps) CHECK(after <= before + 1e-9);
  CHECK(r.posterior.q.mean() <= cfg.p_full + 1e-6);
  const auto* f1 = r.system.f1.get_if<EnsembleScorer>();
  REQUIRE(f1);
  CHECK(f1->ensemble.trees.size() == 4 + 6 * 2);

  cfg.p_full = 0.0;
  cfg.max_outer = 3;
  const auto z = train_dynamod_gbrt(p.train, p.f0, p.costs, cfg);
  const auto gm = fit_greedymiser(p.train.X, p.train.y, p.costs.c, cfg.gamma, 4 + 3 * 2, 3, cfg.learning_rate);
  const auto& trees = z.system.f1.get_if<EnsembleScorer>()->ensemble.trees;
  REQUIRE(trees.size() == gm.ensemble.trees.size());
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const auto& a = trees[t].nodes();
    const auto& b = gm.ensemble.trees[t].nodes();
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].feature == b[k].feature);
      CHECK(a[k].threshold == b[k].threshold);
      CHECK(std::abs(a[k].value - b[k].value) <= 1e-12);
    }
  }
}

TEST_CASE("DynaMod-Lstsq: raw features respect the cap and run deterministically") {
  const auto p = random_problem(131, 200, 4);
  TrainConfig cfg;
  cfg.p_full = 0.3;
  cfg.max_outer = 5;
  const auto a = train_dynamod_lstsq(p.train, p.f0, cfg);
  const auto b = train_dynamod_lstsq(p.train, p.f0, cfg);
  CHECK(a.posterior.q.mean() <= 0.3 + 1e-6);
  CHECK(a.trace == b.trace);
  CHECK(a.system.algorithm == "lstsq");
}

TEST_CASE("DynaMod-Lstsq leaf mode starts from the confidence gate") {
  const auto p = random_problem(137, 300, 6);
  const auto base = fit_plain_gbrt(p.train.X, p.train.y, 5, 3, 0.3).ensemble;
  const double tau = margin_quantile(base, p.train.X, 0.3);
  TrainConfig cfg;
  cfg.p_full = 0.3;
  cfg.max_outer = 1;
  cfg.admm.max_iters = 1;

  // With the gate refit skipped the start is visible through the first
  // posterior's warm start; check the start directly instead.
  const auto conf = confidence_gate(base, tau);
  const Vector s = base.scores(p.train.X);
  const Vector cg = conf.gate.scores(p.train.X);
  for (Eigen::Index i = 0; i < s.size(); ++i) CHECK((cg[i] > 0.0) == (std::abs(s[i]) < tau));

  const auto r = train_dynamod_lstsq_leaf(p.train, p.f0, base, tau, cfg);
  const auto* g = r.system.gate.get_if<LeafLinearScorer>();
  REQUIRE(g);
  CHECK(g->w.size() == static_cast<Eigen::Index>(base.leaf_count()) + 2);
  CHECK_THROWS_AS(train_dynamod_lstsq_leaf(p.train, p.f0, base, -1.0, cfg), std::invalid_argument);
}
