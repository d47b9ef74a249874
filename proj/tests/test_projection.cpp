#include <doctest.h>

#include <cmath>
#include <random>

#include "dynamod/projection.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dynamod;

namespace {

PerExampleTerms random_terms(std::mt19937_64& rng, Eigen::Index n) {
  PerExampleTerms t;
  t.A = testutil::random_vector(rng, n, 2.0).cwiseAbs();
  t.B = testutil::random_vector(rng, n, 2.0).cwiseAbs();
  return t;
}

}  // namespace

TEST_CASE("KL projection matches the multiplier-search oracle") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> size(1, 20);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int inst = 0; inst < 60; ++inst) {
    const auto t = random_terms(rng, size(rng));
    const double p = U(rng);
    const auto got = i_project_kl(t, p);
    const auto want = oracle::kl_projection(t.A, t.B, p);
    for (Eigen::Index i = 0; i < t.A.size(); ++i) CHECK(got.q[i] == doctest::Approx(want.q[i]).epsilon(1e-4));
    CHECK(got.q.mean() <= p + 1e-9);
    CHECK(got.beta >= 0.0);
    CHECK(std::abs(got.beta * (p - got.q.mean())) <= 1e-6);
  }
}

TEST_CASE("KL projection: unconstrained case and the closed form") {
  PerExampleTerms t;
  t.A = Vector::Constant(4, 3.0);
  t.B = Vector::Constant(4, 1.0);
  const auto loose = i_project_kl(t, 1.0);
  CHECK(loose.beta == 0.0);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(loose.q[i] == doctest::Approx(sigmoid(2.0)));

  const auto tight = i_project_kl(t, 0.5);
  CHECK(tight.q.mean() == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(tight.beta == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("KL projection: P_full = 0 forces every row to f1") {
  std::mt19937_64 rng(3);
  const auto t = random_terms(rng, 9);
  const auto r = i_project_kl(t, 0.0);
  CHECK(r.q.isZero());
}

TEST_CASE("KL projection beats random feasible points on its own objective") {
  std::mt19937_64 rng(5);
  for (int inst = 0; inst < 20; ++inst) {
    const auto t = random_terms(rng, 15);
    const double p = 0.3;
    const double best = kl_projection_objective(t, i_project_kl(t, p).q);
    for (int k = 0; k < 50; ++k) {
      Vector q = testutil::random_unit(rng, 15);
      if (q.mean() > p) q *= p / q.mean();
      CHECK(best <= kl_projection_objective(t, q) + 1e-12);
    }
  }
}

TEST_CASE("KL projection rejects bad input") {
  PerExampleTerms t{Vector::Ones(2), Vector::Ones(2)};
  CHECK_THROWS_AS(i_project_kl(t, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(i_project_kl(t, -0.1), std::invalid_argument);
  t.A[0] = std::nan("");
  CHECK_THROWS_AS(i_project_kl(t, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(i_project_kl(PerExampleTerms{Vector(0), Vector(0)}, 0.5), std::invalid_argument);
}

TEST_CASE("terms for the KL step") {
  Vector m(2), g(2), y(2);
  m << 1.0, -2.0;
  g << 0.5, -1.0;
  y << 1.0, 1.0;
  F0Scores f0;
  f0.logp = {-0.2, -3.0};
  const auto t = compute_terms_kl(m, g, f0);
  CHECK(t.A[0] == doctest::Approx(logistic_loss(1.0) + softplus(0.5)));
  CHECK(t.B[1] == doctest::Approx(3.0 + softplus(1.0)));
  CHECK_THROWS_AS(compute_terms_kl(m, Vector::Zero(3), f0), std::invalid_argument);
}

TEST_CASE("capped box projection satisfies the variational inequality") {
  std::mt19937_64 rng(13);
  for (int inst = 0; inst < 40; ++inst) {
    const Vector w = testutil::random_vector(rng, 12, 1.5);
    const double p = 0.25;
    const Vector v = project_capped_box(w, p);
    CHECK(v.minCoeff() >= 0.0);
    CHECK(v.maxCoeff() <= 1.0);
    CHECK(v.mean() <= p + 1e-12);
    for (int k = 0; k < 50; ++k) {
      Vector z = testutil::random_unit(rng, 12);
      if (z.mean() > p) z *= p / z.mean();
      CHECK((w - v).dot(z - v) <= 1e-9);
    }
  }
  Vector inside(3);
  inside << 0.1, 0.2, 0.0;
  CHECK(project_capped_box(inside, 0.5) == inside);
}

TEST_CASE("scalar symmetrized solver finds the dense-grid minimum") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> N(0.0, 3.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int inst = 0; inst < 60; ++inst) {
    const double a = N(rng), g = N(rng), rho = 4.0 * U(rng), c = U(rng);
    auto h = [&](double q) { return (1.0 - q) * a + sym_logodds_dist(q, g) + 0.5 * rho * (q - c) * (q - c); };
    double best = 1e300;
    for (int k = 1; k < 200000; ++k) best = std::min(best, h(k / 200000.0));
    const double q = solve_symmetrized_scalar(a, g, rho, c);
    CHECK(q > 0.0);
    CHECK(q < 1.0);
    CHECK(h(q) <= best + 1e-8);
  }
}

TEST_CASE("symmetrized ADMM: feasible, and matches per-row minima when the cap is slack") {
  std::mt19937_64 rng(19);
  const Vector A = testutil::random_vector(rng, 30, 2.0);
  const Vector g = testutil::random_vector(rng, 30, 2.0);

  const auto loose = project_symmetrized(A, g, 1.0);
  for (Eigen::Index i = 0; i < 30; ++i) {
    const double want = solve_symmetrized_scalar(A[i], g[i], 0.0, 0.0);
    auto h = [&](double q) { return (1.0 - q) * A[i] + sym_logodds_dist(q, g[i]); };
    CHECK(h(loose.q[i]) <= h(want) + 1e-6);
  }

  for (const double p : {0.1, 0.3, 0.6}) {
    const auto r = project_symmetrized(A, g, p);
    CHECK(r.q.mean() <= p + 1e-6);
    CHECK(r.q.minCoeff() >= 0.0);
    CHECK(r.q.maxCoeff() <= 1.0);
  }
  CHECK(project_symmetrized(A, g, 0.0).q.isZero());
  CHECK_THROWS_AS(project_symmetrized(A, g, 0.5, AdmmConfig{0.0, 10, 1e-6}), std::invalid_argument);
}
