#include "platoon/oracles.hpp"
#include "platoon/qp.hpp"

#include "doctest.h"

#include <random>

using namespace platoon;
using namespace platoon::qp;

namespace {

Mat m1(double v) { return Mat::Constant(1, 1, v); }
Vec v1(double v) { return Vec::Constant(1, v); }

}  // namespace

TEST_CASE("unconstrained parabola") {
  const QpProblem p(m1(1.0), v1(-1.0));
  const auto s = solve(p);
  REQUIRE(s.status == Status::Optimal);
  CHECK(s.x(0) == doctest::Approx(1.0));
  CHECK(s.objective == doctest::Approx(-1.0));
}

TEST_CASE("projection onto a half-line") {
  const QpProblem p(m1(1.0), v1(0.0), m1(-1.0), v1(-1.0));
  const auto s = solve(p);
  REQUIRE(s.status == Status::Optimal);
  CHECK(s.x(0) == doctest::Approx(1.0));
  CHECK(s.mu(0) > 0.0);
  CHECK(s.mu(0) == doctest::Approx(2.0));
}

TEST_CASE("symmetric projection in two variables") {
  const QpProblem p(Mat::Identity(2, 2), Vec::Zero(2), Mat::Constant(1, 2, -1.0), v1(-2.0));
  const auto s = solve(p);
  REQUIRE(s.status == Status::Optimal);
  CHECK(s.x(0) == doctest::Approx(1.0));
  CHECK(s.x(1) == doctest::Approx(1.0));
  CHECK(s.kkt.stationarity <= 1e-8);
}

TEST_CASE("check_kkt") {
  const QpProblem p(m1(1.0), v1(0.0), m1(-1.0), v1(-1.0));
  SUBCASE("optimum with mu = 2") {
    const auto k = check_kkt(p, v1(1.0), v1(2.0));
    CHECK(k.stationarity == doctest::Approx(0.0));
    CHECK(k.primal_violation == 0.0);
    CHECK(k.complementarity == doctest::Approx(0.0));
  }
  SUBCASE("interior non-optimal point") {
    const auto k = check_kkt(p, v1(3.0), v1(0.0));
    CHECK(k.stationarity > 0.0);
    CHECK(k.primal_violation == 0.0);
  }
  SUBCASE("infeasible point") {
    const auto k = check_kkt(p, v1(0.0), v1(0.0));
    CHECK(k.primal_violation > 0.0);
  }
}

TEST_CASE("non positive definite H is rejected") {
  CHECK_THROWS_AS(solve(QpProblem(m1(-1.0), v1(0.0))), NotPositiveDefinite);
  CHECK_THROWS_AS(solve(QpProblem(Mat::Zero(2, 2), Vec::Zero(2))), NotPositiveDefinite);
}

TEST_CASE("infeasible constraints are reported") {
  // x >= 2 and x <= 1
  Mat G(2, 1);
  G << -1, 1;
  Vec h(2);
  h << -2, 1;
  const auto s = solve(QpProblem(m1(1.0), v1(0.0), G, h));
  CHECK(s.status == Status::Infeasible);
  CHECK(s.most_violated >= 0);
  CHECK(s.most_violated < 2);
}

TEST_CASE("H is symmetrized on intake") {
  Mat H(2, 2);
  H << 2, 1, 0, 2;
  const QpProblem p(H, Vec::Zero(2));
  CHECK(p.H()(0, 1) == 0.5);
  CHECK(p.H()(1, 0) == 0.5);
}

TEST_CASE("random instances match the brute-force oracle") {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<int> nd(1, 8), md(0, 12);
  int optimal = 0;
  for (int t = 0; t < 300; ++t) {
    const int n = nd(rng), m = md(rng);
    const auto p = oracle::random_qp(rng, n, m, t % 5 != 0);
    const auto s = solve(p);
    const auto bf = oracle::brute_force_qp(p);
    if (bf) {
      REQUIRE(s.status == Status::Optimal);
      ++optimal;
      CHECK(std::abs(s.objective - bf->objective) <= 1e-6);
      CHECK(s.kkt.stationarity <= 1e-8);
      CHECK(s.kkt.primal_violation <= 1e-8);
      CHECK(s.kkt.complementarity <= 1e-8);
      CHECK((s.mu.array() >= 0.0).all());
    } else {
      CHECK(s.status == Status::Infeasible);
    }
  }
  CHECK(optimal > 200);
}

TEST_CASE("adding a constraint never lowers the optimum") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 100; ++t) {
    const auto full = oracle::random_qp(rng, 5, 8, true);
    const QpProblem fewer(full.H(), full.f(), full.G().topRows(7), full.h().head(7));
    const auto a = solve(fewer), b = solve(full);
    REQUIRE(a.status == Status::Optimal);
    REQUIRE(b.status == Status::Optimal);
    CHECK(b.objective >= a.objective - 1e-9);
  }
}

TEST_CASE("scaling H and f leaves the argmin unchanged") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    const auto p = oracle::random_qp(rng, 6, 9, true);
    const QpProblem scaled(p.H() * 7.5, p.f() * 7.5, p.G(), p.h());
    const auto a = solve(p), b = solve(scaled);
    REQUIRE(a.status == Status::Optimal);
    REQUIRE(b.status == Status::Optimal);
    CHECK((a.x - b.x).cwiseAbs().maxCoeff() <= 1e-7);
  }
}

TEST_CASE("determinism and warm start") {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 50; ++t) {
    const auto p = oracle::random_qp(rng, 8, 12, true);
    const auto a = solve(p), b = solve(p);
    CHECK(a.x == b.x);
    CHECK(a.mu == b.mu);
    CHECK(a.iterations == b.iterations);

    const auto warm1 = solve(p, {}, a.x);
    const auto warm2 = solve(p, {}, a.x);
    CHECK(warm1.x == warm2.x);
    REQUIRE(warm1.status == Status::Optimal);
    CHECK(std::abs(warm1.objective - a.objective) <= 1e-8);
  }
}

TEST_CASE("oracle rejects oversized problems") {
  std::mt19937_64 rng(1);
  const auto p = oracle::random_qp(rng, 3, 21, true);
  CHECK_THROWS(oracle::brute_force_qp(p));
}
