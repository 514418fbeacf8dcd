#include "platoon/dynamics.hpp"
#include "platoon/errors.hpp"

#include "doctest.h"

#include <random>

using namespace platoon;

namespace {

VehicleParams sim(double beta = 0.0) { return {0.1, 0.5, 1.0, beta}; }

Vec random_vec(std::mt19937_64& rng, Eigen::Index n, double scale = 10.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

}  // namespace

TEST_CASE("single-vehicle matrices") {
  const auto m = build_single_matrices(sim());
  CHECK(m.A(0, 0) == 1.0);
  CHECK(m.A(0, 1) == doctest::Approx(0.1));
  CHECK(m.A(0, 2) == doctest::Approx(0.005));
  CHECK(m.A(1, 1) == 1.0);
  CHECK(m.A(1, 2) == doctest::Approx(0.1));
  CHECK(m.A(2, 0) == 0.0);
  CHECK(m.A(2, 1) == doctest::Approx(-0.2));
  CHECK(m.A(2, 2) == 0.0);
  CHECK(m.B(0) == 0.0);
  CHECK(m.B(1) == 0.0);
  CHECK(m.B(2) == doctest::Approx(0.2));
  CHECK(m.C.isZero());

  const auto with_offset = build_single_matrices(sim(5.0));
  CHECK(with_offset.C(2) == doctest::Approx(1.0));
  CHECK(with_offset.C(0) == 0.0);
}

TEST_CASE("invalid parameters are rejected") {
  CHECK_THROWS_AS(build_single_matrices({0.0, 0.5, 1.0, 0.0}), ParameterError);
  CHECK_THROWS_AS(build_single_matrices({0.1, -1.0, 1.0, 0.0}), ParameterError);
  CHECK_THROWS_AS(build_platoon_model(sim(), 0), ParameterError);
}

TEST_CASE("step_vehicle") {
  SUBCASE("command equal to speed keeps speed") {
    const auto s = step_vehicle({0, 10, 0}, 10.0, sim());
    CHECK(s.p == doctest::Approx(1.0));
    CHECK(s.v == doctest::Approx(10.0));
    CHECK(s.a == doctest::Approx(0.0));
  }
  SUBCASE("step input from rest") {
    const auto s = step_vehicle({0, 0, 0}, 10.0, sim());
    CHECK(s.p == 0.0);
    CHECK(s.v == 0.0);
    CHECK(s.a == doctest::Approx(2.0));
  }
  SUBCASE("zero input fixed point") {
    const auto s = step_vehicle({0, 0, 0}, 0.0, sim());
    CHECK(s.p == 0.0);
    CHECK(s.v == 0.0);
    CHECK(s.a == 0.0);
  }
}

TEST_CASE("platoon model structure") {
  const auto one = build_platoon_model(sim(), 1);
  const auto single = build_single_matrices(sim());
  CHECK((one.A - Mat(single.A)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((one.B - Mat(single.B)).cwiseAbs().maxCoeff() == 0.0);

  const auto two = build_platoon_model(sim(), 2);
  CHECK(two.A.rows() == 6);
  CHECK(two.A.cols() == 6);
  CHECK(two.B.rows() == 6);
  CHECK(two.B.cols() == 2);

  const auto three = build_platoon_model(sim(), 3);
  CHECK(three.A(0, 3) == doctest::Approx(0.1));

  // A_I[rI+i][cI+i] = A[r][c], zero elsewhere.
  const std::size_t I = 4;
  const auto m = build_platoon_model(sim(2.0), I);
  const auto s = build_single_matrices(sim(2.0));
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < I; ++j) {
          const double expect = i == j ? s.A(r, c) : 0.0;
          CHECK(m.A(r * I + i, c * I + j) == expect);
        }
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t i = 0; i < I; ++i) {
      CHECK(m.C(r * I + i) == s.C(r));
      for (std::size_t j = 0; j < I; ++j) CHECK(m.B(r * I + i, j) == (i == j ? s.B(r) : 0.0));
    }
}

TEST_CASE("step_platoon matches per-vehicle stepping") {
  std::mt19937_64 rng(7);
  for (double beta : {0.0, 3.0}) {
    const auto params = sim(beta);
    for (std::size_t I = 1; I <= 5; ++I) {
      const auto model = build_platoon_model(params, I);
      for (int trial = 0; trial < 20; ++trial) {
        const auto x = PlatoonState::from_stacked(random_vec(rng, 3 * I));
        const Vec u = random_vec(rng, I);
        const auto next = step_platoon(x, u, model);
        for (std::size_t i = 0; i < I; ++i) {
          const auto e = step_vehicle(x.vehicle(i), u(i), params);
          const auto g = next.vehicle(i);
          CHECK(std::abs(g.p - e.p) <= 1e-12);
          CHECK(std::abs(g.v - e.v) <= 1e-12);
          CHECK(std::abs(g.a - e.a) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("two identical vehicles follow the single-vehicle result") {
  const auto model = build_platoon_model(sim(), 2);
  const PlatoonState x(Vec::Zero(2), Vec::Constant(2, 10.0), Vec::Zero(2));
  const auto next = step_platoon(x, Vec::Constant(2, 10.0), model);
  CHECK(next.positions()(0) == doctest::Approx(1.0));
  CHECK(next.positions()(1) == doctest::Approx(1.0));
  CHECK(next.velocities()(1) == doctest::Approx(10.0));

  const auto zero = step_platoon(PlatoonState(2), Vec::Zero(2), model);
  CHECK(zero.stacked().isZero(0.0));
}

TEST_CASE("superposition with beta = 0") {
  std::mt19937_64 rng(11);
  const auto model = build_platoon_model(sim(), 3);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec x1 = random_vec(rng, 9), x2 = random_vec(rng, 9);
    const Vec u1 = random_vec(rng, 3), u2 = random_vec(rng, 3);
    const Vec lhs = step_platoon(PlatoonState::from_stacked(x1 + x2), u1 + u2, model).stacked();
    const Vec rhs = step_platoon(PlatoonState::from_stacked(x1), u1, model).stacked() +
                    step_platoon(PlatoonState::from_stacked(x2), u2, model).stacked();
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("dimension mismatch") {
  const auto model = build_platoon_model(sim(), 2);
  CHECK_THROWS_AS(step_platoon(PlatoonState(3), Vec::Zero(3), model), DimensionError);
  CHECK_THROWS_AS(step_platoon(PlatoonState(2), Vec::Zero(3), model), DimensionError);
  CHECK_THROWS_AS(platoon_error(PlatoonState(2), PlatoonState(3)), DimensionError);
}

TEST_CASE("platoon_error") {
  std::mt19937_64 rng(3);
  const auto x = PlatoonState::from_stacked(random_vec(rng, 6));
  CHECK(platoon_error(x, x).isZero(0.0));

  PlatoonState a(2), b(2);
  a.positions() << 10, 5;
  b.positions() << 12, 5;
  const Vec e = platoon_error(a, b);
  CHECK(e(0) == -2.0);
  CHECK(e(1) == 0.0);

  const auto ref = PlatoonState::from_stacked(random_vec(rng, 6));
  const Vec err = platoon_error(x, ref);
  CHECK(((ref.stacked() + err) - x.stacked()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("state stacking round trip") {
  std::mt19937_64 rng(5);
  const Vec s = random_vec(rng, 12);
  const auto x = PlatoonState::from_stacked(s);
  CHECK(x.size() == 4);
  CHECK((x.stacked() - s).isZero(0.0));
  CHECK(x.vehicle(2).v == s(4 + 2));
}
