#include "platoon/errors.hpp"
#include "platoon/reference.hpp"

#include "doctest.h"

#include <sstream>

using namespace platoon;

namespace {

double max_kinematic_defect(const ReferenceTrajectory& r) {
  double worst = 0.0;
  const double dt = r.dt();
  for (std::size_t i = 0; i < r.vehicles(); ++i)
    for (std::size_t k = 0; k + 1 < r.samples(); ++k) {
      const auto a = static_cast<Eigen::Index>(i), c = static_cast<Eigen::Index>(k);
      const double d = r.positions()(a, c + 1) - r.positions()(a, c) - r.velocities()(a, c) * dt -
                       0.5 * r.accelerations()(a, c) * dt * dt;
      worst = std::max(worst, std::abs(d));
    }
  return worst;
}

ReferenceTrajectory parse(const std::string& text, double dt = 0.1) {
  std::istringstream in(text);
  return read_trajectory_csv(in, nullptr, dt);
}

}  // namespace

TEST_CASE("IDM acceleration") {
  const IdmParams p;
  CHECK(idm_desired_gap(0.0, 0.0, p) == 2.0);
  CHECK(idm_accel(0.0, 0.0, 2.0, p) == 0.0);
  CHECK(idm_accel(16.65, 0.0, 1e9, p) == doctest::Approx(0.684375).epsilon(1e-9));
  CHECK(std::abs(idm_accel(33.3, 0.0, 1e9, p)) < 1e-6);
  CHECK_THROWS_AS(idm_accel(10.0, 0.0, 0.0, p), DomainError);
  CHECK_THROWS_AS(idm_accel(10.0, 0.0, -1.0, p), DomainError);
  // Approaching a slower leader brakes harder than matching its speed.
  CHECK(idm_accel(20.0, 2.0, 40.0, p) < idm_accel(20.0, 0.0, 40.0, p));
}

TEST_CASE("IDM equilibrium gap") {
  const IdmParams p;
  for (double v : {0.0, 5.0, 15.0, 25.0, 30.0}) {
    const double s = idm_equilibrium_gap(v, p);
    CHECK(std::abs(idm_accel(v, 0.0, s, p)) < 1e-12);
  }
  CHECK_THROWS_AS(idm_equilibrium_gap(p.v0, p), DomainError);
}

TEST_CASE("parameter validation") {
  IdmParams p;
  p.T = 0.0;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = IdmParams{};
  p.delta = 0.5;
  CHECK_THROWS_AS(p.validate(), ParameterError);
}

TEST_CASE("equilibrium platoon holds its speed") {
  const IdmParams p;
  const double dt = 0.1, v = 15.0;
  const auto lead = LeadProfile::constant(v, dt, 10.0);
  CHECK(lead.speeds.size() == 101);
  const auto ref = generate_idm_reference(lead, 5, p, dt);
  CHECK(ref.samples() == 101);
  CHECK((ref.velocities().array() - v).abs().maxCoeff() < 1e-3);
  CHECK(ref.accelerations().cwiseAbs().maxCoeff() < 1e-3);
  const double gap = idm_equilibrium_gap(v, p);
  CHECK(ref.positions()(0, 0) == doctest::Approx(-gap));
  CHECK(ref.positions()(1, 0) == doctest::Approx(-2.0 * gap));
}

TEST_CASE("follower of a braking leader keeps the jam distance") {
  const IdmParams p;
  const double dt = 0.1;
  LeadProfile lead;
  for (int k = 0; k <= 300; ++k) lead.speeds.push_back(std::max(5.0, 20.0 - 0.1 * k));
  const auto ref = generate_idm_reference(lead, 1, p, dt);
  double lead_p = 0.0, min_gap = 1e9;
  for (std::size_t k = 0; k < lead.speeds.size(); ++k) {
    min_gap = std::min(min_gap, lead_p - ref.positions()(0, static_cast<Eigen::Index>(k)));
    if (k + 1 < lead.speeds.size()) lead_p += 0.5 * (lead.speeds[k] + lead.speeds[k + 1]) * dt;
  }
  CHECK(min_gap >= p.s0);
  CHECK(ref.velocities()(0, 300) < 6.0);
  CHECK(ref.velocities()(0, 100) < ref.velocities()(0, 0));
  CHECK(ref.velocities().minCoeff() >= 0.0);
}

TEST_CASE("default scenario") {
  const double dt = 0.1;
  const auto lead = LeadProfile::default_scenario(dt);
  REQUIRE(lead.speeds.size() == 301);
  CHECK(lead.speeds.front() == 20.0);
  CHECK(lead.speeds[50] == doctest::Approx(20.0));
  CHECK(lead.speeds[100] == doctest::Approx(12.0));
  CHECK(lead.speeds[150] == doctest::Approx(12.0));
  CHECK(lead.speeds[250] == doctest::Approx(25.0));
  CHECK(lead.speeds.back() == doctest::Approx(25.0));

  const auto ref = generate_idm_reference(lead, 5, IdmParams{}, dt);
  CHECK(max_kinematic_defect(ref) <= 1e-6);
  for (std::size_t k = 0; k < ref.samples(); ++k)
    for (Eigen::Index i = 0; i + 1 < 5; ++i)
      CHECK(ref.positions()(i, static_cast<Eigen::Index>(k)) > ref.positions()(i + 1, static_cast<Eigen::Index>(k)));
}

TEST_CASE("degenerate generation inputs") {
  const IdmParams p;
  CHECK(generate_idm_reference(LeadProfile{}, 3, p, 0.1).empty());
  const auto lead = LeadProfile::constant(10.0, 0.1, 1.0);
  CHECK_THROWS_AS(generate_idm_reference(lead, 2, p, 0.1, {1.0, 10.0}), ParameterError);
  CHECK_THROWS_AS(generate_idm_reference(lead, 2, p, 0.1, {10.0}), DimensionError);
  CHECK_THROWS_AS(generate_idm_reference(lead, 0, p, 0.1), ParameterError);
}

TEST_CASE("windows past the end hold the last sample") {
  const auto ref = generate_idm_reference(LeadProfile::constant(10.0, 0.1, 1.0), 2, IdmParams{}, 0.1);
  const auto w = ref.window(8, 5);
  REQUIRE(w.stacked.size() == 6 * 5);
  const Vec last = ref.state(10).stacked();
  for (int n = 1; n < 5; ++n) CHECK((w.stacked.segment(6 * n, 6) - last).isZero(0.0));
  CHECK((ref.state(50).stacked() - last).isZero(0.0));
}

TEST_CASE("CSV loading") {
  SUBCASE("constant speed without positions") {
    const auto r = parse("time_s,v1_speed_mps\n0,10\n1,10\n");
    REQUIRE(r.samples() == 11);
    for (Eigen::Index k = 0; k < 11; ++k) {
      CHECK(r.positions()(0, k) == doctest::Approx(static_cast<double>(k)));
      CHECK(r.velocities()(0, k) == 10.0);
      CHECK(r.accelerations()(0, k) == 0.0);
    }
  }
  SUBCASE("positions and resampling") {
    const auto r = parse("time_s,v1_speed_mps,v1_pos_m,v2_speed_mps\n0,0,5,1\n2,4,9,1\n", 0.5);
    CHECK(r.vehicles() == 2);
    CHECK(r.samples() == 5);
    CHECK(r.velocities()(0, 1) == doctest::Approx(1.0));
    CHECK(r.positions()(0, 2) == doctest::Approx(7.0));
    CHECK(r.accelerations()(0, 0) == doctest::Approx(2.0));
    CHECK(r.positions()(1, 4) == doctest::Approx(2.0));
  }
  SUBCASE("non-monotone time reports the row") {
    try {
      parse("time_s,v1_speed_mps\n0,1\n0.2,1\n0.1,1\n0.3,1\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.row() == 4);
    }
  }
  SUBCASE("NaN cell") {
    try {
      parse("time_s,v1_speed_mps\n0,1\n0.1,nan\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.row() == 3);
    }
  }
  SUBCASE("missing column") {
    ColumnMap m = ColumnMap::standard(2, false);
    std::istringstream in("time_s,v1_speed_mps\n0,1\n");
    CHECK_THROWS_AS(read_trajectory_csv(in, &m, 0.1), ParseError);
    CHECK_THROWS_AS(parse("t,v1_speed_mps\n0,1\n"), ParseError);
    CHECK_THROWS_AS(parse("time_s,speed\n0,1\n"), ParseError);
  }
  SUBCASE("ragged row and empty file") {
    CHECK_THROWS_AS(parse("time_s,v1_speed_mps\n0,1\n0.1\n"), ParseError);
    CHECK_THROWS_AS(parse(""), ParseError);
    CHECK_THROWS_AS(parse("time_s,v1_speed_mps\n"), ParseError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_trajectory_csv("/nonexistent/trajectory.csv", nullptr, 0.1), ParseError);
  }
}

TEST_CASE("CSV round trip and determinism") {
  const auto ref = generate_idm_reference(LeadProfile::default_scenario(0.1), 3, IdmParams{}, 0.1);
  std::ostringstream out;
  write_trajectory_csv(out, ref);
  const auto back = parse(out.str());
  REQUIRE(back.samples() == ref.samples());
  REQUIRE(back.vehicles() == ref.vehicles());
  CHECK((back.positions() - ref.positions()).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((back.velocities() - ref.velocities()).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((back.accelerations() - ref.accelerations()).cwiseAbs().maxCoeff() <= 1e-6);

  const auto again = parse(out.str());
  CHECK(again.positions() == back.positions());
  CHECK(again.velocities() == back.velocities());
  CHECK(again.accelerations() == back.accelerations());
}
