#include "platoon/validation.hpp"

#include "platoon/actuation.hpp"
#include "platoon/oracles.hpp"
#include "platoon/reference.hpp"
#include "platoon/residual.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace platoon {

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << v;
  return s.str();
}

}  // namespace

PropertyResult check_qp_oracle(const ValidationOptions& opts) {
  PropertyResult r{"qp-oracle-equivalence", true, ""};
  std::mt19937_64 rng(mix_seed(opts.seed, 1));
  std::uniform_int_distribution<int> dn(1, 8), dm(0, 12), coin(0, 9);
  double worst_obj = 0.0, worst_kkt = 0.0;
  int mismatches = 0, optimal = 0;
  for (int t = 0; t < opts.qp_instances; ++t) {
    const int n = dn(rng), m = dm(rng);
    const qp::QpProblem p = oracle::random_qp(rng, n, m, coin(rng) != 0);
    const auto ref = oracle::brute_force_qp(p);
    const qp::QpSolution sol = qp::solve(p);
    if (!ref) {
      if (sol.status != qp::Status::Infeasible) ++mismatches;
      continue;
    }
    if (sol.status != qp::Status::Optimal) {
      ++mismatches;
      continue;
    }
    ++optimal;
    worst_obj = std::max(worst_obj, std::abs(sol.objective - ref->objective));
    worst_kkt = std::max({worst_kkt, sol.kkt.stationarity, sol.kkt.primal_violation, sol.kkt.complementarity});
  }
  r.passed = mismatches == 0 && worst_obj <= 1e-6 && worst_kkt <= 1e-8;
  r.detail = std::to_string(opts.qp_instances) + " instances, " + std::to_string(optimal) + " optimal, " +
             std::to_string(mismatches) + " status mismatches, max |dobj| " + fmt(worst_obj) + ", max kkt " +
             fmt(worst_kkt);
  return r;
}

PropertyResult check_prediction_rollout(const ValidationOptions& opts) {
  PropertyResult r{"prediction-rollout-consistency", true, ""};
  std::mt19937_64 rng(mix_seed(opts.seed, 2));
  std::uniform_int_distribution<int> di(1, 3), dn(1, 5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < opts.prediction_instances; ++t) {
    const std::size_t I = static_cast<std::size_t>(di(rng));
    const int N = dn(rng);
    VehicleParams vp{0.05 + 0.1 * (U(rng) + 1.0), 0.3 + 0.5 * (U(rng) + 1.0), 1.0 + 0.5 * U(rng), 2.0 * U(rng)};
    const PlatoonModel model = build_platoon_model(vp, I);
    const auto In = static_cast<Eigen::Index>(I);
    Vec s(3 * In), u_prev(In), du(In * N);
    for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = 20.0 * U(rng);
    for (Eigen::Index i = 0; i < In; ++i) u_prev(i) = 15.0 + 5.0 * U(rng);
    for (Eigen::Index i = 0; i < du.size(); ++i) du(i) = U(rng);
    const PlatoonState x = PlatoonState::from_stacked(s);
    const PredictionMatrices pred = opts.prediction_builder(model, N);
    const Vec condensed = pred.predict(x, u_prev, du);
    const Vec rolled = oracle::rollout_prediction(model, x, u_prev, du, N);
    worst = std::max(worst, (condensed - rolled).cwiseAbs().maxCoeff());
  }
  r.passed = worst <= 1e-9;
  r.detail = std::to_string(opts.prediction_instances) + " instances, max deviation " + fmt(worst);
  return r;
}

PropertyResult check_gradients(const ValidationOptions& opts) {
  PropertyResult r{"mlp-gradient-check", true, ""};
  std::mt19937_64 rng(mix_seed(opts.seed, 3));
  std::normal_distribution<double> N(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < opts.gradient_cases; ++t) {
    residual::MlpConfig cfg;
    cfg.init_seed = rng();
    residual::Mlp mlp = residual::init_mlp(cfg);
    // Non-zero biases so every parameter group is exercised.
    for (Eigen::Index i = 0; i < mlp.b1().size(); ++i) mlp.b1()(i) = 0.1 * N(rng);
    mlp.b2() = 0.1 * N(rng);
    const Eigen::Vector3d x(N(rng), N(rng), N(rng));
    const double y = N(rng);
    worst = std::max(worst, residual::max_relative_error(residual::loss_gradient(mlp, x, y),
                                                         residual::numeric_gradient(mlp, x, y, 1e-5)));
  }
  r.passed = worst < 1e-4;
  r.detail = std::to_string(opts.gradient_cases) + " cases, max relative error " + fmt(worst);
  return r;
}

PropertyResult check_idm_jam() {
  const double a = idm_accel(0.0, 0.0, 2.0, IdmParams{});
  return {"idm-jam-equilibrium", a == 0.0, "a(v=0, s=2) = " + fmt(a)};
}

PropertyResult check_idm_free_flow() {
  const double a = idm_accel(33.3, 0.0, 1e9, IdmParams{});
  return {"idm-free-flow-equilibrium", std::abs(a) < 1e-6, "a(v=33.3, s=1e9) = " + fmt(a)};
}

PropertyResult check_idm_platoon_drift() {
  const double dt = 0.1, v = 15.0;
  const LeadProfile lead = LeadProfile::constant(v, dt, 100 * dt);
  const ReferenceTrajectory traj = generate_idm_reference(lead, 5, IdmParams{}, dt);
  const double drift = (traj.velocities().array() - v).abs().maxCoeff();
  return {"idm-platoon-drift", drift < 1e-3, "max |v - v0| over 100 steps " + fmt(drift)};
}

PropertyResult check_disturbance_formulas() {
  NormalStream rng(1);
  const auto affine = DisturbanceModel::affine(0.0);
  const auto quad = DisturbanceModel::quadratic(0.0);
  const double a10 = apply_disturbance(10.0, affine, rng), q10 = apply_disturbance(10.0, quad, rng);
  const double a20 = apply_disturbance(20.0, affine, rng), q20 = apply_disturbance(20.0, quad, rng);
  const bool ok = std::abs(a10 - 8.0) < 1e-12 && std::abs(q10 - 8.0) < 1e-12 && std::abs(a20 - 19.0) < 1e-12 &&
                  std::abs(q20 - 21.0) < 1e-12;
  return {"disturbance-formulas", ok,
          "affine(10, 20) = " + fmt(a10) + ", " + fmt(a20) + "; quadratic(10, 20) = " + fmt(q10) + ", " + fmt(q20)};
}

std::vector<PropertyResult> run_validation(const ValidationOptions& opts) {
  return {check_qp_oracle(opts),   check_prediction_rollout(opts), check_gradients(opts),
          check_idm_jam(),         check_idm_free_flow(),          check_idm_platoon_drift(),
          check_disturbance_formulas()};
}

}  // namespace platoon
