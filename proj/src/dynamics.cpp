#include "platoon/dynamics.hpp"

#include "platoon/errors.hpp"

#include <cmath>
#include <string>

namespace platoon {

void VehicleParams::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ParameterError("dt must be positive, got " + std::to_string(dt));
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ParameterError("tau must be positive, got " + std::to_string(tau));
  if (alpha == 0.0 || !std::isfinite(alpha)) throw ParameterError("alpha must be finite and non-zero");
  if (!std::isfinite(beta)) throw ParameterError("beta must be finite");
}

PlatoonState::PlatoonState(std::size_t size)
    : p_(Vec::Zero(static_cast<Eigen::Index>(size))),
      v_(Vec::Zero(static_cast<Eigen::Index>(size))),
      a_(Vec::Zero(static_cast<Eigen::Index>(size))) {}

PlatoonState::PlatoonState(Vec positions, Vec velocities, Vec accelerations)
    : p_(std::move(positions)), v_(std::move(velocities)), a_(std::move(accelerations)) {
  if (p_.size() != v_.size() || p_.size() != a_.size()) {
    throw DimensionError("platoon state vectors must share one length");
  }
}

PlatoonState PlatoonState::from_stacked(const Vec& stacked) {
  if (stacked.size() % 3 != 0) throw DimensionError("stacked platoon state length must be a multiple of 3");
  const Eigen::Index n = stacked.size() / 3;
  return PlatoonState(stacked.segment(0, n), stacked.segment(n, n), stacked.segment(2 * n, n));
}

Vec PlatoonState::stacked() const {
  const Eigen::Index n = p_.size();
  Vec out(3 * n);
  out << p_, v_, a_;
  return out;
}

VehicleState PlatoonState::vehicle(std::size_t i) const {
  const auto k = static_cast<Eigen::Index>(i);
  return {p_(k), v_(k), a_(k)};
}

void PlatoonState::set_vehicle(std::size_t i, const VehicleState& s) {
  const auto k = static_cast<Eigen::Index>(i);
  p_(k) = s.p;
  v_(k) = s.v;
  a_(k) = s.a;
}

SingleVehicleMatrices build_single_matrices(const VehicleParams& params) {
  params.validate();
  const double dt = params.dt;
  const double r = dt / params.tau;
  SingleVehicleMatrices m;
  m.A << 1.0, dt, 0.5 * dt * dt,
         0.0, 1.0, dt,
         0.0, -r, 0.0;
  m.B << 0.0, 0.0, params.alpha * r;
  m.C << 0.0, 0.0, params.beta * r;
  return m;
}

VehicleState step_vehicle(const VehicleState& s, double u, const VehicleParams& params) {
  const auto m = build_single_matrices(params);
  const Eigen::Vector3d x(s.p, s.v, s.a);
  const Eigen::Vector3d next = m.A * x + m.B * u + m.C;
  return {next(0), next(1), next(2)};
}

PlatoonModel build_platoon_model(const VehicleParams& params, std::size_t count) {
  if (count == 0) throw ParameterError("platoon size must be at least 1");
  const auto single = build_single_matrices(params);
  const auto n = static_cast<Eigen::Index>(count);

  PlatoonModel model;
  model.count = count;
  model.params = params;
  model.A = Mat::Zero(3 * n, 3 * n);
  model.B = Mat::Zero(3 * n, n);
  model.C = Vec::Zero(3 * n);
  for (Eigen::Index r = 0; r < 3; ++r) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < 3; ++c) model.A(r * n + i, c * n + i) = single.A(r, c);
      model.B(r * n + i, i) = single.B(r);
      model.C(r * n + i) = single.C(r);
    }
  }
  return model;
}

PlatoonState step_platoon(const PlatoonState& x, const Vec& u, const PlatoonModel& model) {
  if (x.size() != model.count || static_cast<std::size_t>(u.size()) != model.count) {
    throw DimensionError("step_platoon: state/command size does not match the model (" +
                         std::to_string(model.count) + " vehicles)");
  }
  return PlatoonState::from_stacked(model.A * x.stacked() + model.B * u + model.C);
}

Vec platoon_error(const PlatoonState& x, const PlatoonState& x_ref) {
  if (x.size() != x_ref.size()) throw DimensionError("platoon_error: state sizes differ");
  return x.stacked() - x_ref.stacked();
}

}  // namespace platoon
