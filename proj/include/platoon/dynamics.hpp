#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace platoon {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Longitudinal model constants shared by every vehicle in the platoon.
struct VehicleParams {
  double dt = 0.1;    // sampling interval [s]
  double tau = 0.5;   // inertial delay [s]
  double alpha = 1.0; // command -> desired speed gain
  double beta = 0.0;  // desired speed offset

  void validate() const;
};

struct VehicleState {
  double p = 0.0;
  double v = 0.0;
  double a = 0.0;
};

/// Platoon state in grouped-by-quantity order [p1..pI, v1..vI, a1..aI].
class PlatoonState {
 public:
  PlatoonState() = default;
  explicit PlatoonState(std::size_t size);
  PlatoonState(Vec positions, Vec velocities, Vec accelerations);

  static PlatoonState from_stacked(const Vec& stacked);
  Vec stacked() const;

  std::size_t size() const { return static_cast<std::size_t>(p_.size()); }
  VehicleState vehicle(std::size_t i) const;
  void set_vehicle(std::size_t i, const VehicleState& s);

  const Vec& positions() const { return p_; }
  const Vec& velocities() const { return v_; }
  const Vec& accelerations() const { return a_; }
  Vec& positions() { return p_; }
  Vec& velocities() { return v_; }
  Vec& accelerations() { return a_; }

 private:
  Vec p_, v_, a_;
};

struct SingleVehicleMatrices {
  Eigen::Matrix3d A;
  Eigen::Vector3d B;
  Eigen::Vector3d C;
};

/// Stacked platoon model X' = A_I X + B_I U + C_I with A_I = A (x) E_I, B_I = B (x) E_I.
struct PlatoonModel {
  Mat A;  // 3I x 3I
  Mat B;  // 3I x I
  Vec C;  // 3I
  std::size_t count = 0;
  VehicleParams params;
};

SingleVehicleMatrices build_single_matrices(const VehicleParams& params);

VehicleState step_vehicle(const VehicleState& state, double u, const VehicleParams& params);

PlatoonModel build_platoon_model(const VehicleParams& params, std::size_t count);

PlatoonState step_platoon(const PlatoonState& x, const Vec& u, const PlatoonModel& model);

/// Componentwise X - X_ref, stacked.
Vec platoon_error(const PlatoonState& x, const PlatoonState& x_ref);

}  // namespace platoon
