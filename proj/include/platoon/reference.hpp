#pragma once

#include "platoon/dynamics.hpp"
#include "platoon/mpc.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace platoon {

/// Intelligent driver model constants.
struct IdmParams {
  double v0 = 33.3;     // desired speed [m/s]
  double T = 1.6;       // safe time headway [s]
  double a_max = 0.73;  // maximum acceleration [m/s^2]
  double b = 1.67;      // comfortable deceleration [m/s^2]
  double delta = 4.0;   // acceleration exponent
  double s0 = 2.0;      // jam distance [m]
  double s1 = 0.0;      // speed-dependent jam distance [m]

  void validate() const;
};

/// s*(v, dv) = s0 + s1 sqrt(v/v0) + T v + v dv / (2 sqrt(a_max b)).
double idm_desired_gap(double v, double dv, const IdmParams& p);

/// IDM acceleration for speed v, approach rate dv = v - v_lead and gap s.
/// Throws DomainError when s <= 0.
double idm_accel(double v, double dv, double s, const IdmParams& p);

/// Gap at which a follower at constant speed v (< v0) has zero acceleration.
double idm_equilibrium_gap(double v, const IdmParams& p);

/// Lead-vehicle speed samples at the simulation step.
struct LeadProfile {
  std::vector<double> speeds;
  double initial_position = 0.0;

  /// 20 m/s cruise (5 s), brake to 12 m/s (5 s), cruise (5 s), accelerate to
  /// 25 m/s (10 s), cruise (5 s). Sampled at t = 0, dt, ..., duration.
  static LeadProfile default_scenario(double dt, double duration = 30.0);
  static LeadProfile constant(double speed, double dt, double duration);
};

/// Per-vehicle reference states; vehicles front-to-back, samples k = 0..K.
class ReferenceTrajectory {
 public:
  ReferenceTrajectory() = default;
  ReferenceTrajectory(std::size_t vehicles, std::size_t samples, double dt);

  std::size_t vehicles() const { return static_cast<std::size_t>(p_.rows()); }
  std::size_t samples() const { return static_cast<std::size_t>(p_.cols()); }
  double dt() const { return dt_; }
  bool empty() const { return samples() == 0; }

  Mat& positions() { return p_; }
  Mat& velocities() { return v_; }
  Mat& accelerations() { return a_; }
  const Mat& positions() const { return p_; }
  const Mat& velocities() const { return v_; }
  const Mat& accelerations() const { return a_; }

  /// Reference state at sample k; indices past the end hold the last sample.
  PlatoonState state(std::size_t k) const;
  /// X*_{k+1} .. X*_{k+N}.
  ReferenceWindow window(std::size_t k, int horizon) const;

 private:
  Mat p_, v_, a_;
  double dt_ = 0.0;
};

/// Raised when generated vehicles close a gap to zero.
class GenerationError : public std::runtime_error {
 public:
  GenerationError(std::size_t step, std::size_t vehicle, const std::string& what)
      : std::runtime_error(what), step_(step), vehicle_(vehicle) {}
  std::size_t step() const { return step_; }
  std::size_t vehicle() const { return vehicle_; }

 private:
  std::size_t step_, vehicle_;
};

/// Follower i tracks vehicle i-1 (vehicle 0 tracks the lead) under IDM.
/// An empty `initial_gaps` uses the equilibrium gap at the lead's first speed.
ReferenceTrajectory generate_idm_reference(const LeadProfile& lead, std::size_t count, const IdmParams& params,
                                           double dt, std::vector<double> initial_gaps = {});

/// Column names for trajectory CSV files. An empty position name means the
/// column is absent and positions are integrated from speed.
struct ColumnMap {
  std::string time = "time_s";
  std::vector<std::string> speed;
  std::vector<std::string> position;

  /// v1_speed_mps .. vN_speed_mps with v<i>_pos_m when `with_positions`.
  static ColumnMap standard(std::size_t count, bool with_positions);
  /// Every consecutive v<i>_speed_mps column (from v1) in the header, with
  /// matching v<i>_pos_m where present.
  static ColumnMap detect(const std::vector<std::string>& header);
};

ReferenceTrajectory read_trajectory_csv(std::istream& in, const ColumnMap* columns, double dt_target);
ReferenceTrajectory load_trajectory_csv(const std::string& path, const ColumnMap* columns, double dt_target);

void write_trajectory_csv(std::ostream& out, const ReferenceTrajectory& traj);
void save_trajectory_csv(const std::string& path, const ReferenceTrajectory& traj);

/// Fill accelerations with forward differences of the speeds (last sample
/// repeats the previous one).
void fill_accelerations(ReferenceTrajectory& traj);

}  // namespace platoon
