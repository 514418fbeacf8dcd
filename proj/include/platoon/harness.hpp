#pragma once

#include "platoon/actuation.hpp"
#include "platoon/dynamics.hpp"
#include "platoon/mpc.hpp"
#include "platoon/reference.hpp"
#include "platoon/residual.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace platoon {

enum class ControllerVariant { Physics, NnOnly, Perl };

std::string to_string(ControllerVariant v);
ControllerVariant controller_variant_from_string(const std::string& s);

/// Ground-truth actuation residual added on the plant side, as a function of
/// the vehicle's current speed: R(v) = c0 + c1 v + c2 v^2 (speed units).
struct TruthResidual {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;

  double operator()(double v) const { return c0 + c1 * v + c2 * v * v; }
  bool zero() const { return c0 == 0.0 && c1 == 0.0 && c2 == 0.0; }
};

enum class ReferenceKind { Idm, Csv };
enum class LeadKind { Default, Constant };

struct ReferenceSource {
  ReferenceKind kind = ReferenceKind::Idm;
  std::string csv_path;            // ReferenceKind::Csv
  LeadKind lead = LeadKind::Default;
  double lead_speed = 20.0;        // LeadKind::Constant
  double lead_initial_position = 0.0;
  IdmParams idm;
  std::vector<double> initial_gaps;  // empty: equilibrium gap at the initial lead speed
};

struct ScenarioConfig {
  std::size_t vehicles = 5;
  double dt = 0.1;
  double duration = 30.0;
  double tau = 0.5;
  MpcConfig mpc;
  ActuationParams actuation;
  DisturbanceModel disturbance = DisturbanceModel::affine();
  TruthResidual truth_residual;
  ControllerVariant variant = ControllerVariant::Perl;
  residual::MlpConfig mlp;
  std::size_t buffer_capacity = 200;
  int update_period = 20;
  ReferenceSource reference;
  std::vector<double> initial_position_offsets;  // empty or one per vehicle
  std::vector<double> initial_speed_offsets;
  std::uint64_t master_seed = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  std::size_t steps() const;
  VehicleParams vehicle_params() const { return {dt, tau, actuation.alpha, actuation.beta}; }

  /// Robot-platform preset: robot actuation constants, 80 ms control cycle and
  /// network updates every 5 cycles.
  static ScenarioConfig robot_preset();
};

/// Everything measured or commanded at one control step. Per-vehicle vectors
/// have one entry per vehicle, front to back.
struct StepRecord {
  std::size_t k = 0;
  Vec p_ref, v_ref, a_ref;
  Vec p, v, a;
  Vec u_nominal;      // MPC command (command units)
  Vec v_desired;      // alpha * u_nominal + beta
  Vec residual_pred;  // learned correction used at this step (0 when none)
  Vec u_compensated;  // command after compensation
  Vec u_applied;      // command reaching the plant
  Vec residual_measured;
  qp::Status qp_status = qp::Status::Optimal;
  int qp_iterations = 0;
  bool fallback = false;
  std::vector<residual::TrainReport> training;  // one per vehicle when an update fired
};

struct VehicleMetrics {
  double cae_p = 0, cae_v = 0, mae_p = 0, mae_v = 0, mse_p = 0, mse_v = 0;
};

struct Metrics {
  std::vector<VehicleMetrics> vehicles;
  /// CAE summed over vehicles, MAE maxed over vehicles, MSE averaged over vehicles.
  VehicleMetrics aggregate;
  std::size_t steps = 0;
};

enum class RunOutcome { Completed, Collision };

struct RunResult {
  ScenarioConfig config;
  std::vector<StepRecord> records;
  Metrics metrics;
  RunOutcome outcome = RunOutcome::Completed;
  std::size_t collision_step = 0;     // index of the state with a non-positive gap
  std::size_t collision_vehicle = 0;  // follower (1-based) whose gap closed
  std::size_t fallback_steps = 0;
  PlatoonState final_state;
};

ReferenceTrajectory build_reference(const ScenarioConfig& config);

/// Closed loop: MPC -> compensation -> disturbance -> plant -> residual
/// measurement -> periodic online training.
RunResult run_scenario(const ScenarioConfig& config);
RunResult run_scenario(const ScenarioConfig& config, const ReferenceTrajectory& reference);

/// Runs independent scenarios on up to `threads` worker threads; results keep
/// the input order.
std::vector<RunResult> run_parallel(const std::vector<ScenarioConfig>& configs, const ReferenceTrajectory* shared,
                                    unsigned threads = 0);

/// Per-vehicle position and speed error series (rows: vehicles, cols: steps).
struct ErrorSeries {
  Mat position;
  Mat speed;
};

ErrorSeries error_series(const std::vector<StepRecord>& records);
Metrics compute_metrics(const ErrorSeries& errors);
Metrics compute_metrics(const std::vector<StepRecord>& records);

enum class MetricId { CaeP, CaeV, MaeP, MaeV };
inline constexpr std::array<MetricId, 4> kTableMetrics = {MetricId::CaeP, MetricId::CaeV, MetricId::MaeP, MetricId::MaeV};
std::string to_string(MetricId m);
double metric_value(const VehicleMetrics& m, MetricId id);

/// 100 (baseline - perl) / baseline; empty when baseline is not positive.
std::optional<double> gap_percent(double baseline, double perl);

/// Table of aggregate metrics and PERL gaps for each baseline variant.
struct GapTable {
  std::map<ControllerVariant, VehicleMetrics> metrics;
  /// gaps[baseline][metric]; PERL's own column is 0.
  std::map<ControllerVariant, std::map<MetricId, std::optional<double>>> gaps;

  /// Eight rows (value/gap pairs for CAE_p, CAE_v, MAE_p, MAE_v) by columns Physics, NN, PERL.
  std::string to_csv() const;
  std::string to_text() const;
};

GapTable compare_runs(const std::map<ControllerVariant, RunResult>& results);

/// Steps CSV (one row per step and vehicle) and metrics JSON.
void write_steps_csv(std::ostream& out, const RunResult& result);
std::string metrics_json(const RunResult& result);

}  // namespace platoon
