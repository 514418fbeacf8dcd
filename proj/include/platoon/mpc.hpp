#pragma once

#include "platoon/dynamics.hpp"
#include "platoon/qp.hpp"

#include <optional>
#include <vector>

namespace platoon {

struct MpcWeights {
  double q1 = 1.0;  // position error
  double q2 = 1.0;  // velocity error
  double q3 = 0.1;  // acceleration error
  double q4 = 0.1;  // command increment
};

struct MpcLimits {
  double d_min = 5.0, d_max = 80.0;
  double v_min = 5.0, v_max = 50.0;
  double a_min = -5.0, a_max = 5.0;
};

struct MpcConfig {
  int horizon = 10;
  MpcWeights weights;
  MpcLimits limits;
  qp::SolverSettings solver;

  void validate() const;
};

/// Condensed prediction over N steps:
///   window = Phi X + Lambda U_prev + Gamma dU + offset
/// where window stacks X_{k+1} .. X_{k+N} and dU stacks the N command increments.
struct PredictionMatrices {
  Mat Phi;     // 3IN x 3I
  Mat Lambda;  // 3IN x I
  Mat Gamma;   // 3IN x IN, block lower triangular
  Vec offset;  // 3IN
  std::size_t count = 0;
  int horizon = 0;

  Vec predict(const PlatoonState& x, const Vec& u_prev, const Vec& delta_u) const;
  /// Prediction with dU = 0.
  Vec free_response(const PlatoonState& x, const Vec& u_prev) const;
};

/// Stacked reference states X*_{k+1} .. X*_{k+N}, each in platoon stacked order.
struct ReferenceWindow {
  Vec stacked;

  static ReferenceWindow from_states(const std::vector<PlatoonState>& states);
};

struct QuadraticCost {
  Mat H;  // IN x IN
  Vec f;  // IN
};

struct LinearConstraints {
  Mat G;
  Vec h;
};

struct ControlPlan {
  Vec delta_u;
  Vec u_next;
  qp::Status status = qp::Status::Optimal;
  qp::KktResiduals kkt;
  int iterations = 0;
  double objective = 0.0;
  Eigen::Index most_violated = -1;

  bool ok() const { return status == qp::Status::Optimal; }
};

PredictionMatrices build_prediction(const PlatoonModel& model, int horizon);

/// Output-error weighting blockdiag{Q, ..., Q, 0}.
Mat output_weights(const MpcWeights& weights, std::size_t count, int horizon);

QuadraticCost build_cost(const PredictionMatrices& pred, const MpcWeights& weights, const PlatoonState& x,
                         const Vec& u_prev, const ReferenceWindow& ref);

/// Per-step selector rows (spacing between consecutive vehicles, then speed,
/// then acceleration) and their bounds, stacked over the horizon, in the form
/// Gbar * window + gbar <= 0.
LinearConstraints stacked_state_constraints(const MpcLimits& limits, std::size_t count, int horizon);

/// Constraints in solver form G dU <= h.
LinearConstraints build_constraints(const PredictionMatrices& pred, const MpcLimits& limits, const PlatoonState& x,
                                    const Vec& u_prev);

ControlPlan solve_mpc(const MpcConfig& config, const PlatoonModel& model, const PlatoonState& x, const Vec& u_prev,
                      const ReferenceWindow& ref, const std::optional<Vec>& warm_start = std::nullopt);

/// Receding-horizon controller. Caches the state-independent matrices and
/// carries the shifted previous solution as a warm start.
class MpcController {
 public:
  MpcController(MpcConfig config, PlatoonModel model);

  ControlPlan step(const PlatoonState& x, const Vec& u_prev, const ReferenceWindow& ref);
  void reset() { warm_.reset(); }

  const PredictionMatrices& prediction() const { return pred_; }
  const MpcConfig& config() const { return config_; }
  const PlatoonModel& model() const { return model_; }

 private:
  MpcConfig config_;
  PlatoonModel model_;
  PredictionMatrices pred_;
  Mat H_;
  Mat cost_map_;  // Gamma' Omega
  LinearConstraints state_rows_;
  Mat G_;         // Gbar Gamma
  std::optional<Vec> warm_;
};

}  // namespace platoon
