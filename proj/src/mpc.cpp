#include "platoon/mpc.hpp"

#include "platoon/errors.hpp"

#include <string>

namespace platoon {

void MpcConfig::validate() const {
  if (horizon < 1) throw ParameterError("MPC horizon must be at least 1");
  if (weights.q1 < 0 || weights.q2 < 0 || weights.q3 < 0) throw ParameterError("MPC state weights must be non-negative");
  if (!(weights.q4 > 0)) throw ParameterError("MPC command-increment weight q4 must be positive");
  if (!(limits.d_min < limits.d_max)) throw ParameterError("d_min must be below d_max");
  if (!(limits.v_min < limits.v_max)) throw ParameterError("v_min must be below v_max");
  if (!(limits.a_min < limits.a_max)) throw ParameterError("a_min must be below a_max");
}

Vec PredictionMatrices::free_response(const PlatoonState& x, const Vec& u_prev) const {
  return Phi * x.stacked() + Lambda * u_prev + offset;
}

Vec PredictionMatrices::predict(const PlatoonState& x, const Vec& u_prev, const Vec& delta_u) const {
  if (delta_u.size() != Gamma.cols()) throw DimensionError("predict: command increment length mismatch");
  return free_response(x, u_prev) + Gamma * delta_u;
}

ReferenceWindow ReferenceWindow::from_states(const std::vector<PlatoonState>& states) {
  ReferenceWindow w;
  if (states.empty()) return w;
  const Eigen::Index block = 3 * static_cast<Eigen::Index>(states.front().size());
  w.stacked.resize(block * static_cast<Eigen::Index>(states.size()));
  for (std::size_t n = 0; n < states.size(); ++n) {
    if (3 * static_cast<Eigen::Index>(states[n].size()) != block) throw DimensionError("reference window sizes differ");
    w.stacked.segment(static_cast<Eigen::Index>(n) * block, block) = states[n].stacked();
  }
  return w;
}

PredictionMatrices build_prediction(const PlatoonModel& model, int horizon) {
  if (horizon < 1) throw ParameterError("prediction horizon must be at least 1");
  const Eigen::Index nx = model.A.rows();
  const Eigen::Index nu = model.B.cols();
  const Eigen::Index N = horizon;

  PredictionMatrices pred;
  pred.count = model.count;
  pred.horizon = horizon;
  pred.Phi.resize(nx * N, nx);
  pred.Lambda.resize(nx * N, nu);
  pred.Gamma = Mat::Zero(nx * N, nu * N);
  pred.offset.resize(nx * N);

  // sums[n] = A^0 + ... + A^n; column block m of Gamma row block n uses sums[n - m].
  std::vector<Mat> sums;
  Mat power = Mat::Identity(nx, nx);
  Mat sum = Mat::Zero(nx, nx);
  for (Eigen::Index n = 0; n < N; ++n) {
    sum += power;
    power = model.A * power;
    sums.push_back(sum);
    pred.Phi.middleRows(n * nx, nx) = power;
    pred.Lambda.middleRows(n * nx, nx) = sum * model.B;
    pred.offset.segment(n * nx, nx) = sum * model.C;
  }
  for (Eigen::Index n = 0; n < N; ++n) {
    for (Eigen::Index m = 0; m <= n; ++m) {
      pred.Gamma.block(n * nx, m * nu, nx, nu) = sums[static_cast<std::size_t>(n - m)] * model.B;
    }
  }
  return pred;
}

Mat output_weights(const MpcWeights& weights, std::size_t count, int horizon) {
  const auto I = static_cast<Eigen::Index>(count);
  const Eigen::Index block = 3 * I;
  Vec q(block);
  q << Vec::Constant(I, weights.q1), Vec::Constant(I, weights.q2), Vec::Constant(I, weights.q3);
  Vec diag = Vec::Zero(block * horizon);
  for (Eigen::Index n = 0; n + 1 < horizon; ++n) diag.segment(n * block, block) = q;
  return diag.asDiagonal();
}

namespace {

void check_window(const PredictionMatrices& pred, const PlatoonState& x, const Vec& u_prev, const ReferenceWindow& ref) {
  if (x.size() != pred.count || static_cast<std::size_t>(u_prev.size()) != pred.count) {
    throw DimensionError("MPC: state or previous command size does not match the platoon");
  }
  if (ref.stacked.size() != pred.Phi.rows()) {
    throw DimensionError("MPC: reference window must have length 3*I*N = " + std::to_string(pred.Phi.rows()));
  }
}

Mat hessian(const PredictionMatrices& pred, const MpcWeights& weights, const Mat& omega) {
  const Eigen::Index n = pred.Gamma.cols();
  if (!(weights.q4 > 0)) throw ParameterError("MPC: q4 must be positive for a strictly convex QP");
  Mat H = weights.q4 * Mat::Identity(n, n) + pred.Gamma.transpose() * omega * pred.Gamma;
  return (0.5 * (H + H.transpose())).eval();
}

}  // namespace

QuadraticCost build_cost(const PredictionMatrices& pred, const MpcWeights& weights, const PlatoonState& x,
                         const Vec& u_prev, const ReferenceWindow& ref) {
  check_window(pred, x, u_prev, ref);
  const Mat omega = output_weights(weights, pred.count, pred.horizon);
  QuadraticCost cost;
  cost.H = hessian(pred, weights, omega);
  cost.f = pred.Gamma.transpose() * (omega * (pred.free_response(x, u_prev) - ref.stacked));
  return cost;
}

LinearConstraints stacked_state_constraints(const MpcLimits& l, std::size_t count, int horizon) {
  const auto I = static_cast<Eigen::Index>(count);
  const Eigen::Index gaps = I - 1;
  const Eigen::Index rows = 2 * gaps + 4 * I;
  const Eigen::Index cols = 3 * I;

  Mat step = Mat::Zero(rows, cols);
  Vec g(rows);
  // Toeplitz block: -1 on the diagonal, +1 on the first upper diagonal.
  for (Eigen::Index i = 0; i < gaps; ++i) {
    step(i, i) = -1.0;
    step(i, i + 1) = 1.0;
    step(gaps + i, i) = 1.0;
    step(gaps + i, i + 1) = -1.0;
    g(i) = l.d_min;
    g(gaps + i) = -l.d_max;
  }
  const Eigen::Index r0 = 2 * gaps;
  for (Eigen::Index i = 0; i < I; ++i) {
    step(r0 + i, I + i) = -1.0;
    step(r0 + I + i, I + i) = 1.0;
    step(r0 + 2 * I + i, 2 * I + i) = -1.0;
    step(r0 + 3 * I + i, 2 * I + i) = 1.0;
    g(r0 + i) = l.v_min;
    g(r0 + I + i) = -l.v_max;
    g(r0 + 2 * I + i) = l.a_min;
    g(r0 + 3 * I + i) = -l.a_max;
  }

  LinearConstraints out;
  out.G = Mat::Zero(rows * horizon, cols * horizon);
  out.h.resize(rows * horizon);
  for (Eigen::Index n = 0; n < horizon; ++n) {
    out.G.block(n * rows, n * cols, rows, cols) = step;
    out.h.segment(n * rows, rows) = g;
  }
  return out;
}

LinearConstraints build_constraints(const PredictionMatrices& pred, const MpcLimits& limits, const PlatoonState& x,
                                    const Vec& u_prev) {
  const auto rows = stacked_state_constraints(limits, pred.count, pred.horizon);
  LinearConstraints out;
  out.G = rows.G * pred.Gamma;
  out.h = -rows.G * pred.free_response(x, u_prev) - rows.h;
  return out;
}

namespace {

ControlPlan finish_plan(const qp::QpSolution& sol, const Vec& u_prev) {
  ControlPlan plan;
  plan.delta_u = sol.x;
  plan.u_next = u_prev + sol.x.head(u_prev.size());
  plan.status = sol.status;
  plan.kkt = sol.kkt;
  plan.iterations = sol.iterations;
  plan.objective = sol.objective;
  plan.most_violated = sol.most_violated;
  return plan;
}

}  // namespace

ControlPlan solve_mpc(const MpcConfig& config, const PlatoonModel& model, const PlatoonState& x, const Vec& u_prev,
                      const ReferenceWindow& ref, const std::optional<Vec>& warm_start) {
  config.validate();
  const auto pred = build_prediction(model, config.horizon);
  auto cost = build_cost(pred, config.weights, x, u_prev, ref);
  auto cons = build_constraints(pred, config.limits, x, u_prev);
  const qp::QpProblem problem(std::move(cost.H), std::move(cost.f), std::move(cons.G), std::move(cons.h));
  return finish_plan(qp::solve(problem, config.solver, warm_start), u_prev);
}

MpcController::MpcController(MpcConfig config, PlatoonModel model)
    : config_(std::move(config)), model_(std::move(model)) {
  config_.validate();
  pred_ = build_prediction(model_, config_.horizon);
  const Mat omega = output_weights(config_.weights, pred_.count, pred_.horizon);
  H_ = hessian(pred_, config_.weights, omega);
  cost_map_ = pred_.Gamma.transpose() * omega;
  state_rows_ = stacked_state_constraints(config_.limits, pred_.count, pred_.horizon);
  G_ = state_rows_.G * pred_.Gamma;
}

ControlPlan MpcController::step(const PlatoonState& x, const Vec& u_prev, const ReferenceWindow& ref) {
  check_window(pred_, x, u_prev, ref);
  const Vec free = pred_.free_response(x, u_prev);
  Vec f = cost_map_ * (free - ref.stacked);
  Vec h = -state_rows_.G * free - state_rows_.h;
  const qp::QpProblem problem(H_, std::move(f), G_, std::move(h));
  const auto sol = qp::solve(problem, config_.solver, warm_);
  ControlPlan plan = finish_plan(sol, u_prev);
  if (plan.ok()) {
    const Eigen::Index I = u_prev.size();
    Vec shifted = Vec::Zero(sol.x.size());
    shifted.head(sol.x.size() - I) = sol.x.tail(sol.x.size() - I);
    warm_ = std::move(shifted);
  } else {
    warm_.reset();
  }
  return plan;
}

}  // namespace platoon
