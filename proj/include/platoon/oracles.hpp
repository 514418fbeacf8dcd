#pragma once

#include "platoon/dynamics.hpp"
#include "platoon/mpc.hpp"
#include "platoon/qp.hpp"

#include <cstdint>
#include <optional>
#include <random>

namespace platoon::oracle {

struct BruteForceResult {
  Vec x;
  double objective = 0.0;
  std::size_t subsets_tried = 0;
};

/// Exhaustive active-set enumeration: for every subset of at most n rows of
/// G, solve the equality-constrained problem, keep the feasible point with the
/// lowest objective. Exponential in m; meant for m <= 12 or so.
/// Returns nullopt when no subset yields a feasible point.
std::optional<BruteForceResult> brute_force_qp(const qp::QpProblem& problem, double feas_tol = 1e-9);

/// X_{k+1} .. X_{k+N} by stepping the plant one step at a time with
/// u_n = u_prev + dU_0 + ... + dU_n.
Vec rollout_prediction(const PlatoonModel& model, const PlatoonState& x, const Vec& u_prev, const Vec& delta_u,
                       int horizon);

/// Random strictly convex QP with n variables and m rows, H = M'M + delta I.
/// With `feasible` the bounds are built around a random interior point.
qp::QpProblem random_qp(std::mt19937_64& rng, int n, int m, bool feasible, double delta = 0.1);

}  // namespace platoon::oracle
