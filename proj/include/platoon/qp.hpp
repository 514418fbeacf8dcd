#pragma once

#include "platoon/dynamics.hpp"

#include <optional>
#include <string_view>

namespace platoon::qp {

/// minimize x'Hx + 2f'x  subject to  Gx <= h.
///
/// H is symmetrized as (H + H')/2 on construction. G may have zero rows.
class QpProblem {
 public:
  QpProblem(Mat H, Vec f, Mat G, Vec h);
  /// Unconstrained problem.
  QpProblem(Mat H, Vec f);

  const Mat& H() const { return H_; }
  const Vec& f() const { return f_; }
  const Mat& G() const { return G_; }
  const Vec& h() const { return h_; }
  Eigen::Index variables() const { return f_.size(); }
  Eigen::Index constraints() const { return h_.size(); }

  double objective(const Vec& x) const;

 private:
  Mat H_;
  Vec f_;
  Mat G_;
  Vec h_;
};

enum class Status { Optimal, Infeasible, MaxIterations };

std::string_view to_string(Status s);

struct KktResiduals {
  double stationarity = 0.0;     // ||2Hx + 2f + G'mu||_inf
  double primal_violation = 0.0; // max(0, max_i (Gx - h)_i)
  double complementarity = 0.0;  // max_i |mu_i (Gx - h)_i|, plus any negative mu
};

struct QpSolution {
  Vec x;
  Vec mu;  // one multiplier per row of G, zero for inactive rows
  Status status = Status::MaxIterations;
  int iterations = 0;
  KktResiduals kkt;
  double objective = 0.0;
  /// Row with the largest violation when status != Optimal, -1 otherwise.
  Eigen::Index most_violated = -1;
};

struct SolverSettings {
  double tol = 1e-8;
  int max_iter = 5000;
};

/// Thrown when H is not positive definite.
class NotPositiveDefinite : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dual active-set (Goldfarb-Idnani) solve. `warm_start` is a previous
/// solution; rows active there are given priority when choosing which
/// violated constraint to add, which shortens the active-set search without
/// changing the (unique) optimum.
QpSolution solve(const QpProblem& problem, const SolverSettings& settings = {},
                 const std::optional<Vec>& warm_start = std::nullopt);

KktResiduals check_kkt(const QpProblem& problem, const Vec& x, const Vec& mu);

}  // namespace platoon::qp
