#include "platoon/oracles.hpp"

#include "platoon/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <bit>
#include <limits>
#include <vector>

namespace platoon::oracle {

std::optional<BruteForceResult> brute_force_qp(const qp::QpProblem& problem, double feas_tol) {
  const Eigen::Index n = problem.variables();
  const Eigen::Index m = problem.constraints();
  if (m > 20) throw ParameterError("brute_force_qp: too many constraints to enumerate");

  // With objective x'Hx + 2f'x and active rows Ga x = ha:
  //   x = xu - 1/2 Hinv Ga' mu,  xu = -Hinv f,  mu = 2 (Ga Hinv Ga')^-1 (Ga xu - ha).
  Eigen::LLT<Mat> llt(problem.H());
  if (llt.info() != Eigen::Success) throw qp::NotPositiveDefinite("brute_force_qp: H not positive definite");
  const Vec xu = -llt.solve(problem.f());
  const Mat HinvGt = llt.solve(problem.G().transpose());
  const Mat K = problem.G() * HinvGt;
  const Vec Gxu = problem.G() * xu;

  std::optional<BruteForceResult> best;
  std::size_t tried = 0;
  const std::uint32_t subsets = 1u << m;
  std::vector<Eigen::Index> rows;
  for (std::uint32_t mask = 0; mask < subsets; ++mask) {
    const int k = std::popcount(mask);
    if (k > n) continue;
    ++tried;
    rows.clear();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (mask & (1u << i)) rows.push_back(i);
    }
    Vec x = xu;
    if (k > 0) {
      Mat Kaa(k, k);
      Vec rhs(k);
      for (int a = 0; a < k; ++a) {
        rhs(a) = Gxu(rows[a]) - problem.h()(rows[a]);
        for (int b = 0; b < k; ++b) Kaa(a, b) = K(rows[a], rows[b]);
      }
      Eigen::FullPivLU<Mat> lu(Kaa);
      if (lu.rank() < k) continue;
      const Vec half_mu = lu.solve(rhs);
      for (int a = 0; a < k; ++a) x -= HinvGt.col(rows[a]) * half_mu(a);
    }
    if (m > 0) {
      const Vec slack = problem.G() * x - problem.h();
      bool feasible = true;
      for (Eigen::Index i = 0; i < m && feasible; ++i) {
        feasible = slack(i) <= feas_tol * (1.0 + std::abs(problem.h()(i)));
      }
      if (!feasible) continue;
    }
    const double obj = problem.objective(x);
    if (!best || obj < best->objective) best = BruteForceResult{x, obj, 0};
  }
  if (best) best->subsets_tried = tried;
  return best;
}

Vec rollout_prediction(const PlatoonModel& model, const PlatoonState& x, const Vec& u_prev, const Vec& delta_u,
                       int horizon) {
  const auto I = static_cast<Eigen::Index>(model.count);
  if (delta_u.size() != I * horizon || u_prev.size() != I) throw DimensionError("rollout_prediction: bad input sizes");
  const Eigen::Index block = 3 * I;
  Vec out(block * horizon);
  Vec state = x.stacked();
  Vec u = u_prev;
  for (int n = 0; n < horizon; ++n) {
    u += delta_u.segment(n * I, I);
    state = model.A * state + model.B * u + model.C;
    out.segment(n * block, block) = state;
  }
  return out;
}

qp::QpProblem random_qp(std::mt19937_64& rng, int n, int m, bool feasible, double delta) {
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto gauss = [&](Eigen::Index r, Eigen::Index c) {
    Mat M(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) M(i, j) = N(rng);
    return M;
  };
  const Mat M = gauss(n, n);
  Mat H = M.transpose() * M + delta * Mat::Identity(n, n);
  Vec f = gauss(n, 1).col(0) * 3.0;
  Mat G = gauss(m, n);
  Vec h(m);
  if (feasible) {
    const Vec x0 = gauss(n, 1).col(0);
    const Vec gx = G * x0;
    for (int i = 0; i < m; ++i) h(i) = gx(i) + U(rng);
  } else {
    for (int i = 0; i < m; ++i) h(i) = N(rng);
  }
  return qp::QpProblem(std::move(H), std::move(f), std::move(G), std::move(h));
}

}  // namespace platoon::oracle
