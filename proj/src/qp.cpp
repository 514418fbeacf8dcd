#include "platoon/qp.hpp"

#include "platoon/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace platoon::qp {

QpProblem::QpProblem(Mat H, Vec f, Mat G, Vec h)
    : H_(std::move(H)), f_(std::move(f)), G_(std::move(G)), h_(std::move(h)) {
  if (H_.rows() != H_.cols() || H_.rows() != f_.size()) {
    throw DimensionError("QpProblem: H must be square and match f");
  }
  if (G_.rows() != h_.size() || (G_.rows() > 0 && G_.cols() != f_.size())) {
    throw DimensionError("QpProblem: G must be m x n with m = len(h)");
  }
  if (G_.rows() == 0) G_.resize(0, f_.size());
  H_ = (0.5 * (H_ + H_.transpose())).eval();
}

QpProblem::QpProblem(Mat H, Vec f)
    : QpProblem(std::move(H), f, Mat(0, f.size()), Vec(0)) {}

double QpProblem::objective(const Vec& x) const { return x.dot(H_ * x) + 2.0 * f_.dot(x); }

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::MaxIterations: return "max-iterations";
  }
  return "unknown";
}

KktResiduals check_kkt(const QpProblem& problem, const Vec& x, const Vec& mu) {
  if (x.size() != problem.variables() || mu.size() != problem.constraints()) {
    throw DimensionError("check_kkt: x or mu has the wrong length");
  }
  KktResiduals r;
  Vec grad = 2.0 * (problem.H() * x + problem.f());
  if (problem.constraints() > 0) grad += problem.G().transpose() * mu;
  r.stationarity = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
  if (problem.constraints() > 0) {
    const Vec slack = problem.G() * x - problem.h();
    r.primal_violation = std::max(0.0, slack.maxCoeff());
    r.complementarity = std::max((mu.array() * slack.array()).abs().maxCoeff(),
                                 std::max(0.0, -mu.minCoeff()));
  }
  return r;
}

namespace {

double worst(const KktResiduals& r) {
  return std::max({r.stationarity, r.primal_violation, r.complementarity});
}

// State of the dual active-set iteration in the 1/2-scaled form
//   min 1/2 x'Hx + f'x,  Hx + f + sum_j u_j g_j = 0.
// The reported multipliers are mu = 2u.
class DualActiveSet {
 public:
  DualActiveSet(const QpProblem& p, const SolverSettings& s) : p_(p), s_(s), llt_(p.H()) {
    if (llt_.info() != Eigen::Success || !p.H().allFinite()) {
      throw NotPositiveDefinite("QP Hessian is not positive definite");
    }
    const auto& L = llt_.matrixL();
    Gt_ = p.G().transpose();
    Gt_ = L.solve(Gt_);
    ft_ = L.solve(p.f());
    x_ = -llt_.solve(p.f());
  }

  QpSolution run(const std::optional<Vec>& warm) {
    const Eigen::Index m = p_.constraints();
    std::vector<bool> hinted(static_cast<std::size_t>(m), false);
    if (warm && warm->size() == p_.variables() && m > 0) {
      const Vec slack = p_.G() * *warm - p_.h();
      for (Eigen::Index j = 0; j < m; ++j) {
        hinted[j] = std::abs(slack(j)) <= 1e-6 * (1.0 + std::abs(p_.h()(j)));
      }
    }
    in_active_.assign(static_cast<std::size_t>(m), false);

    QpSolution out;
    const double add_tol = 0.1 * s_.tol;
    int iter = 0;
    while (true) {
      // Pick the violated row to add: hinted rows first, then the worst overall.
      Eigen::Index pick = -1;
      double pick_viol = add_tol;
      bool pick_hinted = false;
      if (m > 0) {
        const Vec slack = p_.G() * x_ - p_.h();
        for (Eigen::Index j = 0; j < m; ++j) {
          if (in_active_[j] || slack(j) <= add_tol) continue;
          const bool h = hinted[j];
          if ((h && !pick_hinted) || (h == pick_hinted && slack(j) > pick_viol)) {
            pick = j;
            pick_viol = slack(j);
            pick_hinted = h;
          }
        }
      }
      if (pick < 0) {
        out.status = Status::Optimal;
        break;
      }
      if (iter >= s_.max_iter) {
        out.status = Status::MaxIterations;
        break;
      }

      double u_new = 0.0;
      bool added = false;
      while (!added) {
        if (++iter > s_.max_iter) break;
        Vec z, r;
        const bool independent = direction(pick, z, r);
        // Largest dual step keeping active multipliers non-negative.
        double t_partial = std::numeric_limits<double>::infinity();
        Eigen::Index block = -1;
        for (Eigen::Index k = 0; k < r.size(); ++k) {
          if (r(k) < 0.0) {
            const double t = -u_(k) / r(k);
            if (t < t_partial) {
              t_partial = t;
              block = k;
            }
          }
        }
        if (!independent) {
          if (block < 0) {
            out.status = Status::Infeasible;
            finish(out, iter);
            return out;
          }
          u_ += t_partial * r;
          u_new += t_partial;
          drop(block);
          continue;
        }
        const double viol = p_.G().row(pick).dot(x_) - p_.h()(pick);
        const double t_full = viol / (-p_.G().row(pick).dot(z));
        const double t = std::min(t_full, t_partial);
        x_ += t * z;
        if (r.size()) u_ += t * r;
        u_new += t;
        if (t_full <= t_partial) {
          active_.push_back(pick);
          in_active_[pick] = true;
          u_.conservativeResize(u_.size() + 1);
          u_(u_.size() - 1) = u_new;
          added = true;
        } else {
          drop(block);
        }
      }
      if (!added) {
        out.status = Status::MaxIterations;
        break;
      }
    }
    finish(out, iter);
    return out;
  }

 private:
  Mat active_columns() const {
    Mat N(Gt_.rows(), static_cast<Eigen::Index>(active_.size()));
    for (std::size_t k = 0; k < active_.size(); ++k) N.col(static_cast<Eigen::Index>(k)) = Gt_.col(active_[k]);
    return N;
  }

  // Primal step z and dual step r for raising the multiplier of row `pick`:
  //   H z + N r + g = 0,  N'z = 0.
  // Returns false when g is linearly dependent on the active rows (z = 0).
  bool direction(Eigen::Index pick, Vec& z, Vec& r) const {
    const Vec g = Gt_.col(pick);
    Vec rho = g;
    if (!active_.empty()) {
      const Mat N = active_columns();
      Eigen::HouseholderQR<Mat> qr(N);
      r = -qr.solve(g);
      rho = g + N * r;
    } else {
      r.resize(0);
    }
    z = -llt_.matrixU().solve(rho);
    return rho.norm() > 1e-11 * std::max(1.0, g.norm());
  }

  void drop(Eigen::Index k) {
    in_active_[active_[k]] = false;
    active_.erase(active_.begin() + k);
    const Eigen::Index n = u_.size();
    for (Eigen::Index i = k; i + 1 < n; ++i) u_(i) = u_(i + 1);
    u_.conservativeResize(n - 1);
  }

  // Re-solve the equality system on the final active set to remove the drift
  // accumulated by the incremental updates; keep whichever point is cleaner.
  void finish(QpSolution& out, int iter) {
    const Eigen::Index m = p_.constraints();
    auto full_mu = [&](const Vec& u) {
      Vec mu = Vec::Zero(m);
      for (std::size_t k = 0; k < active_.size(); ++k) mu(active_[k]) = 2.0 * u(static_cast<Eigen::Index>(k));
      return mu;
    };
    Vec x = x_;
    Vec mu = full_mu(u_);
    KktResiduals kkt = check_kkt(p_, x, mu);
    if (!active_.empty() && out.status == Status::Optimal) {
      const Mat N = active_columns();
      Vec hA(static_cast<Eigen::Index>(active_.size()));
      for (std::size_t k = 0; k < active_.size(); ++k) hA(static_cast<Eigen::Index>(k)) = p_.h()(active_[k]);
      const Mat NtN = N.transpose() * N;
      const Vec u = -NtN.ldlt().solve(hA + N.transpose() * ft_);
      const Vec xp = -llt_.matrixU().solve(ft_ + N * u);
      const Vec mup = full_mu(u);
      const KktResiduals kp = check_kkt(p_, xp, mup);
      if (worst(kp) < worst(kkt)) {
        x = xp;
        mu = mup;
        kkt = kp;
      }
    }
    out.x = x;
    out.mu = mu;
    out.kkt = kkt;
    out.iterations = iter;
    out.objective = p_.objective(x);
    out.most_violated = -1;
    if (out.status != Status::Optimal && m > 0) {
      const Vec slack = p_.G() * x - p_.h();
      slack.maxCoeff(&out.most_violated);
    }
  }

  const QpProblem& p_;
  SolverSettings s_;
  Eigen::LLT<Mat> llt_;
  Mat Gt_;  // L^{-1} G'
  Vec ft_;  // L^{-1} f
  Vec x_;
  Vec u_;
  std::vector<Eigen::Index> active_;
  std::vector<bool> in_active_;
};

}  // namespace

QpSolution solve(const QpProblem& problem, const SolverSettings& settings, const std::optional<Vec>& warm_start) {
  if (!(settings.tol > 0.0)) throw ParameterError("QP tolerance must be positive");
  DualActiveSet solver(problem, settings);
  QpSolution sol = solver.run(warm_start);
  if (sol.status == Status::Optimal && worst(sol.kkt) > settings.tol) {
    // Iteration stopped on the add threshold but residuals are not at tolerance.
    sol.status = Status::MaxIterations;
  }
  return sol;
}

}  // namespace platoon::qp
