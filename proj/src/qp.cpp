#include "hocbf/qp.hpp"

#include "hocbf/error.hpp"
#include "hocbf/lp.hpp"

#include <algorithm>
#include <cmath>

namespace hocbf {

double KktResiduals::max() const { return std::max({stationarity, primal, complementarity, dual}); }

KktResiduals kkt_residuals(const QpProblem& p, const Vec& u, const Vec& mu) {
  KktResiduals r;
  Vec grad = p.G * (u - p.u_d);
  if (p.A.rows() > 0) grad += p.A.transpose() * mu;
  r.stationarity = grad.cwiseAbs().maxCoeff();
  if (p.A.rows() > 0) {
    const Vec slack = p.b - p.A * u;
    r.primal = std::max(0.0, -slack.minCoeff());
    r.complementarity = (mu.array() * slack.array()).abs().maxCoeff();
    r.dual = std::max(0.0, -mu.minCoeff());
  }
  return r;
}

namespace {

class ActiveSetSolver {
 public:
  ActiveSetSolver(const QpProblem& p, const QpOptions& opts) : p_(p), opts_(opts), llt_(p.G) {
    const Index m = p.G.rows();
    require(p.G.cols() == m && p.u_d.size() == m && p.A.cols() == m && p.A.rows() == p.b.size(),
            ErrorCode::DimensionMismatch, "QP data dimensions disagree");
    require(p.G.allFinite() && p.u_d.allFinite() && p.A.allFinite() && p.b.allFinite(), ErrorCode::InvalidArgument,
            "QP data must be finite");
    require((p.G - p.G.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + p.G.cwiseAbs().maxCoeff()),
            ErrorCode::InvalidArgument, "G must be symmetric");
    require(llt_.info() == Eigen::Success, ErrorCode::InvalidArgument, "G must be positive definite");
    Ginv_At_ = llt_.solve(p.A.transpose());
    row_scale_ = p.A.rowwise().norm().cwiseMax(1e-300);
  }

  QpResult solve() {
    QpResult res;
    const Index q = p_.A.rows();
    res.multipliers = Vec::Zero(q);
    if (q == 0 || feasible(p_.u_d)) {
      res.u = p_.u_d;
      return res;
    }

    Vec u;
    std::vector<int> W;
    if (!try_warm_start(u, W)) {
      const LpResult lp = lp_feasibility(p_.A, p_.b);
      if (lp.status == LpStatus::Infeasible) fail(ErrorCode::Infeasible, "QP constraints are infeasible");
      u = lp.x;
      W = independent_tight_set(u);
    } else {
      res.warm_started = true;
    }

    for (int it = 0; it < opts_.max_iterations; ++it) {
      res.iterations = it + 1;
      Vec lambda;
      const Vec step = eqp_step(u, W, lambda);
      if (step.norm() <= opts_.tol * (1.0 + u.norm())) {
        // Stationary on the working set: finish or release the most negative multiplier.
        Index drop = -1;
        double most_neg = -opts_.tol * (1.0 + (lambda.size() > 0 ? lambda.cwiseAbs().maxCoeff() : 0.0));
        for (Index k = 0; k < lambda.size(); ++k) {
          if (lambda(k) < most_neg) {
            most_neg = lambda(k);
            drop = k;
          }
        }
        if (drop < 0) {
          res.u = u;
          for (std::size_t k = 0; k < W.size(); ++k) res.multipliers(W[k]) = std::max(0.0, lambda(static_cast<Index>(k)));
          res.active = W;
          return res;
        }
        W.erase(W.begin() + drop);
        continue;
      }

      double alpha = 1.0;
      int blocking = -1;
      for (Index i = 0; i < q; ++i) {
        if (std::find(W.begin(), W.end(), static_cast<int>(i)) != W.end()) continue;
        const double ap = p_.A.row(i).dot(step);
        if (ap <= opts_.tol * row_scale_(i) * (1.0 + step.norm())) continue;
        const double room = std::max(0.0, p_.b(i) - p_.A.row(i).dot(u));
        const double a = room / ap;
        if (a < alpha) {
          alpha = a;
          blocking = static_cast<int>(i);
        }
      }
      u += alpha * step;
      if (blocking >= 0) W.push_back(blocking);
    }
    fail(ErrorCode::IterationCap, "active-set QP did not converge");
  }

 private:
  [[nodiscard]] bool feasible(const Vec& u) const {
    return ((p_.A * u - p_.b).array() <= 1e-12 * (1.0 + p_.b.cwiseAbs().array())).all();
  }

  // Step p minimizing the objective from u with A_W p = 0, and working-set multipliers.
  Vec eqp_step(const Vec& u, const std::vector<int>& W, Vec& lambda) const {
    const Vec g = p_.G * (u - p_.u_d);
    const Vec Ginv_g = llt_.solve(g);
    const Index k = static_cast<Index>(W.size());
    if (k == 0) {
      lambda.resize(0);
      return -Ginv_g;
    }
    Mat AW(k, p_.A.cols());
    Mat Y(p_.A.cols(), k);
    for (Index j = 0; j < k; ++j) {
      AW.row(j) = p_.A.row(W[static_cast<std::size_t>(j)]);
      Y.col(j) = Ginv_At_.col(W[static_cast<std::size_t>(j)]);
    }
    const Mat S = AW * Y;
    lambda = -S.ldlt().solve(AW * Ginv_g);
    return -(Ginv_g + Y * lambda);
  }

  std::vector<int> independent_tight_set(const Vec& u) const {
    std::vector<int> W;
    Mat rows(0, p_.A.cols());
    for (Index i = 0; i < p_.A.rows(); ++i) {
      const double slack = p_.b(i) - p_.A.row(i).dot(u);
      if (std::abs(slack) > 1e-9 * (1.0 + std::abs(p_.b(i)))) continue;
      Mat trial(rows.rows() + 1, rows.cols());
      trial << rows, p_.A.row(i);
      if (numerical_rank(trial, 1e-9) == trial.rows()) {
        rows = trial;
        W.push_back(static_cast<int>(i));
        if (rows.rows() == p_.A.cols()) break;
      }
    }
    return W;
  }

  // Minimizer on { A_W u = b_W } for the previous working set, accepted only if feasible.
  bool try_warm_start(Vec& u, std::vector<int>& W) const {
    std::vector<int> cand;
    for (int i : opts_.warm_active) {
      if (i >= 0 && i < p_.A.rows()) cand.push_back(i);
    }
    if (cand.empty()) return false;
    const Index k = static_cast<Index>(cand.size());
    Mat AW(k, p_.A.cols());
    Vec bW(k);
    Mat Y(p_.A.cols(), k);
    for (Index j = 0; j < k; ++j) {
      AW.row(j) = p_.A.row(cand[static_cast<std::size_t>(j)]);
      bW(j) = p_.b(cand[static_cast<std::size_t>(j)]);
      Y.col(j) = Ginv_At_.col(cand[static_cast<std::size_t>(j)]);
    }
    const Mat S = AW * Y;
    Eigen::LDLT<Mat> ldlt(S);
    if (ldlt.info() != Eigen::Success || numerical_rank(AW, 1e-9) < k) return false;
    // u = u_d + G^{-1} A_W' nu with A_W u = b_W
    const Vec nu = ldlt.solve(bW - AW * p_.u_d);
    const Vec cand_u = p_.u_d + Y * nu;
    if (!feasible(cand_u)) return false;
    u = cand_u;
    W = cand;
    return true;
  }

  const QpProblem& p_;
  const QpOptions& opts_;
  Eigen::LLT<Mat> llt_;
  Mat Ginv_At_;
  Vec row_scale_;
};

}  // namespace

QpResult solve_qp(const QpProblem& p, const QpOptions& opts) { return ActiveSetSolver(p, opts).solve(); }

}  // namespace hocbf
