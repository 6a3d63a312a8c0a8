#pragma once

// Slow independent QP reference: accelerated projected gradient on the dual
//   min_mu>=0  1/2 mu'H mu + mu'(b - A u_d),   H = A G^-1 A',
// with u = u_d - G^-1 A' mu. Used only to cross-check the active-set solver.

#include "hocbf/qp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace reference {

inline Eigen::VectorXd dual_projected_gradient(const hocbf::QpProblem& p, int max_iter = 400000, double tol = 1e-13) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  if (p.A.rows() == 0) return p.u_d;
  const Eigen::LLT<MatrixXd> llt(p.G);
  const MatrixXd GiAt = llt.solve(p.A.transpose());
  const MatrixXd H = p.A * GiAt;
  const VectorXd g0 = p.b - p.A * p.u_d;
  const double L = std::max(Eigen::SelfAdjointEigenSolver<MatrixXd>(H).eigenvalues().maxCoeff(), 1e-12);
  VectorXd mu = VectorXd::Zero(p.A.rows()), y = mu, prev = mu;
  double t = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    const VectorXd grad = H * y + g0;
    const VectorXd next = (y - grad / L).cwiseMax(0.0);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    // restart when momentum points uphill
    if ((next - mu).dot(grad) > 0) {
      y = mu;
      t = 1.0;
      continue;
    }
    y = next + ((t - 1.0) / t_next) * (next - mu);
    prev = mu;
    mu = next;
    t = t_next;
    if ((mu - prev).cwiseAbs().maxCoeff() <= tol * (1.0 + mu.cwiseAbs().maxCoeff())) break;
  }
  return p.u_d - GiAt * mu;
}

}  // namespace reference
