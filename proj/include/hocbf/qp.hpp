#pragma once

// Dense strictly convex QP
//   min 1/2 (u - u_d)' G (u - u_d)   s.t.   A u <= b
// solved by a primal active-set method. Sized for control-rate filter problems
// (a handful of inputs and constraints).

#include "hocbf/types.hpp"

#include <vector>

namespace hocbf {

struct QpProblem {
  Mat G;
  Vec u_d;
  Mat A;
  Vec b;

  [[nodiscard]] double objective(const Vec& u) const {
    const Vec e = u - u_d;
    return 0.5 * e.dot(G * e);
  }
};

struct QpOptions {
  int max_iterations = 500;
  double tol = 1e-11;
  /// Working set from a previous solve; used when its equality-constrained minimizer is feasible.
  std::vector<int> warm_active;
};

struct QpResult {
  Vec u;
  /// One multiplier per row of A, zero off the final working set.
  Vec multipliers;
  std::vector<int> active;
  int iterations = 0;
  bool warm_started = false;
};

struct KktResiduals {
  double stationarity = 0.0;      // |G(u - u_d) + A'mu|_inf
  double primal = 0.0;            // max(0, max(Au - b))
  double complementarity = 0.0;   // max |mu_i (b_i - a_i'u)|
  double dual = 0.0;              // max(0, -min mu)

  [[nodiscard]] double max() const;
};

/// Throws Error(Infeasible) when the constraints admit no point, Error(IterationCap) on budget exhaustion,
/// Error(InvalidArgument) when G is not symmetric positive definite.
QpResult solve_qp(const QpProblem& p, const QpOptions& opts = {});

KktResiduals kkt_residuals(const QpProblem& p, const Vec& u, const Vec& multipliers);

}  // namespace hocbf
