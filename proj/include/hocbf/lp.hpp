#pragma once

#include "hocbf/types.hpp"

#include <vector>

namespace hocbf {

/// normal' z <= offset.
struct Halfspace {
  Vec normal;
  double offset = 0.0;

  [[nodiscard]] double slack(const Eigen::Ref<const Vec>& z) const { return offset - normal.dot(z); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };
enum class Sense { Minimize, Maximize };

struct LpOptions {
  double tol = 1e-9;
  int max_iterations = 0;  // 0 selects 50 * (rows + cols) + 1000
};

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Vec x;          // optimizer (Optimal) or a feasible point (Unbounded)
  double value = 0.0;
  /// Optimal: multipliers mu >= 0 with c = -A'mu (minimize) so that -mu'b bounds the optimum.
  Vec dual;
  /// Infeasible: lambda >= 0 with lambda'A = 0 and lambda'b < 0.
  Vec farkas;
  int iterations = 0;
};

/// Dense two-phase simplex with Bland's rule over free variables: opt c'x s.t. A x <= b.
/// Throws Error(IterationCap) if the pivot budget is exhausted.
LpResult lp_solve(const Vec& c, const Mat& A, const Vec& b, Sense sense, const LpOptions& opts = {});

LpResult lp_solve(const Vec& c, const std::vector<Halfspace>& constraints, Sense sense, const LpOptions& opts = {});

/// Phase one only: a feasible point or a Farkas certificate for A x <= b.
LpResult lp_feasibility(const Mat& A, const Vec& b, const LpOptions& opts = {});

/// Stacks halfspaces into (A, b); `dim` is used when the list is empty.
void to_matrix_form(const std::vector<Halfspace>& hs, Index dim, Mat& A, Vec& b);

}  // namespace hocbf
