#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace hocbf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Closed interval over the extended reals. Empty when lo > hi.
struct Interval {
  double lo = -kInf;
  double hi = kInf;

  [[nodiscard]] bool empty() const { return lo > hi; }
  [[nodiscard]] bool contains(double s, double tol = 0.0) const {
    return s >= lo - tol && s <= hi + tol;
  }
  [[nodiscard]] Interval intersect(const Interval& o) const {
    return {std::max(lo, o.lo), std::min(hi, o.hi)};
  }
};

inline bool all_finite(const Eigen::Ref<const Mat>& m) { return m.allFinite(); }

/// Infinity norm of a matrix (max absolute row sum).
inline double norm_inf(const Eigen::Ref<const Mat>& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

/// Numerical rank from singular values; values below rel_tol * sigma_max are zero.
int numerical_rank(const Eigen::Ref<const Mat>& m, double rel_tol = 1e-9);

}  // namespace hocbf
