#pragma once

// HOCBF constraint construction for LTI plants with affine safety functions.
//
// A safety function h(x) = a'x - b of relative degree r, with linear class-K
// gains alpha_1..alpha_r, yields the input-affine constraint
//
//   ell' u + beta(x) >= 0,   ell' = a' A^{r-1} B,
//   beta(x) = a' phi(A) x - phi(0) b,   phi(s) = prod_j (s + alpha_j),
//
// and the chain psi_0 = h, psi_{k+1} = d/dt psi_k + alpha_{k+1} psi_k whose
// joint nonnegativity is the invariant set.

#include "hocbf/types.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace hocbf {

/// x' = A x + B u.
class LtiSystem {
 public:
  LtiSystem(Mat A, Mat B);

  [[nodiscard]] const Mat& A() const { return A_; }
  [[nodiscard]] const Mat& B() const { return B_; }
  [[nodiscard]] Index n() const { return A_.rows(); }
  [[nodiscard]] Index m() const { return B_.cols(); }

  [[nodiscard]] Vec derivative(const Vec& x, const Vec& u) const { return A_ * x + B_ * u; }

 private:
  Mat A_;
  Mat B_;
};

/// x -> c'x + c0.
struct AffineForm {
  Vec c;
  double c0 = 0.0;

  AffineForm() = default;
  AffineForm(Vec coeffs, double offset);

  [[nodiscard]] double operator()(const Eigen::Ref<const Vec>& x) const { return c.dot(x) + c0; }
  [[nodiscard]] Index dim() const { return c.size(); }

  [[nodiscard]] AffineForm scaled(double s) const { return {c * s, c0 * s}; }
  [[nodiscard]] static AffineForm constant(Index n, double value) { return {Vec::Zero(n), value}; }
};

/// h(x) = a'x - b with per-level gains. `alphas` may be left empty and filled
/// once the relative degree is known (see with_uniform_gains).
struct AffineSafety {
  Vec a;
  double b = 0.0;
  std::vector<double> alphas;

  [[nodiscard]] AffineForm h() const { return {a, -b}; }
};

struct BarrierRow {
  Vec ell;
  AffineForm beta;
  int rel_degree = 1;
  std::size_t source_index = 0;

  /// ell'u + beta(x); nonnegative iff the constraint holds.
  [[nodiscard]] double margin(const Vec& x, const Vec& u) const { return ell.dot(u) + beta(x); }
};

/// Rows stacked as M u <= d(x) with M_i = -ell_i' and d_i(x) = beta_i(x).
class StackedSystem {
 public:
  explicit StackedSystem(std::vector<BarrierRow> rows);
  /// Zero-row system over the given dimensions.
  static StackedSystem empty(Index n, Index m);

  [[nodiscard]] const std::vector<BarrierRow>& rows() const { return rows_; }
  [[nodiscard]] std::size_t p() const { return rows_.size(); }
  [[nodiscard]] Index m() const { return m_; }
  [[nodiscard]] Index n() const { return n_; }

  [[nodiscard]] Mat M() const;
  /// Rows ell_i' (p x m).
  [[nodiscard]] Mat L() const;
  [[nodiscard]] Vec d(const Vec& x) const;
  /// d(x) = D x + d0.
  [[nodiscard]] Mat D() const;
  [[nodiscard]] Vec d0() const;

  [[nodiscard]] StackedSystem subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<BarrierRow> rows_;
  Index m_ = 0;
  Index n_ = 0;
};

struct PsiChain {
  std::vector<AffineForm> levels;

  [[nodiscard]] double min_level(const Vec& x) const;
};

/// Relative-degree zero test scale: tol_rd(k) = 1e-9 (1 + |a| |A|^k |B|).
double relative_degree_tolerance(const LtiSystem& sys, const Vec& a, int k);

/// Smallest r >= 1 with a'A^{r-1}B nonzero, searched up to r = n.
int relative_degree(const LtiSystem& sys, const Vec& a);

/// Product over j of (A + alpha_j I), accumulated factor by factor.
Mat characteristic_matrix(const Mat& A, std::span<const double> alphas);

BarrierRow build_barrier_row(const LtiSystem& sys, const AffineSafety& s, std::size_t source_index = 0);

PsiChain psi_chain(const LtiSystem& sys, const AffineSafety& s);

StackedSystem stack(std::vector<BarrierRow> rows);

/// Returns `s` with alphas filled from `gains_by_degree[r-1]` when s.alphas is empty.
AffineSafety with_uniform_gains(const LtiSystem& sys, AffineSafety s,
                                std::span<const std::vector<double>> gains_by_degree);

/// True iff every psi level of every chain is >= -tol at x (membership in the invariant set).
bool in_invariant_set(std::span<const PsiChain> chains, const Vec& x, double tol = 0.0);

}  // namespace hocbf
