#pragma once

// Feasibility of { u in U : M u <= d(x) } and its dependence on x.

#include "hocbf/construction.hpp"
#include "hocbf/lp.hpp"
#include "hocbf/types.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace hocbf {

inline constexpr double kTolPar = 1e-9;
inline constexpr double kTolRank = 1e-9;
inline constexpr double kTolMem = 1e-8;

/// Admissible input set: all of R^m, an axis-aligned box, or {u : Q u <= b}.
class InputSet {
 public:
  enum class Kind { All, Box, Polyhedron };

  static InputSet all(Index m);
  /// lo/hi may contain infinities; requires lo <= hi.
  static InputSet box(Vec lo, Vec hi);
  /// Throws EmptyInputSet if {Q u <= b} is empty.
  static InputSet polyhedron(Mat Q, Vec b);

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] Index m() const { return m_; }
  [[nodiscard]] const Vec& lo() const { return lo_; }
  [[nodiscard]] const Vec& hi() const { return hi_; }
  [[nodiscard]] const Mat& Q() const { return Q_; }
  [[nodiscard]] const Vec& b() const { return b_; }

  /// Halfspace rows Q u <= b; for a box, one row per finite bound (upper bounds first per coordinate).
  [[nodiscard]] Mat constraint_matrix() const;
  [[nodiscard]] Vec constraint_rhs() const;
  [[nodiscard]] bool contains(const Vec& u, double tol = kTolMem) const;

 private:
  InputSet() = default;
  Kind kind_ = Kind::All;
  Index m_ = 0;
  Vec lo_, hi_;
  Mat Q_;
  Vec b_;
};

std::string_view to_string(InputSet::Kind kind);

/// Max or min over affine pieces, with max of nothing = -inf and min of nothing = +inf.
struct PwaBound {
  enum class Kind { Max, Min };

  std::vector<AffineForm> pieces;
  Kind kind = Kind::Max;

  [[nodiscard]] double operator()(const Eigen::Ref<const Vec>& x) const;
  /// Index of the attaining piece, or -1 for the empty bound.
  [[nodiscard]] int active_piece(const Eigen::Ref<const Vec>& x) const;
  [[nodiscard]] PwaBound scaled(double positive_factor) const;
  /// Adds a constant piece (tightening by a fixed bound).
  [[nodiscard]] PwaBound with_constant(Index n, double value) const;
};

/// Rows whose normals are ell_i = c_i v with |v| = 1 and the first nonzero entry of v positive.
struct ParallelFamily {
  Vec v;
  std::vector<std::size_t> members;
  std::vector<double> c;
  /// nu_i(x) = -beta_i(x) / c_i per member.
  std::vector<AffineForm> nu;
};

std::vector<ParallelFamily> detect_parallel_families(const StackedSystem& sys, double tol_par = kTolPar);

struct MergedInterval {
  PwaBound lower;  // max over nu_i with c_i > 0
  PwaBound upper;  // min over nu_i with c_i < 0
};

/// Member inequalities hold at (x, u) iff lower(x) <= v'u <= upper(x).
MergedInterval merge_parallel(const ParallelFamily& fam);

/// Range [inf v'u, sup v'u] over U; infinite ends for unbounded directions.
Interval support_interval(const Vec& v, const InputSet& U);

struct FeasibilityReport {
  bool feasible = false;
  std::optional<Vec> witness;
  /// lambda >= 0 over the rows [M; Q] with lambda'[M; Q] = 0 and lambda'[d(x); b] < 0.
  std::optional<Vec> certificate;
  bool used_interval_test = false;
};

FeasibilityReport feasible_at(const StackedSystem& sys, const InputSet& U, const Vec& x);

/// Verifies a report against the system it came from (witness residuals or certificate identities).
bool check_report(const StackedSystem& sys, const InputSet& U, const Vec& x, const FeasibilityReport& r,
                  double tol = kTolMem);

/// Halfspace description normal'x <= offset.
struct Polytope {
  Index dim = 0;
  std::vector<Halfspace> halfspaces;

  [[nodiscard]] bool contains(const Eigen::Ref<const Vec>& x, double tol = kTolMem) const;
  /// Smallest slack over the halfspaces (+inf for the whole space).
  [[nodiscard]] double min_slack(const Eigen::Ref<const Vec>& x) const;
  static Polytope whole(Index n) { return {n, {}}; }
};

struct ParallelDomain {
  Polytope unbounded;  // nu_i <= nu_j over sign pairs (U = R^m)
  Polytope bounded;    // unbounded plus lower <= s_max and s_min <= upper
};

ParallelDomain feasibility_domain_parallel(const ParallelFamily& fam, const InputSet& U);

struct Block {
  enum class Kind { ParallelFamily, IndependentRows, General };
  std::vector<std::size_t> rows;
  Kind kind = Kind::General;
  /// Canonical direction for ParallelFamily and single-row IndependentRows blocks.
  std::optional<Vec> direction;
};

std::string_view to_string(Block::Kind kind);

struct BlockPartition {
  std::vector<Block> blocks;
};

/// Families become blocks when their directions are linearly independent; otherwise one General block.
BlockPartition detect_blocks(const StackedSystem& sys, double tol_rank = kTolRank);

/// Checks that a (possibly user-supplied) partition covers every row once and that
/// the block row spaces are mutually independent (sum of block ranks equals total rank).
bool verify_partition(const StackedSystem& sys, const BlockPartition& part, double tol_rank = kTolRank);

/// True iff the rows indexed by T are linearly independent.
bool independent_always_feasible(const StackedSystem& sys, std::span<const std::size_t> T,
                                 double tol_rank = kTolRank);

/// Sufficient feasibility test for interval constraints along dependent directions:
/// eta(j, i) expands dependent direction j over independent direction i.
bool dependent_certificate(std::span<const Interval> independent, const Mat& eta,
                           std::span<const Interval> dependent);

/// Same test, first checking v_j = sum_i eta(j,i) v_i (rows of the direction matrices).
bool dependent_certificate(const Mat& independent_dirs, std::span<const Interval> independent, const Mat& eta,
                           const Mat& dependent_dirs, std::span<const Interval> dependent,
                           double tol = kTolRank);

/// Least-squares expansion coefficients; throws DependencyMismatch when a dependent row is not in the span.
Mat expansion_coefficients(const Mat& independent_dirs, const Mat& dependent_dirs, double tol = kTolRank);

struct ProjectionOptions {
  std::size_t max_rows = 20000;
  double tol = 1e-9;
};

/// Fourier-Motzkin elimination of u from { M u <= d(x), u in U }, with LP-based redundancy removal.
Polytope project_feasible_set(const StackedSystem& sys, const InputSet& U, const ProjectionOptions& opts = {});

/// Drops every halfspace whose left side cannot exceed its offset given the others.
Polytope remove_redundant(const Polytope& P, double tol = 1e-9);

}  // namespace hocbf
