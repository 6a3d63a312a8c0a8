#include "hocbf/error.hpp"
#include "hocbf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hocbf {

// ---------------------------------------------------------------- InputSet

InputSet InputSet::all(Index m) {
  require(m >= 1, ErrorCode::DimensionMismatch, "input dimension must be positive");
  InputSet s;
  s.kind_ = Kind::All;
  s.m_ = m;
  return s;
}

InputSet InputSet::box(Vec lo, Vec hi) {
  require(lo.size() == hi.size() && lo.size() >= 1, ErrorCode::DimensionMismatch, "box bounds disagree in size");
  for (Index k = 0; k < lo.size(); ++k) {
    require(!std::isnan(lo(k)) && !std::isnan(hi(k)), ErrorCode::InvalidArgument, "box bounds must not be NaN");
    require(lo(k) <= hi(k), ErrorCode::EmptyInputSet, "box lower bound exceeds upper bound");
    require(lo(k) < kInf && hi(k) > -kInf, ErrorCode::EmptyInputSet, "box bounds exclude every real value");
  }
  InputSet s;
  s.kind_ = Kind::Box;
  s.m_ = lo.size();
  s.lo_ = std::move(lo);
  s.hi_ = std::move(hi);
  return s;
}

InputSet InputSet::polyhedron(Mat Q, Vec b) {
  require(Q.rows() == b.size() && Q.cols() >= 1, ErrorCode::DimensionMismatch, "polyhedron data disagree");
  require(Q.allFinite() && b.allFinite(), ErrorCode::InvalidArgument, "polyhedron data must be finite");
  const LpResult r = lp_feasibility(Q, b);
  require(r.status != LpStatus::Infeasible, ErrorCode::EmptyInputSet, "input polyhedron is empty");
  InputSet s;
  s.kind_ = Kind::Polyhedron;
  s.m_ = Q.cols();
  s.Q_ = std::move(Q);
  s.b_ = std::move(b);
  return s;
}

Mat InputSet::constraint_matrix() const {
  switch (kind_) {
    case Kind::All: return Mat(0, m_);
    case Kind::Polyhedron: return Q_;
    case Kind::Box: {
      std::vector<Eigen::RowVectorXd> rows;
      for (Index k = 0; k < m_; ++k) {
        if (std::isfinite(hi_(k))) rows.push_back(Eigen::RowVectorXd::Unit(m_, k));
        if (std::isfinite(lo_(k))) rows.push_back(-Eigen::RowVectorXd::Unit(m_, k));
      }
      Mat Q(static_cast<Index>(rows.size()), m_);
      for (std::size_t i = 0; i < rows.size(); ++i) Q.row(static_cast<Index>(i)) = rows[i];
      return Q;
    }
  }
  return Mat(0, m_);
}

Vec InputSet::constraint_rhs() const {
  switch (kind_) {
    case Kind::All: return Vec(0);
    case Kind::Polyhedron: return b_;
    case Kind::Box: {
      std::vector<double> v;
      for (Index k = 0; k < m_; ++k) {
        if (std::isfinite(hi_(k))) v.push_back(hi_(k));
        if (std::isfinite(lo_(k))) v.push_back(-lo_(k));
      }
      return Eigen::Map<Vec>(v.data(), static_cast<Index>(v.size()));
    }
  }
  return Vec(0);
}

bool InputSet::contains(const Vec& u, double tol) const {
  if (u.size() != m_) return false;
  switch (kind_) {
    case Kind::All: return u.allFinite();
    case Kind::Box: return ((u - hi_).array() <= tol).all() && ((lo_ - u).array() <= tol).all();
    case Kind::Polyhedron: return ((Q_ * u - b_).array() <= tol).all();
  }
  return false;
}

std::string_view to_string(InputSet::Kind kind) {
  switch (kind) {
    case InputSet::Kind::All: return "all";
    case InputSet::Kind::Box: return "box";
    case InputSet::Kind::Polyhedron: return "polyhedron";
  }
  return "unknown";
}

// ---------------------------------------------------------------- PwaBound

double PwaBound::operator()(const Eigen::Ref<const Vec>& x) const {
  if (kind == Kind::Max) {
    double v = -kInf;
    for (const auto& p : pieces) v = std::max(v, p(x));
    return v;
  }
  double v = kInf;
  for (const auto& p : pieces) v = std::min(v, p(x));
  return v;
}

int PwaBound::active_piece(const Eigen::Ref<const Vec>& x) const {
  int best = -1;
  double val = 0.0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const double v = pieces[i](x);
    if (best < 0 || (kind == Kind::Max ? v > val : v < val)) {
      best = static_cast<int>(i);
      val = v;
    }
  }
  return best;
}

PwaBound PwaBound::scaled(double positive_factor) const {
  require(positive_factor > 0.0, ErrorCode::InvalidArgument, "bound scale factor must be positive");
  PwaBound out{{}, kind};
  out.pieces.reserve(pieces.size());
  for (const auto& p : pieces) out.pieces.push_back(p.scaled(positive_factor));
  return out;
}

PwaBound PwaBound::with_constant(Index n, double value) const {
  PwaBound out = *this;
  if (std::isfinite(value)) out.pieces.push_back(AffineForm::constant(n, value));
  return out;
}

// ---------------------------------------------------------------- parallel families

namespace {

Vec canonical_direction(const Vec& ell, double tol) {
  Vec v = ell / ell.norm();
  for (Index k = 0; k < v.size(); ++k) {
    if (std::abs(v(k)) > tol) {
      if (v(k) < 0) v = -v;
      break;
    }
  }
  return v;
}

}  // namespace

std::vector<ParallelFamily> detect_parallel_families(const StackedSystem& sys, double tol_par) {
  const auto& rows = sys.rows();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].ell.norm() > 0.0, ErrorCode::ZeroRow, "row " + std::to_string(i) + " has a zero normal");
  }
  std::vector<bool> assigned(rows.size(), false);
  std::vector<ParallelFamily> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (assigned[i]) continue;
    ParallelFamily fam;
    fam.v = canonical_direction(rows[i].ell, tol_par);
    for (std::size_t j = i; j < rows.size(); ++j) {
      if (assigned[j]) continue;
      const double c = fam.v.dot(rows[j].ell);
      if ((rows[j].ell - c * fam.v).norm() <= tol_par * rows[j].ell.norm() && c != 0.0) {
        assigned[j] = true;
        fam.members.push_back(j);
        fam.c.push_back(c);
        fam.nu.push_back(rows[j].beta.scaled(-1.0 / c));
      }
    }
    out.push_back(std::move(fam));
  }
  return out;
}

MergedInterval merge_parallel(const ParallelFamily& fam) {
  MergedInterval out{{{}, PwaBound::Kind::Max}, {{}, PwaBound::Kind::Min}};
  for (std::size_t k = 0; k < fam.members.size(); ++k) {
    (fam.c[k] > 0 ? out.lower : out.upper).pieces.push_back(fam.nu[k]);
  }
  return out;
}

Interval support_interval(const Vec& v, const InputSet& U) {
  require(v.size() == U.m(), ErrorCode::DimensionMismatch, "direction and input set disagree");
  require(v.norm() > 0.0, ErrorCode::ZeroRow, "support direction is zero");
  switch (U.kind()) {
    case InputSet::Kind::All: return {-kInf, kInf};
    case InputSet::Kind::Box: {
      double smin = 0.0, smax = 0.0;
      for (Index k = 0; k < v.size(); ++k) {
        if (v(k) == 0.0) continue;
        if (v(k) > 0) {
          smin += v(k) * U.lo()(k);
          smax += v(k) * U.hi()(k);
        } else {
          smin += v(k) * U.hi()(k);
          smax += v(k) * U.lo()(k);
        }
      }
      return {smin, smax};
    }
    case InputSet::Kind::Polyhedron: {
      const LpResult lo = lp_solve(v, U.Q(), U.b(), Sense::Minimize);
      require(lo.status != LpStatus::Infeasible, ErrorCode::EmptyInputSet, "input polyhedron is empty");
      const LpResult hi = lp_solve(v, U.Q(), U.b(), Sense::Maximize);
      return {lo.status == LpStatus::Unbounded ? -kInf : lo.value, hi.status == LpStatus::Unbounded ? kInf : hi.value};
    }
  }
  return {-kInf, kInf};
}

// ---------------------------------------------------------------- pointwise feasibility

namespace {

// Point of the box with v'u = s; s must lie in the box support interval.
Vec box_point_on_level(const Vec& v, const InputSet& U, double s) {
  Vec u = Vec::Zero(v.size()).cwiseMax(U.lo()).cwiseMin(U.hi());
  double cur = v.dot(u);
  for (Index k = 0; k < v.size() && cur != s; ++k) {
    if (v(k) == 0.0) continue;
    const bool up = (s > cur) == (v(k) > 0);
    const double target = up ? U.hi()(k) : U.lo()(k);
    const double room = std::abs((target - u(k)) * v(k));
    const double need = std::abs(s - cur);
    if (room >= need) {
      u(k) += (s - cur) / v(k);
      cur = s;
    } else {
      u(k) = target;
      cur = v.dot(u);
    }
  }
  return u;
}

// Box rows as laid out by InputSet::constraint_matrix: (upper row, lower row) per coordinate.
void box_row_indices(const InputSet& U, std::vector<Index>& upper, std::vector<Index>& lower) {
  upper.assign(static_cast<std::size_t>(U.m()), -1);
  lower.assign(static_cast<std::size_t>(U.m()), -1);
  Index r = 0;
  for (Index k = 0; k < U.m(); ++k) {
    if (std::isfinite(U.hi()(k))) upper[static_cast<std::size_t>(k)] = r++;
    if (std::isfinite(U.lo()(k))) lower[static_cast<std::size_t>(k)] = r++;
  }
}

FeasibilityReport interval_test(const StackedSystem& sys, const ParallelFamily& fam, const InputSet& U,
                                const Vec& x) {
  const MergedInterval merged = merge_parallel(fam);
  const double lo = merged.lower(x);
  const double hi = merged.upper(x);
  const Interval sup = support_interval(fam.v, U);
  const Interval target = Interval{lo, hi}.intersect(sup);

  FeasibilityReport rep;
  rep.used_interval_test = true;
  const Index p = static_cast<Index>(sys.p());
  if (!target.empty()) {
    rep.feasible = true;
    const double s = std::clamp(0.0, target.lo, target.hi);
    rep.witness = U.kind() == InputSet::Kind::Box ? box_point_on_level(fam.v, U, s) : Vec(s * fam.v);
    return rep;
  }

  const Index q = U.constraint_matrix().rows();
  Vec lambda = Vec::Zero(p + q);
  const int li = merged.lower.active_piece(x);
  const int ui = merged.upper.active_piece(x);
  // k-th lower (c > 0) or upper (c < 0) piece, in member order as built by merge_parallel
  auto member_of = [&](int piece, bool positive) {
    int seen = -1;
    for (std::size_t k = 0; k < fam.members.size(); ++k) {
      if ((fam.c[k] > 0) == positive && ++seen == piece) return k;
    }
    return std::size_t{0};
  };
  std::vector<Index> upper_rows, lower_rows;
  if (U.kind() == InputSet::Kind::Box) box_row_indices(U, upper_rows, lower_rows);

  if (lo > hi) {
    const std::size_t i = member_of(li, true);
    const std::size_t j = member_of(ui, false);
    lambda(static_cast<Index>(fam.members[i])) = 1.0 / fam.c[i];
    lambda(static_cast<Index>(fam.members[j])) = -1.0 / fam.c[j];
  } else if (lo > sup.hi) {
    const std::size_t i = member_of(li, true);
    lambda(static_cast<Index>(fam.members[i])) = 1.0 / fam.c[i];
    for (Index k = 0; k < U.m(); ++k) {
      const double vk = fam.v(k);
      if (vk > 0) lambda(p + upper_rows[static_cast<std::size_t>(k)]) = vk;
      if (vk < 0) lambda(p + lower_rows[static_cast<std::size_t>(k)]) = -vk;
    }
  } else {
    const std::size_t j = member_of(ui, false);
    lambda(static_cast<Index>(fam.members[j])) = -1.0 / fam.c[j];
    for (Index k = 0; k < U.m(); ++k) {
      const double vk = fam.v(k);
      if (vk > 0) lambda(p + lower_rows[static_cast<std::size_t>(k)]) = vk;
      if (vk < 0) lambda(p + upper_rows[static_cast<std::size_t>(k)]) = -vk;
    }
  }
  rep.feasible = false;
  rep.certificate = lambda / lambda.sum();
  return rep;
}

}  // namespace

FeasibilityReport feasible_at(const StackedSystem& sys, const InputSet& U, const Vec& x) {
  require(sys.p() == 0 || sys.m() == U.m(), ErrorCode::DimensionMismatch, "system and input set disagree on m");
  require(sys.p() == 0 || x.size() == sys.n(), ErrorCode::DimensionMismatch, "state has wrong dimension");

  if (sys.p() > 0 && U.kind() != InputSet::Kind::Polyhedron) {
    const auto families = detect_parallel_families(sys);
    if (families.size() == 1) return interval_test(sys, families.front(), U, x);
  }

  const Mat Q = U.constraint_matrix();
  const Index p = static_cast<Index>(sys.p());
  Mat A(p + Q.rows(), U.m());
  Vec b(p + Q.rows());
  if (p > 0) {
    A.topRows(p) = sys.M();
    b.head(p) = sys.d(x);
  }
  A.bottomRows(Q.rows()) = Q;
  b.tail(Q.rows()) = U.constraint_rhs();

  FeasibilityReport rep;
  const LpResult r = lp_feasibility(A, b);
  if (r.status == LpStatus::Infeasible) {
    rep.feasible = false;
    rep.certificate = r.farkas;
  } else {
    rep.feasible = true;
    rep.witness = r.x;
  }
  return rep;
}

bool check_report(const StackedSystem& sys, const InputSet& U, const Vec& x, const FeasibilityReport& r,
                  double tol) {
  if (r.witness.has_value() == r.certificate.has_value()) return false;
  const Index p = static_cast<Index>(sys.p());
  if (r.feasible) {
    if (!r.witness) return false;
    const Vec& u = *r.witness;
    if (p > 0 && ((sys.M() * u - sys.d(x)).array() > tol).any()) return false;
    return U.contains(u, tol);
  }
  if (!r.certificate) return false;
  const Mat Q = U.constraint_matrix();
  Mat A(p + Q.rows(), U.m());
  Vec b(p + Q.rows());
  if (p > 0) {
    A.topRows(p) = sys.M();
    b.head(p) = sys.d(x);
  }
  A.bottomRows(Q.rows()) = Q;
  b.tail(Q.rows()) = U.constraint_rhs();
  const Vec& lambda = *r.certificate;
  if (lambda.size() != A.rows() || (lambda.array() < -tol).any()) return false;
  const double scale = 1.0 + A.cwiseAbs().maxCoeff();
  if ((A.transpose() * lambda).cwiseAbs().maxCoeff() > tol * scale) return false;
  return lambda.dot(b) < 0.0;
}

// ---------------------------------------------------------------- polytopes and domains

bool Polytope::contains(const Eigen::Ref<const Vec>& x, double tol) const {
  return std::all_of(halfspaces.begin(), halfspaces.end(),
                     [&](const Halfspace& h) { return h.normal.dot(x) <= h.offset + tol; });
}

double Polytope::min_slack(const Eigen::Ref<const Vec>& x) const {
  double s = kInf;
  for (const auto& h : halfspaces) s = std::min(s, h.slack(x));
  return s;
}

ParallelDomain feasibility_domain_parallel(const ParallelFamily& fam, const InputSet& U) {
  const MergedInterval merged = merge_parallel(fam);
  const Index n = fam.nu.empty() ? 0 : fam.nu.front().dim();
  ParallelDomain out{{n, {}}, {n, {}}};
  // nu_i(x) <= nu_j(x)  <=>  (g_i - g_j)'x <= g0_j - g0_i
  for (const auto& lo : merged.lower.pieces) {
    for (const auto& hi : merged.upper.pieces) {
      out.unbounded.halfspaces.push_back({lo.c - hi.c, hi.c0 - lo.c0});
    }
  }
  out.bounded = out.unbounded;
  const Interval sup = support_interval(fam.v, U);
  if (std::isfinite(sup.hi)) {
    for (const auto& lo : merged.lower.pieces) out.bounded.halfspaces.push_back({lo.c, sup.hi - lo.c0});
  }
  if (std::isfinite(sup.lo)) {
    for (const auto& hi : merged.upper.pieces) out.bounded.halfspaces.push_back({-hi.c, hi.c0 - sup.lo});
  }
  return out;
}

// ---------------------------------------------------------------- blocks and independence

std::string_view to_string(Block::Kind kind) {
  switch (kind) {
    case Block::Kind::ParallelFamily: return "parallel-family";
    case Block::Kind::IndependentRows: return "independent-rows";
    case Block::Kind::General: return "general";
  }
  return "unknown";
}

BlockPartition detect_blocks(const StackedSystem& sys, double tol_rank) {
  BlockPartition part;
  if (sys.p() == 0) return part;
  const auto families = detect_parallel_families(sys);
  Mat V(static_cast<Index>(families.size()), sys.m());
  for (std::size_t k = 0; k < families.size(); ++k) V.row(static_cast<Index>(k)) = families[k].v.transpose();
  if (numerical_rank(V, tol_rank) == static_cast<int>(families.size())) {
    for (const auto& f : families) {
      Block b;
      b.rows = f.members;
      b.kind = f.members.size() > 1 ? Block::Kind::ParallelFamily : Block::Kind::IndependentRows;
      b.direction = f.v;
      part.blocks.push_back(std::move(b));
    }
  } else {
    Block b;
    b.rows.resize(sys.p());
    std::iota(b.rows.begin(), b.rows.end(), std::size_t{0});
    b.kind = Block::Kind::General;
    part.blocks.push_back(std::move(b));
  }
  return part;
}

bool verify_partition(const StackedSystem& sys, const BlockPartition& part, double tol_rank) {
  std::vector<int> seen(sys.p(), 0);
  int rank_sum = 0;
  const Mat L = sys.L();
  for (const auto& b : part.blocks) {
    Mat Lb(static_cast<Index>(b.rows.size()), sys.m());
    for (std::size_t i = 0; i < b.rows.size(); ++i) {
      if (b.rows[i] >= sys.p()) return false;
      ++seen[b.rows[i]];
      Lb.row(static_cast<Index>(i)) = L.row(static_cast<Index>(b.rows[i]));
    }
    rank_sum += numerical_rank(Lb, tol_rank);
  }
  if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; })) return false;
  return rank_sum == numerical_rank(L, tol_rank);
}

bool independent_always_feasible(const StackedSystem& sys, std::span<const std::size_t> T, double tol_rank) {
  if (T.empty()) return true;
  Mat LT(static_cast<Index>(T.size()), sys.m());
  for (std::size_t i = 0; i < T.size(); ++i) {
    require(T[i] < sys.p(), ErrorCode::InvalidArgument, "row index out of range");
    LT.row(static_cast<Index>(i)) = sys.rows()[T[i]].ell.transpose();
  }
  return numerical_rank(LT, tol_rank) == static_cast<int>(T.size());
}

// ---------------------------------------------------------------- dependent directions

bool dependent_certificate(std::span<const Interval> independent, const Mat& eta,
                           std::span<const Interval> dependent) {
  require(eta.rows() == static_cast<Index>(dependent.size()) && eta.cols() == static_cast<Index>(independent.size()),
          ErrorCode::DimensionMismatch, "expansion matrix shape disagrees with the interval lists");
  for (const auto& I : independent) {
    require(!I.empty(), ErrorCode::InvertedInterval, "independent interval has lo > hi");
  }
  for (std::size_t j = 0; j < dependent.size(); ++j) {
    double lower_sum = 0.0;  // sum_i eta_ji s^-_{i,j}
    double upper_sum = 0.0;  // sum_i eta_ji s^+_{i,j}
    for (std::size_t i = 0; i < independent.size(); ++i) {
      const double e = eta(static_cast<Index>(j), static_cast<Index>(i));
      if (e == 0.0) continue;
      const double s_plus = e >= 0 ? independent[i].hi : independent[i].lo;
      const double s_minus = e >= 0 ? independent[i].lo : independent[i].hi;
      lower_sum += e * s_minus;
      upper_sum += e * s_plus;
    }
    if (!(dependent[j].lo <= lower_sum && dependent[j].hi >= upper_sum)) return false;
  }
  return true;
}

Mat expansion_coefficients(const Mat& independent_dirs, const Mat& dependent_dirs, double tol) {
  require(independent_dirs.cols() == dependent_dirs.cols(), ErrorCode::DimensionMismatch,
          "direction sets disagree on dimension");
  const Mat Vt = independent_dirs.transpose();
  const auto qr = Vt.colPivHouseholderQr();
  Mat eta(dependent_dirs.rows(), independent_dirs.rows());
  for (Index j = 0; j < dependent_dirs.rows(); ++j) {
    const Vec vj = dependent_dirs.row(j).transpose();
    const Vec e = qr.solve(vj);
    require((Vt * e - vj).norm() <= tol * std::max(1.0, vj.norm()), ErrorCode::DependencyMismatch,
            "dependent direction " + std::to_string(j) + " is not in the span of the independent set");
    eta.row(j) = e.transpose();
  }
  return eta;
}

bool dependent_certificate(const Mat& independent_dirs, std::span<const Interval> independent, const Mat& eta,
                           const Mat& dependent_dirs, std::span<const Interval> dependent, double tol) {
  require(independent_dirs.rows() == static_cast<Index>(independent.size()) &&
              dependent_dirs.rows() == static_cast<Index>(dependent.size()),
          ErrorCode::DimensionMismatch, "direction and interval counts disagree");
  require(numerical_rank(independent_dirs, tol) == independent_dirs.rows(), ErrorCode::RankDeficient,
          "independent directions are linearly dependent");
  const Mat recon = eta * independent_dirs;
  for (Index j = 0; j < dependent_dirs.rows(); ++j) {
    const double err = (recon.row(j) - dependent_dirs.row(j)).norm();
    require(err <= tol * std::max(1.0, dependent_dirs.row(j).norm()), ErrorCode::DependencyMismatch,
            "v_j differs from sum_i eta_ji v_i for dependent direction " + std::to_string(j));
  }
  return dependent_certificate(independent, eta, dependent);
}

}  // namespace hocbf
