#include "hocbf/filters.hpp"

#include "hocbf/error.hpp"

#include <cmath>
#include <string>

namespace hocbf {

double saturate(double z, double lo, double hi) {
  require(!(lo > hi), ErrorCode::InvertedInterval, "saturation interval has lo > hi");
  return std::min(std::max(z, lo), hi);
}

Vec saturate(const Vec& z, const Vec& lo, const Vec& hi) {
  require(z.size() == lo.size() && z.size() == hi.size(), ErrorCode::DimensionMismatch,
          "saturation bounds disagree with the argument");
  Vec out(z.size());
  for (Index k = 0; k < z.size(); ++k) out(k) = saturate(z(k), lo(k), hi(k));
  return out;
}

namespace {

Eigen::LLT<Mat> spd_factor(const Mat& G, Index m) {
  require(G.rows() == m && G.cols() == m, ErrorCode::DimensionMismatch, "weight matrix must be m x m");
  require(G.allFinite(), ErrorCode::InvalidArgument, "weight matrix must be finite");
  require((G - G.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + G.cwiseAbs().maxCoeff()),
          ErrorCode::InvalidArgument, "weight matrix must be symmetric");
  Eigen::LLT<Mat> llt(G);
  require(llt.info() == Eigen::Success, ErrorCode::InvalidArgument, "weight matrix must be positive definite");
  return llt;
}

// Interval [lower(x), upper(x)], tolerating an inversion below tol by collapsing it.
Interval evaluate_bounds(const PwaBound& lower, const PwaBound& upper, const Vec& x, double tol) {
  const double lo = lower(x);
  const double hi = upper(x);
  if (lo > hi + tol) {
    fail(ErrorCode::InfeasibleState, "lower bound " + std::to_string(lo) + " exceeds upper bound " +
                                         std::to_string(hi));
  }
  return {lo, std::max(lo, hi)};
}

}  // namespace

Vec parallel_filter(const Vec& x, const Vec& u_d, const Vec& v, const Mat& G, const PwaBound& lower,
                    const PwaBound& upper, double tol) {
  require(v.size() == u_d.size(), ErrorCode::DimensionMismatch, "direction and nominal input disagree");
  require(v.norm() > 0.0, ErrorCode::ZeroRow, "filter direction is zero");
  const auto llt = spd_factor(G, u_d.size());
  const Interval I = evaluate_bounds(lower, upper, x, tol);
  const double eps_d = v.dot(u_d);
  const double eps = saturate(eps_d, I.lo, I.hi);
  if (eps == eps_d) return u_d;
  const Vec w = llt.solve(v);
  return u_d + ((eps - eps_d) / v.dot(w)) * w;
}

Vec block_filter(const Vec& x, const Vec& u_d, const Mat& S, const Mat& G, std::span<const PwaBound> lower,
                 std::span<const PwaBound> upper, double tol) {
  const Index iota = S.rows();
  require(S.cols() == u_d.size(), ErrorCode::DimensionMismatch, "S and nominal input disagree");
  require(static_cast<Index>(lower.size()) == iota && static_cast<Index>(upper.size()) == iota,
          ErrorCode::DimensionMismatch, "one lower and one upper bound per row of S");
  const auto llt = spd_factor(G, u_d.size());
  if (iota == 0) return u_d;
  require(numerical_rank(S) == iota, ErrorCode::RankDeficient, "S must have full row rank");
  const Mat GinvSt = llt.solve(S.transpose());
  const double mismatch = norm_inf(S * GinvSt - Mat::Identity(iota, iota));
  require(mismatch <= 1e-10, ErrorCode::GMismatch,
          "S G^-1 S' differs from the identity by " + std::to_string(mismatch));
  const Vec eps_d = S * u_d;
  Vec delta(iota);
  for (Index k = 0; k < iota; ++k) {
    const Interval I = evaluate_bounds(lower[static_cast<std::size_t>(k)], upper[static_cast<std::size_t>(k)], x, tol);
    delta(k) = saturate(eps_d(k), I.lo, I.hi) - eps_d(k);
  }
  if ((delta.array() == 0.0).all()) return u_d;
  return u_d + GinvSt * delta;
}

Mat construct_G(const Mat& S, double tau) {
  require(tau > 0.0, ErrorCode::InvalidArgument, "tau must be positive");
  const Index iota = S.rows();
  const Index m = S.cols();
  require(iota >= 1 && iota <= m && numerical_rank(S) == iota, ErrorCode::RankDeficient,
          "S must have full row rank");
  if (iota == m) {
    const Mat G = S.transpose() * S;
    return 0.5 * (G + G.transpose());
  }
  const Mat SSt = S * S.transpose();
  const Eigen::LLT<Mat> llt(SSt);
  const Mat SSt_inv_S = llt.solve(S);                  // (SS')^{-1} S
  const Mat P = S.transpose() * SSt_inv_S;             // projector onto row space
  Mat Ginv = SSt_inv_S.transpose() * SSt_inv_S + tau * (Mat::Identity(m, m) - P);
  Ginv = 0.5 * (Ginv + Ginv.transpose());
  Mat G = Ginv.llt().solve(Mat::Identity(m, m));
  return 0.5 * (G + G.transpose());
}

std::string_view to_string(FilterPolicy p) {
  switch (p) {
    case FilterPolicy::Auto: return "auto";
    case FilterPolicy::ForceQp: return "force-qp";
    case FilterPolicy::ForceExplicit: return "force-explicit";
  }
  return "unknown";
}

std::string_view law_name(const FilterLaw& law) {
  if (std::holds_alternative<ParallelSaturation>(law)) return "parallel-saturation";
  if (std::holds_alternative<BlockSaturation>(law)) return "block-saturation";
  return "qp";
}

namespace {

bool axis_index(const Vec& v, Index& k) {
  Index best;
  const double big = v.cwiseAbs().maxCoeff(&best);
  if (std::abs(big - 1.0) > 1e-12 || (v.cwiseAbs().sum() - big) > 1e-12) return false;
  k = best;
  return true;
}

// Every coordinate with a finite bound must be one of the filter directions, so the
// box folds into the per-direction intervals.
bool box_aligned(const std::vector<ParallelFamily>& fams, const InputSet& U) {
  if (U.kind() == InputSet::Kind::All) return true;
  if (U.kind() != InputSet::Kind::Box) return false;
  std::vector<bool> covered(static_cast<std::size_t>(U.m()), false);
  for (const auto& f : fams) {
    Index k;
    if (axis_index(f.v, k)) covered[static_cast<std::size_t>(k)] = true;
  }
  for (Index k = 0; k < U.m(); ++k) {
    const bool bounded = std::isfinite(U.lo()(k)) || std::isfinite(U.hi()(k));
    if (bounded && !covered[static_cast<std::size_t>(k)]) return false;
  }
  return true;
}

}  // namespace

FilterLaw synthesize_filter(const StackedSystem& sys, const InputSet& U, const Mat& G, FilterPolicy policy) {
  require(sys.p() == 0 || sys.m() == U.m(), ErrorCode::DimensionMismatch, "system and input set disagree on m");
  const Index m = U.m();
  const auto llt = spd_factor(G, m);
  QpFallback qp{sys, U, G};
  if (policy == FilterPolicy::ForceQp) return qp;

  auto no_closed_form = [&](ErrorCode code, const std::string& why) -> FilterLaw {
    if (policy == FilterPolicy::ForceExplicit) fail(code, "no closed-form filter: " + why);
    return qp;
  };

  if (U.kind() == InputSet::Kind::Polyhedron) return no_closed_form(ErrorCode::InvalidArgument, "polyhedral input set");
  const auto fams = detect_parallel_families(sys);
  if (fams.empty()) {
    if (U.kind() == InputSet::Kind::All) return BlockSaturation{Mat(0, m), G, {}, {}};
    return no_closed_form(ErrorCode::InvalidArgument, "input bounds without constraint rows");
  }
  Mat V(static_cast<Index>(fams.size()), m);
  for (std::size_t k = 0; k < fams.size(); ++k) V.row(static_cast<Index>(k)) = fams[k].v.transpose();
  if (numerical_rank(V, kTolRank) != V.rows()) {
    return no_closed_form(ErrorCode::RankDeficient, "row directions are linearly dependent");
  }
  if (!box_aligned(fams, U)) return no_closed_form(ErrorCode::InvalidArgument, "input bounds not aligned");

  const Index n = sys.n();
  auto tightened = [&](const ParallelFamily& f) {
    MergedInterval mi = merge_parallel(f);
    const Interval sup = support_interval(f.v, U);
    return MergedInterval{mi.lower.with_constant(n, sup.lo), mi.upper.with_constant(n, sup.hi)};
  };

  if (fams.size() == 1) {
    auto mi = tightened(fams.front());
    return ParallelSaturation{fams.front().v, G, std::move(mi.lower), std::move(mi.upper)};
  }

  BlockSaturation law{Mat(V.rows(), m), G, {}, {}};
  for (std::size_t k = 0; k < fams.size(); ++k) {
    const Vec& v = fams[k].v;
    const double sigma = std::sqrt(v.dot(llt.solve(v)));
    law.S.row(static_cast<Index>(k)) = v.transpose() / sigma;
    auto mi = tightened(fams[k]);
    law.lower.push_back(mi.lower.scaled(1.0 / sigma));
    law.upper.push_back(mi.upper.scaled(1.0 / sigma));
  }
  const double mismatch = norm_inf(law.S * llt.solve(law.S.transpose()) - Mat::Identity(V.rows(), V.rows()));
  if (mismatch > 1e-10) return no_closed_form(ErrorCode::GMismatch, "S G^-1 S' is not the identity");
  return law;
}

QpProblem build_qp(const StackedSystem& sys, const InputSet& U, const Mat& G, const Vec& x, const Vec& u_d) {
  const Mat Q = U.constraint_matrix();
  const Vec qb = U.constraint_rhs();
  const Index p = static_cast<Index>(sys.p());
  QpProblem out{G, u_d, Mat(p + Q.rows(), U.m()), Vec(p + Q.rows())};
  if (p > 0) {
    out.A.topRows(p) = sys.M();
    out.b.head(p) = sys.d(x);
  }
  out.A.bottomRows(Q.rows()) = Q;
  out.b.tail(Q.rows()) = qb;
  return out;
}

Vec apply_filter(const FilterLaw& law, const Vec& x, const Vec& u_d, std::vector<int>* warm) {
  if (const auto* ps = std::get_if<ParallelSaturation>(&law)) return parallel_filter(x, u_d, ps->v, ps->G, ps->lower, ps->upper);
  if (const auto* bs = std::get_if<BlockSaturation>(&law)) return block_filter(x, u_d, bs->S, bs->G, bs->lower, bs->upper);
  const auto& q = std::get<QpFallback>(law);
  QpOptions opts;
  if (warm) opts.warm_active = *warm;
  const QpResult r = solve_qp(build_qp(q.sys, q.U, q.G, x, u_d), opts);
  if (warm) *warm = r.active;
  return r.u;
}

}  // namespace hocbf
