#include "hocbf/construction.hpp"

#include "hocbf/error.hpp"

#include <algorithm>
#include <string>

namespace hocbf {

int numerical_rank(const Eigen::Ref<const Mat>& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(m);
  const Vec& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  int rank = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > rel_tol * sv(0)) ++rank;
  }
  return rank;
}

LtiSystem::LtiSystem(Mat A, Mat B) : A_(std::move(A)), B_(std::move(B)) {
  require(A_.rows() >= 1 && A_.rows() == A_.cols(), ErrorCode::DimensionMismatch, "A must be square and nonempty");
  require(B_.rows() == A_.rows(), ErrorCode::DimensionMismatch, "B must have n rows");
  require(B_.cols() >= 1, ErrorCode::DimensionMismatch, "B must have at least one column");
  require(A_.allFinite() && B_.allFinite(), ErrorCode::InvalidArgument, "system matrices must be finite");
}

AffineForm::AffineForm(Vec coeffs, double offset) : c(std::move(coeffs)), c0(offset) {}

StackedSystem::StackedSystem(std::vector<BarrierRow> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) return;
  m_ = rows_.front().ell.size();
  n_ = rows_.front().beta.dim();
  for (const auto& r : rows_) {
    require(r.ell.size() == m_, ErrorCode::DimensionMismatch, "rows disagree on input dimension");
    require(r.beta.dim() == n_, ErrorCode::DimensionMismatch, "rows disagree on state dimension");
  }
}

StackedSystem StackedSystem::empty(Index n, Index m) {
  StackedSystem s({});
  s.n_ = n;
  s.m_ = m;
  return s;
}

Mat StackedSystem::L() const {
  Mat L(static_cast<Index>(p()), m_);
  for (std::size_t i = 0; i < p(); ++i) L.row(static_cast<Index>(i)) = rows_[i].ell.transpose();
  return L;
}

Mat StackedSystem::M() const { return -L(); }

Vec StackedSystem::d(const Vec& x) const {
  Vec out(static_cast<Index>(p()));
  for (std::size_t i = 0; i < p(); ++i) out(static_cast<Index>(i)) = rows_[i].beta(x);
  return out;
}

Mat StackedSystem::D() const {
  Mat D(static_cast<Index>(p()), n_);
  for (std::size_t i = 0; i < p(); ++i) D.row(static_cast<Index>(i)) = rows_[i].beta.c.transpose();
  return D;
}

Vec StackedSystem::d0() const {
  Vec out(static_cast<Index>(p()));
  for (std::size_t i = 0; i < p(); ++i) out(static_cast<Index>(i)) = rows_[i].beta.c0;
  return out;
}

StackedSystem StackedSystem::subset(std::span<const std::size_t> indices) const {
  std::vector<BarrierRow> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    require(i < p(), ErrorCode::InvalidArgument, "row index out of range");
    out.push_back(rows_[i]);
  }
  if (out.empty()) return empty(n_, m_);
  return StackedSystem(std::move(out));
}

double PsiChain::min_level(const Vec& x) const {
  double v = kInf;
  for (const auto& f : levels) v = std::min(v, f(x));
  return v;
}

double relative_degree_tolerance(const LtiSystem& sys, const Vec& a, int k) {
  const double nA = sys.A().norm();
  const double scale = a.norm() * std::pow(nA, k) * sys.B().norm();
  return 1e-9 * (1.0 + scale);
}

int relative_degree(const LtiSystem& sys, const Vec& a) {
  require(a.size() == sys.n(), ErrorCode::DimensionMismatch, "safety normal must have length n");
  require(a.allFinite(), ErrorCode::InvalidArgument, "safety normal must be finite");
  require(a.norm() > 0.0, ErrorCode::ZeroNormal, "safety normal a is zero");
  // row = a' A^k, advanced one power per iteration
  Eigen::RowVectorXd row = a.transpose();
  for (int k = 0; k < sys.n(); ++k) {
    const Eigen::RowVectorXd ell = row * sys.B();
    if (ell.norm() > relative_degree_tolerance(sys, a, k)) return k + 1;
    row = row * sys.A();
  }
  fail(ErrorCode::NoRelativeDegree, "a'A^k B vanishes for all k < n; the input never reaches this constraint");
}

Mat characteristic_matrix(const Mat& A, std::span<const double> alphas) {
  const Index n = A.rows();
  Mat P = Mat::Identity(n, n);
  for (double alpha : alphas) P = P * A + alpha * P;
  return P;
}

namespace {

void check_gains(const AffineSafety& s, int r) {
  require(std::isfinite(s.b), ErrorCode::InvalidArgument, "offset b must be finite");
  if (static_cast<int>(s.alphas.size()) != r) {
    fail(ErrorCode::GainLengthMismatch, "expected " + std::to_string(r) + " gains for relative degree " +
                                            std::to_string(r) + ", got " + std::to_string(s.alphas.size()));
  }
  for (double alpha : s.alphas) {
    require(std::isfinite(alpha) && alpha > 0.0, ErrorCode::InvalidArgument, "gains must be positive and finite");
  }
}

}  // namespace

BarrierRow build_barrier_row(const LtiSystem& sys, const AffineSafety& s, std::size_t source_index) {
  const int r = relative_degree(sys, s.a);
  check_gains(s, r);

  BarrierRow row;
  row.rel_degree = r;
  row.source_index = source_index;

  Eigen::RowVectorXd aT = s.a.transpose();
  for (int k = 0; k < r - 1; ++k) aT = aT * sys.A();
  row.ell = (aT * sys.B()).transpose();

  double phi0 = 1.0;
  for (double alpha : s.alphas) phi0 *= alpha;
  const Mat phiA = characteristic_matrix(sys.A(), s.alphas);
  row.beta = AffineForm((s.a.transpose() * phiA).transpose(), -phi0 * s.b);
  return row;
}

PsiChain psi_chain(const LtiSystem& sys, const AffineSafety& s) {
  const int r = relative_degree(sys, s.a);
  check_gains(s, r);

  PsiChain chain;
  chain.levels.reserve(static_cast<std::size_t>(r));
  chain.levels.push_back(s.h());
  for (int k = 0; k + 1 < r; ++k) {
    const AffineForm& prev = chain.levels.back();
    const double alpha = s.alphas[static_cast<std::size_t>(k)];
    chain.levels.emplace_back(sys.A().transpose() * prev.c + alpha * prev.c, alpha * prev.c0);
  }
  return chain;
}

StackedSystem stack(std::vector<BarrierRow> rows) {
  require(!rows.empty(), ErrorCode::InvalidArgument, "cannot stack an empty row list");
  return StackedSystem(std::move(rows));
}

AffineSafety with_uniform_gains(const LtiSystem& sys, AffineSafety s,
                                std::span<const std::vector<double>> gains_by_degree) {
  if (!s.alphas.empty()) return s;
  const int r = relative_degree(sys, s.a);
  require(static_cast<std::size_t>(r) <= gains_by_degree.size() && !gains_by_degree[r - 1].empty(),
          ErrorCode::GainLengthMismatch, "no gain list configured for relative degree " + std::to_string(r));
  s.alphas = gains_by_degree[static_cast<std::size_t>(r - 1)];
  return s;
}

bool in_invariant_set(std::span<const PsiChain> chains, const Vec& x, double tol) {
  return std::all_of(chains.begin(), chains.end(), [&](const PsiChain& c) { return c.min_level(x) >= -tol; });
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroNormal: return "ZeroNormal";
    case ErrorCode::NoRelativeDegree: return "NoRelativeDegree";
    case ErrorCode::GainLengthMismatch: return "GainLengthMismatch";
    case ErrorCode::ZeroRow: return "ZeroRow";
    case ErrorCode::EmptyInputSet: return "EmptyInputSet";
    case ErrorCode::IterationCap: return "IterationCap";
    case ErrorCode::CombinatorialBlowup: return "CombinatorialBlowup";
    case ErrorCode::DependencyMismatch: return "DependencyMismatch";
    case ErrorCode::InvertedInterval: return "InvertedInterval";
    case ErrorCode::InfeasibleState: return "InfeasibleState";
    case ErrorCode::GMismatch: return "GMismatch";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::SamplingExhausted: return "SamplingExhausted";
    case ErrorCode::InfeasibleAtState: return "InfeasibleAtState";
  }
  return "Unknown";
}

}  // namespace hocbf
