#include "hocbf/lp.hpp"

#include "hocbf/error.hpp"

#include <algorithm>
#include <cmath>

namespace hocbf {

namespace {

// Standard form over z = (x+, x-, s, art) >= 0 with one row per inequality:
//   sigma_i (A_i x+ - A_i x- + s_i) + art_i = sigma_i b_i,   sigma_i = sign(b_i).
// Artificial columns exist only for rows with b_i < 0; the starting basis is
// the slack (b_i >= 0) or artificial (b_i < 0) column of each row.
class Tableau {
 public:
  Tableau(const Mat& A, const Vec& b, const LpOptions& opts) : k_(A.cols()), rows_(A.rows()), tol_(opts.tol) {
    sigma_.resize(rows_);
    art_col_.assign(static_cast<std::size_t>(rows_), -1);
    Index n_art = 0;
    for (Index i = 0; i < rows_; ++i) {
      sigma_(i) = b(i) >= 0.0 ? 1.0 : -1.0;
      if (sigma_(i) < 0) art_col_[static_cast<std::size_t>(i)] = 2 * k_ + rows_ + n_art++;
    }
    cols_ = 2 * k_ + rows_ + n_art;
    orig_ = Mat::Zero(rows_, cols_);
    rhs0_.resize(rows_);
    basis_.resize(static_cast<std::size_t>(rows_));
    for (Index i = 0; i < rows_; ++i) {
      orig_.block(i, 0, 1, k_) = sigma_(i) * A.row(i);
      orig_.block(i, k_, 1, k_) = -sigma_(i) * A.row(i);
      orig_(i, 2 * k_ + i) = sigma_(i);
      rhs0_(i) = sigma_(i) * b(i);
      const Index a = art_col_[static_cast<std::size_t>(i)];
      if (a >= 0) {
        orig_(i, a) = 1.0;
        basis_[static_cast<std::size_t>(i)] = a;
      } else {
        basis_[static_cast<std::size_t>(i)] = 2 * k_ + i;
      }
    }
    T_ = orig_;
    rhs_ = rhs0_;
    max_iter_ = opts.max_iterations > 0 ? opts.max_iterations : static_cast<int>(50 * (rows_ + cols_) + 1000);
  }

  [[nodiscard]] bool is_artificial(Index j) const { return j >= 2 * k_ + rows_; }
  [[nodiscard]] bool has_artificials() const { return cols_ > 2 * k_ + rows_; }
  [[nodiscard]] Index cols() const { return cols_; }
  [[nodiscard]] Index k() const { return k_; }
  [[nodiscard]] int iterations() const { return iterations_; }

  enum class Outcome { Optimal, Unbounded };

  // Minimizes cost'z over the current feasible basis; artificial columns never enter when `allow_art` is false.
  Outcome run(const Vec& cost, bool allow_art) {
    while (true) {
      const Vec y_cost = reduced_costs(cost);
      Index enter = -1;
      for (Index j = 0; j < cols_; ++j) {
        if (!allow_art && is_artificial(j)) continue;
        if (is_basic(j)) continue;
        if (y_cost(j) < -tol_) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return Outcome::Optimal;

      Index leave = -1;
      double best = kInf;
      for (Index i = 0; i < rows_; ++i) {
        const double t = T_(i, enter);
        if (t <= tol_) continue;
        const double ratio = std::max(rhs_(i), 0.0) / t;
        const double tie = tol_ * (1.0 + std::abs(best));
        if (leave < 0 || ratio < best - tie) {
          best = ratio;
          leave = i;
        } else if (ratio <= best + tie &&
                   basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)]) {
          best = std::min(best, ratio);
          leave = i;
        }
      }
      if (leave < 0) {
        unbounded_col_ = enter;
        return Outcome::Unbounded;
      }
      pivot(leave, enter);
      if (++iterations_ > max_iter_) fail(ErrorCode::IterationCap, "simplex pivot budget exhausted");
    }
  }

  // Pivots basic artificials out where a nonartificial column has a nonzero entry in their row.
  void drive_out_artificials() {
    for (Index i = 0; i < rows_; ++i) {
      if (!is_artificial(basis_[static_cast<std::size_t>(i)])) continue;
      Index best = -1;
      for (Index j = 0; j < 2 * k_ + rows_; ++j) {
        if (is_basic(j)) continue;
        if (std::abs(T_(i, j)) > tol_ && (best < 0 || std::abs(T_(i, j)) > std::abs(T_(i, best)))) best = j;
      }
      if (best >= 0) pivot(i, best);
    }
  }

  // Basic solution recomputed from the original columns for accuracy.
  [[nodiscard]] Vec basic_solution() const {
    Mat Bm(rows_, rows_);
    for (Index i = 0; i < rows_; ++i) Bm.col(i) = orig_.col(basis_[static_cast<std::size_t>(i)]);
    const Vec zb = Bm.partialPivLu().solve(rhs0_);
    Vec z = Vec::Zero(cols_);
    for (Index i = 0; i < rows_; ++i) z(basis_[static_cast<std::size_t>(i)]) = zb(i);
    return z;
  }

  // y solving B'y = c_B (simplex multipliers of the equality rows).
  [[nodiscard]] Vec multipliers(const Vec& cost) const {
    Mat Bm(rows_, rows_);
    Vec cb(rows_);
    for (Index i = 0; i < rows_; ++i) {
      Bm.col(i) = orig_.col(basis_[static_cast<std::size_t>(i)]);
      cb(i) = cost(basis_[static_cast<std::size_t>(i)]);
    }
    return Bm.transpose().partialPivLu().solve(cb);
  }

  [[nodiscard]] const Vec& sigma() const { return sigma_; }
  [[nodiscard]] Index unbounded_col() const { return unbounded_col_; }
  [[nodiscard]] Vec x_from(const Vec& z) const { return z.head(k_) - z.segment(k_, k_); }

 private:
  [[nodiscard]] bool is_basic(Index j) const {
    return std::find(basis_.begin(), basis_.end(), j) != basis_.end();
  }

  [[nodiscard]] Vec reduced_costs(const Vec& cost) const {
    Vec cb(rows_);
    for (Index i = 0; i < rows_; ++i) cb(i) = cost(basis_[static_cast<std::size_t>(i)]);
    return cost - T_.transpose() * cb;
  }

  void pivot(Index r, Index c) {
    const double piv = T_(r, c);
    T_.row(r) /= piv;
    rhs_(r) /= piv;
    for (Index i = 0; i < rows_; ++i) {
      if (i == r) continue;
      const double f = T_(i, c);
      if (f == 0.0) continue;
      T_.row(i) -= f * T_.row(r);
      rhs_(i) -= f * rhs_(r);
    }
    basis_[static_cast<std::size_t>(r)] = c;
  }

  Index k_;
  Index rows_;
  Index cols_ = 0;
  double tol_;
  int max_iter_ = 0;
  int iterations_ = 0;
  Index unbounded_col_ = -1;
  Vec sigma_;
  std::vector<Index> art_col_;
  Mat orig_;
  Vec rhs0_;
  Mat T_;
  Vec rhs_;
  std::vector<Index> basis_;
};

double feasibility_threshold(const Vec& b, double tol) {
  const double scale = b.size() ? b.cwiseAbs().maxCoeff() : 0.0;
  return tol * (1.0 + scale);
}

// Runs phase one; on success the tableau holds a feasible basis free of artificials where possible.
bool phase_one(Tableau& tab, const Vec& b, double tol, LpResult& out) {
  if (!tab.has_artificials()) return true;
  Vec cost = Vec::Zero(tab.cols());
  for (Index j = 0; j < tab.cols(); ++j) {
    if (tab.is_artificial(j)) cost(j) = 1.0;
  }
  tab.run(cost, true);
  const Vec z = tab.basic_solution();
  const double w = cost.dot(z);
  if (w > feasibility_threshold(b, tol)) {
    const Vec y = tab.multipliers(cost);
    Vec lambda = -(tab.sigma().array() * y.array()).matrix();
    lambda = lambda.cwiseMax(0.0);
    const double s = lambda.sum();
    if (s > 0) lambda /= s;
    out.status = LpStatus::Infeasible;
    out.farkas = lambda;
    out.iterations = tab.iterations();
    return false;
  }
  tab.drive_out_artificials();
  return true;
}

}  // namespace

LpResult lp_solve(const Vec& c, const Mat& A, const Vec& b, Sense sense, const LpOptions& opts) {
  require(A.rows() == b.size(), ErrorCode::DimensionMismatch, "constraint matrix and rhs disagree");
  require(A.cols() == c.size(), ErrorCode::DimensionMismatch, "objective and constraint matrix disagree");
  require(A.allFinite() && b.allFinite() && c.allFinite(), ErrorCode::InvalidArgument, "LP data must be finite");

  LpResult out;
  const Index k = c.size();
  if (A.rows() == 0) {
    if (c.isZero(0.0)) {
      out.status = LpStatus::Optimal;
      out.x = Vec::Zero(k);
      out.value = 0.0;
      out.dual = Vec::Zero(0);
    } else {
      out.status = LpStatus::Unbounded;
      out.x = Vec::Zero(k);
      out.value = sense == Sense::Minimize ? -kInf : kInf;
    }
    return out;
  }

  Tableau tab(A, b, opts);
  if (!phase_one(tab, b, opts.tol, out)) return out;

  const double sgn = sense == Sense::Minimize ? 1.0 : -1.0;
  Vec cost = Vec::Zero(tab.cols());
  cost.head(k) = sgn * c;
  cost.segment(k, k) = -sgn * c;
  const auto outcome = tab.run(cost, false);
  const Vec z = tab.basic_solution();
  out.x = tab.x_from(z);
  out.iterations = tab.iterations();
  if (outcome == Tableau::Outcome::Unbounded) {
    out.status = LpStatus::Unbounded;
    out.value = sense == Sense::Minimize ? -kInf : kInf;
    return out;
  }
  out.status = LpStatus::Optimal;
  out.value = c.dot(out.x);
  const Vec y = tab.multipliers(cost);
  // For maximize the multipliers certify the internal minimization of -c'x.
  out.dual = (-(tab.sigma().array() * y.array())).matrix().cwiseMax(0.0);
  return out;
}

LpResult lp_solve(const Vec& c, const std::vector<Halfspace>& constraints, Sense sense, const LpOptions& opts) {
  Mat A;
  Vec b;
  to_matrix_form(constraints, c.size(), A, b);
  return lp_solve(c, A, b, sense, opts);
}

LpResult lp_feasibility(const Mat& A, const Vec& b, const LpOptions& opts) {
  LpResult r = lp_solve(Vec::Zero(A.cols()), A, b, Sense::Minimize, opts);
  return r;
}

void to_matrix_form(const std::vector<Halfspace>& hs, Index dim, Mat& A, Vec& b) {
  A.resize(static_cast<Index>(hs.size()), dim);
  b.resize(static_cast<Index>(hs.size()));
  for (std::size_t i = 0; i < hs.size(); ++i) {
    require(hs[i].normal.size() == dim, ErrorCode::DimensionMismatch, "halfspace dimension mismatch");
    A.row(static_cast<Index>(i)) = hs[i].normal.transpose();
    b(static_cast<Index>(i)) = hs[i].offset;
  }
}

}  // namespace hocbf
