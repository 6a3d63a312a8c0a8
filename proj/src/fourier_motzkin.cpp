#include "hocbf/error.hpp"
#include "hocbf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace hocbf {

namespace {

struct Row {
  Vec a;  // over (x, remaining u)
  double b;
};

// Scales a row so that its largest coefficient magnitude is one.
bool normalize(Row& r, double tol) {
  const double s = r.a.size() ? r.a.cwiseAbs().maxCoeff() : 0.0;
  if (s <= tol) return false;
  r.a /= s;
  r.b /= s;
  return true;
}

Polytope empty_polytope(Index n) { return {n, {{Vec::Zero(n), -1.0}}}; }

// Keeps the tightest copy of rows whose normalized coefficients coincide.
std::vector<Row> dedupe(std::vector<Row> rows, double tol) {
  std::vector<Row> out;
  for (auto& r : rows) {
    bool merged = false;
    for (auto& o : out) {
      if ((o.a - r.a).cwiseAbs().maxCoeff() <= tol) {
        o.b = std::min(o.b, r.b);
        merged = true;
        break;
      }
    }
    if (!merged) out.push_back(std::move(r));
  }
  return out;
}

std::vector<Row> drop_redundant(std::vector<Row> rows, double tol) {
  std::vector<bool> keep(rows.size(), true);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<Halfspace> others;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (j != i && keep[j]) others.push_back({rows[j].a, rows[j].b});
    }
    const LpResult r = lp_solve(rows[i].a, others, Sense::Maximize);
    if (r.status == LpStatus::Optimal && r.value <= rows[i].b + tol * (1.0 + std::abs(rows[i].b))) keep[i] = false;
  }
  std::vector<Row> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (keep[i]) out.push_back(std::move(rows[i]));
  }
  return out;
}

bool system_feasible(const std::vector<Row>& rows, Index dim) {
  Mat A(static_cast<Index>(rows.size()), dim);
  Vec b(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    A.row(static_cast<Index>(i)) = rows[i].a.transpose();
    b(static_cast<Index>(i)) = rows[i].b;
  }
  return lp_feasibility(A, b).status != LpStatus::Infeasible;
}

}  // namespace

Polytope remove_redundant(const Polytope& P, double tol) {
  std::vector<Row> rows;
  for (const auto& h : P.halfspaces) {
    Row r{h.normal, h.offset};
    if (!normalize(r, tol)) {
      if (h.offset < -tol) return empty_polytope(P.dim);
      continue;
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) return Polytope::whole(P.dim);
  if (!system_feasible(rows, P.dim)) return empty_polytope(P.dim);
  rows = drop_redundant(dedupe(std::move(rows), tol), tol);
  Polytope out{P.dim, {}};
  for (auto& r : rows) out.halfspaces.push_back({std::move(r.a), r.b});
  return out;
}

Polytope project_feasible_set(const StackedSystem& sys, const InputSet& U, const ProjectionOptions& opts) {
  const Index m = U.m();
  const Index n = sys.n();
  require(sys.p() == 0 || sys.m() == m, ErrorCode::DimensionMismatch, "system and input set disagree on m");
  if (sys.p() == 0 && U.kind() == InputSet::Kind::All) return Polytope::whole(n);

  // Variables z = (x, u); row i of the barrier block: -beta_c' x - ell' u <= beta0.
  std::vector<Row> rows;
  for (const auto& r : sys.rows()) {
    Vec a(n + m);
    a << -r.beta.c, -r.ell;
    rows.push_back({a, r.beta.c0});
  }
  const Mat Q = U.constraint_matrix();
  const Vec qb = U.constraint_rhs();
  for (Index i = 0; i < Q.rows(); ++i) {
    Vec a = Vec::Zero(n + m);
    a.tail(m) = Q.row(i).transpose();
    rows.push_back({a, qb(i)});
  }

  Index dim = n + m;
  for (Index eliminated = 0; eliminated < m; ++eliminated) {
    // Pick the remaining u variable (stored last) with the fewest generated pairs.
    const Index nu = dim - n;
    Index best = -1;
    std::size_t best_count = 0;
    for (Index k = 0; k < nu; ++k) {
      std::size_t pos = 0, neg = 0, zero = 0;
      for (const auto& r : rows) {
        const double c = r.a(n + k);
        if (c > opts.tol) ++pos;
        else if (c < -opts.tol) ++neg;
        else ++zero;
      }
      const std::size_t count = pos * neg + zero;
      if (best < 0 || count < best_count) {
        best = k;
        best_count = count;
      }
    }
    if (best_count > opts.max_rows) {
      fail(ErrorCode::CombinatorialBlowup,
           "Fourier-Motzkin step would create " + std::to_string(best_count) + " rows (cap " +
               std::to_string(opts.max_rows) + ")");
    }

    const Index col = n + best;
    std::vector<Row> pos, neg, next;
    for (auto& r : rows) {
      const double c = r.a(col);
      if (c > opts.tol) pos.push_back(r);
      else if (c < -opts.tol) neg.push_back(r);
      else next.push_back(r);
    }
    for (const auto& rp : pos) {
      for (const auto& rn : neg) {
        const double cp = rp.a(col);
        const double cn = -rn.a(col);
        next.push_back({cn * rp.a + cp * rn.a, cn * rp.b + cp * rn.b});
      }
    }

    // Drop the eliminated column.
    std::vector<Row> reduced;
    reduced.reserve(next.size());
    for (auto& r : next) {
      Vec a(dim - 1);
      a << r.a.head(col), r.a.tail(dim - col - 1);
      Row out{a, r.b};
      if (!normalize(out, opts.tol)) {
        if (r.b < -opts.tol) return empty_polytope(n);
        continue;
      }
      reduced.push_back(std::move(out));
    }
    --dim;
    rows = dedupe(std::move(reduced), opts.tol);
    if (!rows.empty()) {
      if (!system_feasible(rows, dim)) return empty_polytope(n);
      rows = drop_redundant(std::move(rows), opts.tol);
    }
  }

  Polytope out{n, {}};
  for (auto& r : rows) out.halfspaces.push_back({std::move(r.a), r.b});
  return out;
}

}  // namespace hocbf
