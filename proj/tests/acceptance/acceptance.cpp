// Acceptance checks. One line per criterion: "PASS <name>: <detail>" or "FAIL ...".
// Exit status is the number of failed criteria.

#include "commands.hpp"
#include "scenario_io.hpp"

#include "hocbf/construction.hpp"
#include "hocbf/filters.hpp"
#include "hocbf/geometry.hpp"
#include "hocbf/lp.hpp"
#include "hocbf/qp.hpp"
#include "hocbf/simulation.hpp"

#include "reference_qp.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace hocbf;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

std::string scenario_path(const std::string& name) { return std::string(HOCBF_SCENARIO_DIR) + "/" + name + ".json"; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vec rand_vec(std::mt19937_64& rng, Index n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vec v(n);
  for (Index k = 0; k < n; ++k) v(k) = d(rng);
  return v;
}

Mat rand_mat(std::mt19937_64& rng, Index r, Index c, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> d(lo, hi);
  Mat m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = d(rng);
  return m;
}

StackedSystem rows_from(const Mat& L, const Mat& D, const Vec& d0) {
  std::vector<BarrierRow> rows;
  for (Index i = 0; i < L.rows(); ++i) {
    BarrierRow r;
    r.ell = L.row(i).transpose();
    r.beta = AffineForm(D.row(i).transpose(), d0(i));
    r.source_index = static_cast<std::size_t>(i);
    rows.push_back(r);
  }
  return StackedSystem(std::move(rows));
}

// Direct LP on  -ell_i'u <= beta_i(x),  Q u <= b.
bool lp_feasible(const StackedSystem& st, const InputSet& U, const Vec& x) {
  const Mat Q = U.constraint_matrix();
  Mat A(static_cast<Index>(st.p()) + Q.rows(), st.m());
  Vec b(A.rows());
  Index k = 0;
  for (const auto& r : st.rows()) {
    A.row(k) = -r.ell.transpose();
    b(k++) = r.beta(x);
  }
  A.bottomRows(Q.rows()) = Q;
  b.tail(Q.rows()) = U.constraint_rhs();
  return lp_feasibility(A, b).status != LpStatus::Infeasible;
}

// ------------------------------------------------------------------------

Outcome reconstruction() {
  const auto t0 = std::chrono::steady_clock::now();
  const cli::ScenarioFile f = cli::load_scenario(scenario_path("double_integrator"));
  const Scenario& sc = f.scenario();
  const double ell[] = {1, 1, -2, -3, -2};
  const double beta[5][3] = {{1, 2, 1}, {2, 3, 2}, {0, -2, 5}, {1, -2, 6}, {-4, -6, 10}};
  double worst = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    const BarrierRow r = build_barrier_row(sc.system, sc.safeties[i], i);
    worst = std::max(worst, std::abs(r.ell(0) - ell[i]));
    worst = std::max(worst, std::abs(r.beta.c(0) - beta[i][0]));
    worst = std::max(worst, std::abs(r.beta.c(1) - beta[i][1]));
    worst = std::max(worst, std::abs(r.beta.c0 - beta[i][2]));
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-12 && t < 1.0, fmt("max coefficient error %.3g, %.3f s", worst, t)};
}

Outcome explicit_vs_qp() {
  std::string detail;
  bool pass = true;
  for (const char* name : {"double_integrator", "planar_double_integrator"}) {
    const fs::path out = fs::temp_directory_path() / (std::string("hocbf_accept_") + name);
    fs::remove_all(out);
    std::ostringstream err;
    const auto t0 = std::chrono::steady_clock::now();
    const int code = cli::run_simulate({{scenario_path(name), out.string()}, std::nullopt, true}, err);
    const double t = seconds_since(t0);
    if (code != cli::kExitOk) return {false, fmt("%s: simulate exited %d: %s", name, code, err.str().c_str())};
    std::ifstream in(out / "manifest.json");
    const auto m = cli::json::parse(in);
    const double dev = m["max_deviation"].get<double>();
    const std::string law = m["filter_law"].get<std::string>();
    std::size_t steps = 0;
    for (const auto& r : m["runs"]) steps += r["samples"].get<std::size_t>();
    pass = pass && law != "qp" && dev <= 1e-8 && t < 30.0;
    detail += fmt("%s%s [%s] %zu runs %zu steps max dev %.3g in %.2f s", detail.empty() ? "" : "; ", name, law.c_str(),
                  m["runs"].size(), steps, dev, t);
  }
  return {pass, detail};
}

Outcome forward_invariance() {
  std::string detail;
  bool pass = true;
  for (const char* name : {"double_integrator", "planar_double_integrator", "aircraft_roll_yaw"}) {
    const cli::ScenarioFile f = cli::load_scenario(scenario_path(name));
    const Scenario& sc = f.scenario();
    const ClosedLoop loop = prepare(sc);
    const auto& s = *f.samples;
    const auto x0s = sample_in_S(loop.chains, s.lo, s.hi, s.count, s.seed, [&](const Vec& x) {
      return !s.require_feasible || lp_feasible(loop.stack, sc.input_set, x);
    });
    const auto runs = simulate_batch(sc, x0s);
    double worst = kInf;
    std::size_t ok = 0;
    for (const auto& r : runs) {
      ok += r.ok;
      if (!r.log) continue;
      for (const Vec& x : r.log->states)
        for (const auto& h : sc.safeties) worst = std::min(worst, h.a.dot(x) - h.b);
    }
    pass = pass && x0s.size() >= 20 && ok == x0s.size() && worst >= -1e-6;
    detail += fmt("%s%s %zu/%zu runs, min h %.3g", detail.empty() ? "" : "; ", name, ok, x0s.size(), worst);
  }
  return {pass, detail};
}

Outcome domain_equivalence() {
  const cli::ScenarioFile f = cli::load_scenario(scenario_path("double_integrator"));
  const Scenario& sc = f.scenario();
  const ClosedLoop loop = prepare(sc);
  const auto fams = detect_parallel_families(loop.stack);
  if (fams.size() != 1) return {false, "expected a single parallel family"};
  const MergedInterval mi = merge_parallel(fams[0]);
  const Interval sup = support_interval(fams[0].v, sc.input_set);
  const Polytope P = project_feasible_set(loop.stack, sc.input_set);
  const int N = 200;
  std::size_t agree = 0, outside_band = 0, feasible = 0;
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      Vec x(2);
      x << -4.0 + 8.0 * (i + 0.5) / N, -4.0 + 8.0 * (j + 0.5) / N;
      const double slack = std::min(mi.upper(x), sup.hi) - std::max(mi.lower(x), sup.lo);
      const bool a = slack >= 0.0;
      const bool b = lp_feasible(loop.stack, sc.input_set, x);
      const bool c = P.contains(x, 0.0);
      feasible += a;
      if (a == b && b == c) ++agree;
      else if (std::abs(slack) > 1e-6) ++outside_band;
    }
  }
  const double frac = static_cast<double>(agree) / (N * N);
  return {frac >= 0.999 && outside_band == 0,
          fmt("%zu/%d cells agree (%.4f%%), %zu feasible, %zu disagreements away from the boundary, %zu FM halfspaces",
              agree, N * N, 100 * frac, feasible, outside_band, P.halfspaces.size())};
}

Outcome box_support() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dim(1, 6), coin(0, 5);
  double worst = 0.0;
  std::size_t infinite = 0, mismatched = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const Index m = dim(rng);
    Vec v = rand_vec(rng, m, -2, 2);
    if (trial % 7 == 0) v(0) = 0.0;
    if (v.norm() == 0.0) v(m - 1) = 1.0;
    Vec lo = rand_vec(rng, m, -3, 1), hi = lo + rand_vec(rng, m, 0, 4);
    for (Index k = 0; k < m; ++k) {
      if (coin(rng) == 0) lo(k) = -kInf;
      if (coin(rng) == 0) hi(k) = kInf;
    }
    const InputSet U = InputSet::box(lo, hi);
    const Interval s = support_interval(v, U);
    const Mat A = U.constraint_matrix();
    const Vec b = U.constraint_rhs();
    for (const Sense sense : {Sense::Maximize, Sense::Minimize}) {
      const LpResult r = lp_solve(v, A, b, sense);
      const double closed = sense == Sense::Maximize ? s.hi : s.lo;
      if (r.status == LpStatus::Unbounded) {
        ++infinite;
        if (!std::isinf(closed)) ++mismatched;
      } else if (r.status != LpStatus::Optimal || std::isinf(closed)) {
        ++mismatched;
      } else {
        worst = std::max(worst, std::abs(r.value - closed));
      }
    }
  }
  const double t = seconds_since(t0);
  return {mismatched == 0 && worst <= 1e-9 && t < 5.0,
          fmt("600 support values, %zu unbounded, %zu mismatches, max error %.3g, %.3f s", infinite, mismatched, worst,
              t)};
}

Outcome block_theorem() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> dim(2, 6);
  std::size_t checks = 0, mismatches = 0, infeasible = 0, rejected = 0;
  for (int sys = 0; sys < 100; ++sys) {
    const Index m = dim(rng), n = dim(rng);
    // split a random basis of R^m into blocks; each block's rows live in its own subspace
    const Mat basis = rand_mat(rng, m, m) + 2.0 * Mat::Identity(m, m);
    std::vector<Index> widths;
    for (Index left = m; left > 0;) {
      const Index w = std::min<Index>(left, 1 + static_cast<Index>(rng() % 2));
      widths.push_back(w);
      left -= w;
    }
    std::vector<Mat> Ls;
    BlockPartition part;
    Index col = 0;
    std::size_t row = 0;
    for (Index w : widths) {
      const Index rows = w + 1 + static_cast<Index>(rng() % 3);
      Ls.push_back(rand_mat(rng, rows, w) * basis.middleRows(col, w));
      Block blk;
      for (Index r = 0; r < rows; ++r) blk.rows.push_back(row++);
      part.blocks.push_back(blk);
      col += w;
    }
    Mat L(static_cast<Index>(row), m);
    Index at = 0;
    for (const Mat& Lb : Ls) {
      L.middleRows(at, Lb.rows()) = Lb;
      at += Lb.rows();
    }
    const StackedSystem st = rows_from(L, rand_mat(rng, L.rows(), n), rand_vec(rng, L.rows(), -0.5, 1.0));
    if (!verify_partition(st, part)) {
      ++rejected;
      continue;
    }
    const InputSet all = InputSet::all(m);
    for (int s = 0; s < 50; ++s) {
      const Vec x = rand_vec(rng, n, -1, 1);
      bool joint = true;
      for (const Block& b : part.blocks) joint = joint && feasible_at(st.subset(b.rows), all, x).feasible;
      const bool full = lp_feasible(st, all, x);
      ++checks;
      infeasible += !full;
      mismatches += joint != full;
    }
  }
  return {mismatches == 0 && rejected == 0 && checks == 5000,
          fmt("%zu states over 100 systems, %zu infeasible, %zu mismatches, %zu partitions rejected", checks,
              infeasible, mismatches, rejected)};
}

Outcome dependent_certificates() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> dim(1, 5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t certified = 0, unsound = 0, refused = 0, tried = 0;
  while (certified < 500 && tried < 100000) {
    ++tried;
    const Index m = 1 + dim(rng), k = std::min<Index>(m, dim(rng)), q = dim(rng);
    const Mat V = rand_mat(rng, k, m);
    if (numerical_rank(V) != k) continue;
    const Mat eta = rand_mat(rng, q, k);
    const Mat E = eta * V;
    std::vector<Interval> I(static_cast<std::size_t>(k)), J(static_cast<std::size_t>(q));
    for (auto& iv : I) {
      iv.lo = -unit(rng);
      iv.hi = iv.lo + unit(rng);
    }
    for (Index j = 0; j < q; ++j) {
      // the image of the independent box along dependent direction j, jittered either way
      double lo = 0, hi = 0;
      for (Index i = 0; i < k; ++i) {
        const double a = eta(j, i) * I[i].lo, b = eta(j, i) * I[i].hi;
        lo += std::min(a, b);
        hi += std::max(a, b);
      }
      J[j] = {lo - 0.3 * (unit(rng) - 0.2), hi + 0.3 * (unit(rng) - 0.2)};
    }
    const Mat eta_fit = expansion_coefficients(V, E);
    if (!dependent_certificate(V, I, eta_fit, E, J)) {
      ++refused;
      continue;
    }
    ++certified;
    Mat A(2 * (k + q), m);
    Vec b(A.rows());
    for (Index i = 0; i < k; ++i) {
      A.row(2 * i) = V.row(i);
      b(2 * i) = I[i].hi;
      A.row(2 * i + 1) = -V.row(i);
      b(2 * i + 1) = -I[i].lo;
    }
    for (Index j = 0; j < q; ++j) {
      A.row(2 * (k + j)) = E.row(j);
      b(2 * (k + j)) = J[j].hi;
      A.row(2 * (k + j) + 1) = -E.row(j);
      b(2 * (k + j) + 1) = -J[j].lo;
    }
    const LpResult r = lp_feasibility(A, b);
    const bool witness = r.status != LpStatus::Infeasible && ((A * r.x - b).array() <= 1e-9).all();
    unsound += !witness;
  }
  return {certified == 500 && unsound == 0,
          fmt("%zu certified instances, %zu unsound, %zu candidates refused", certified, unsound, refused)};
}

Outcome g_construction() {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> dim(1, 6);
  double worst = 0.0, min_eig = kInf;
  std::size_t count = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Index m = dim(rng), k = 1 + static_cast<Index>(rng() % static_cast<unsigned>(m));
    Mat S = rand_mat(rng, k, m);
    if (numerical_rank(S) != k) {
      --trial;
      continue;
    }
    for (const double tau : {0.1, 1.0, 10.0}) {
      const Mat G = construct_G(S, tau);
      const Mat GiSt = G.ldlt().solve(S.transpose());
      worst = std::max(worst, norm_inf(S * GiSt - Mat::Identity(k, k)));
      const Mat Gs = 0.5 * (G + G.transpose());
      min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Mat>(Gs).eigenvalues().minCoeff());
      ++count;
    }
  }
  return {worst <= 1e-10 && min_eig > 0.0,
          fmt("%zu weights, max |S G^-1 S' - I| %.3g, min eigenvalue %.3g", count, worst, min_eig)};
}

Outcome qp_oracle() {
  std::mt19937_64 rng(505);
  std::uniform_int_distribution<int> dim(1, 6), rows(1, 12);
  double kkt = 0.0, gap = 0.0;
  std::size_t active = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const Index m = dim(rng), q = rows(rng);
    const Mat R = rand_mat(rng, m, m);
    const Mat G = R * R.transpose() + 0.1 * Mat::Identity(m, m);
    const Vec u0 = rand_vec(rng, m, -1, 1);
    const Mat A = rand_mat(rng, q, m);
    const Vec b = A * u0 + rand_vec(rng, q, 0.0, 0.5);
    const QpProblem p{G, rand_vec(rng, m, -3, 3), A, b};
    const QpResult r = solve_qp(p);
    const Vec& mu = r.multipliers;
    const Vec slack = b - A * r.u;
    kkt = std::max({kkt, (G * (r.u - p.u_d) + A.transpose() * mu).cwiseAbs().maxCoeff(),
                    std::max(0.0, -slack.minCoeff()), std::max(0.0, -mu.minCoeff()),
                    mu.cwiseProduct(slack).cwiseAbs().maxCoeff()});
    const Vec ref = reference::dual_projected_gradient(p);
    gap = std::max(gap, std::abs(p.objective(r.u) - p.objective(ref)));
    active += !r.active.empty();
  }
  return {kkt <= 1e-8 && gap <= 1e-7,
          fmt("500 problems (%zu with active constraints), max KKT residual %.3g, max objective gap %.3g", active, kkt,
              gap)};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"hocbf-reconstruction", reconstruction},
      {"explicit-vs-qp-agreement", explicit_vs_qp},
      {"forward-invariance", forward_invariance},
      {"feasibility-domain-equivalence", domain_equivalence},
      {"box-support-closed-form", box_support},
      {"block-theorem", block_theorem},
      {"dependent-certificate-soundness", dependent_certificates},
      {"g-construction-identity", g_construction},
      {"qp-kkt-oracle", qp_oracle},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed;
}
