#include "fixtures.hpp"

#include "hocbf/construction.hpp"
#include "hocbf/error.hpp"

#include "doctest.h"

#include <random>

using namespace hocbf;
using fixtures::vec;

namespace {

// psi_r evaluated at (x, u) by pushing linear functionals through the dynamics:
// psi_0 = a'x - b; d/dt (c'x + c0) = c'(Ax + Bu) while c'B = 0.
double psi_top(const LtiSystem& sys, const AffineSafety& s, const Vec& x, const Vec& u) {
  Vec c = s.a;
  double c0 = -s.b;
  const std::size_t r = s.alphas.size();
  for (std::size_t k = 0; k + 1 < r; ++k) {
    const Vec dc = sys.A().transpose() * c;
    c = dc + s.alphas[k] * c;
    c0 = s.alphas[k] * c0;
  }
  // last level picks up the input
  return c.dot(sys.A() * x + sys.B() * u) + s.alphas[r - 1] * (c.dot(x) + c0);
}

}  // namespace

TEST_CASE("double integrator rows match the worked example") {
  const auto st = fixtures::double_integrator_stack();
  const Vec ell = vec({1, 1, -2, -3, -2});
  const Mat beta_c = (Mat(5, 2) << 1, 2, 2, 3, 0, -2, 1, -2, -4, -6).finished();
  const Vec beta_0 = vec({1, 2, 5, 6, 10});
  const int rd[] = {1, 2, 1, 1, 2};
  REQUIRE(st.p() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& r = st.rows()[i];
    const auto k = static_cast<Index>(i);
    CHECK(r.rel_degree == rd[i]);
    CHECK(std::abs(r.ell(0) - ell(k)) <= 1e-12);
    CHECK((r.beta.c - beta_c.row(k).transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(std::abs(r.beta.c0 - beta_0(k)) <= 1e-12);
  }
}

TEST_CASE("barrier rows agree with the psi recursion on random systems") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 2 + trial % 4;
    const Index m = 1 + trial % 2;
    const LtiSystem sys(fixtures::random_mat(rng, n, n), fixtures::random_mat(rng, n, m));
    AffineSafety s{fixtures::random_vec(rng, n), 0.3, {}};
    const int r = relative_degree(sys, s.a);
    for (int k = 0; k < r; ++k) s.alphas.push_back(0.5 + k);
    const auto row = build_barrier_row(sys, s);
    for (int j = 0; j < 5; ++j) {
      const Vec x = fixtures::random_vec(rng, n);
      const Vec u = fixtures::random_vec(rng, m);
      CHECK(row.margin(x, u) == doctest::Approx(psi_top(sys, s, x, u)).epsilon(1e-10));
    }
    const PsiChain chain = psi_chain(sys, s);
    CHECK(chain.levels.size() == static_cast<std::size_t>(r));
  }
}

TEST_CASE("relative degree and gain checks") {
  const auto sys = fixtures::double_integrator();
  CHECK(relative_degree(sys, vec({1, 0})) == 2);
  CHECK(relative_degree(sys, vec({0, 1})) == 1);
  CHECK_THROWS_AS(relative_degree(sys, vec({0, 0})), Error);
  AffineSafety s{vec({1, 0}), 0.0, {1.0}};
  try {
    (void)build_barrier_row(sys, s);
    FAIL("expected a gain length error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GainLengthMismatch);
  }
  s.alphas = {1.0, -2.0};
  CHECK_THROWS_AS(build_barrier_row(sys, s), Error);
}

TEST_CASE("characteristic matrix is the product of shifted factors") {
  const Mat A = (Mat(2, 2) << 0, 1, -2, -3).finished();
  const std::vector<double> al{1.0, 2.0};
  const Mat I = Mat::Identity(2, 2);
  CHECK((characteristic_matrix(A, al) - (A + I) * (A + 2 * I)).norm() <= 1e-14);
}

TEST_CASE("invariant set membership uses every level") {
  const auto sys = fixtures::double_integrator();
  const AffineSafety s{vec({-1, 0}), -1, {1.0, 2.0}};  // x1 <= 1
  const PsiChain c = psi_chain(sys, s);
  const std::vector<PsiChain> chains{c};
  CHECK(in_invariant_set(chains, vec({0, 0})));
  CHECK_FALSE(in_invariant_set(chains, vec({0.9, 1.0})));  // psi_1 = -x2 + (1 - x1) < 0
  CHECK_FALSE(in_invariant_set(chains, vec({1.1, -5.0})));
}

TEST_CASE("uniform gains fill by relative degree") {
  const auto sys = fixtures::double_integrator();
  const std::vector<std::vector<double>> g{{3.0}, {1.0, 2.0}};
  CHECK(with_uniform_gains(sys, {vec({1, 0}), 0.0, {}}, g).alphas == std::vector<double>{1.0, 2.0});
  CHECK(with_uniform_gains(sys, {vec({0, 1}), 0.0, {}}, g).alphas == std::vector<double>{3.0});
}
