#pragma once

#include "hocbf/construction.hpp"
#include "hocbf/geometry.hpp"

#include <random>
#include <vector>

namespace fixtures {

using hocbf::Mat;
using hocbf::Vec;

inline Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out(k++) = x;
  return out;
}

inline hocbf::LtiSystem double_integrator() {
  Mat A(2, 2), B(2, 1);
  A << 0, 1, 0, 0;
  B << 0, 1;
  return {A, B};
}

// Five constraints on the scalar double integrator, gains 1 and (1, 2).
inline std::vector<hocbf::AffineSafety> double_integrator_safeties() {
  return {
      {vec({1, 1}), -1, {1.0}},
      {vec({1, 0}), -1, {1.0, 2.0}},
      {vec({0, -2}), -5, {1.0}},
      {vec({1, -3}), -6, {1.0}},
      {vec({-2, 0}), -5, {1.0, 2.0}},
  };
}

inline hocbf::StackedSystem double_integrator_stack() {
  const auto sys = double_integrator();
  std::vector<hocbf::BarrierRow> rows;
  const auto s = double_integrator_safeties();
  for (std::size_t i = 0; i < s.size(); ++i) rows.push_back(hocbf::build_barrier_row(sys, s[i], i));
  return hocbf::stack(std::move(rows));
}

inline Vec random_vec(std::mt19937_64& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vec v(n);
  for (Eigen::Index k = 0; k < n; ++k) v(k) = d(rng);
  return v;
}

inline Mat random_mat(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = d(rng);
  return m;
}

}  // namespace fixtures

#include "hocbf/simulation.hpp"

namespace fixtures {

inline hocbf::Scenario double_integrator_scenario() {
  hocbf::AffineFeedback K{(Mat(1, 2) << 3.1622776601683835, 4.040365740912177).finished(), vec({1, 0})};
  return {"double-integrator",
          double_integrator(),
          double_integrator_safeties(),
          hocbf::InputSet::box(vec({-2}), vec({2})),
          K,
          hocbf::FilterPolicy::Auto,
          Mat::Identity(1, 1),
          0.005,
          10.0,
          {}};
}

inline hocbf::Scenario planar_scenario() {
  Mat A = Mat::Zero(4, 4), B = Mat::Zero(4, 2);
  A(0, 2) = A(1, 3) = 1;
  B(2, 0) = B(3, 1) = 1;
  std::vector<hocbf::AffineSafety> s;
  for (int i = 0; i < 2; ++i) {
    Vec e = Vec::Zero(4), f = Vec::Zero(4);
    e(i) = 1;
    f(i + 2) = 1;
    s.push_back({-e, -1.0, {1.0, 2.0}});
    s.push_back({e, -1.0, {1.0, 2.0}});
    s.push_back({-f, -0.7, {1.2}});
    s.push_back({f, -0.7, {1.2}});
  }
  hocbf::WaypointPD pd{5 * Mat::Identity(2, 2), 1.5 * Mat::Identity(2, 2),
                       {{0.0, vec({0.9, 0.9})}, {7.5, vec({-0.9, 0.9})}, {15.0, vec({-0.9, -0.9})}, {22.5, vec({0.9, -0.9})}},
                       {0, 1},
                       {2, 3}};
  return {"planar",          hocbf::LtiSystem(A, B), s, hocbf::InputSet::box(vec({-0.72, -0.72}), vec({0.72, 0.72})),
          pd,                hocbf::FilterPolicy::Auto, Mat::Identity(2, 2), 0.005, 30.0, {}};
}

}  // namespace fixtures
