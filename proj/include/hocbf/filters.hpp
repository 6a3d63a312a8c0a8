#pragma once

// Safety filters: minimum G-norm modification of a nominal input subject to
// M u <= d(x), u in U. Closed forms exist when the rows collapse to intervals
// on a few directions; everything else goes through the dense QP.

#include "hocbf/construction.hpp"
#include "hocbf/geometry.hpp"
#include "hocbf/qp.hpp"
#include "hocbf/types.hpp"

#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace hocbf {

/// min{max{z, lo}, hi}; throws InvertedInterval when lo > hi.
double saturate(double z, double lo, double hi);
Vec saturate(const Vec& z, const Vec& lo, const Vec& hi);

/// u_d + ((eps* - eps_d) / v'G^{-1}v) G^{-1} v with eps* the saturation of v'u_d.
Vec parallel_filter(const Vec& x, const Vec& u_d, const Vec& v, const Mat& G, const PwaBound& lower,
                    const PwaBound& upper, double tol = kTolMem);

/// u_d + G^{-1} S'(eps* - S u_d), requiring S G^{-1} S' = I.
Vec block_filter(const Vec& x, const Vec& u_d, const Mat& S, const Mat& G, std::span<const PwaBound> lower,
                 std::span<const PwaBound> upper, double tol = kTolMem);

/// SPD G with S G^{-1} S' = I; square S gives S'S.
Mat construct_G(const Mat& S, double tau = 1.0);

struct ParallelSaturation {
  Vec v;
  Mat G;
  PwaBound lower;
  PwaBound upper;
};

struct BlockSaturation {
  Mat S;
  Mat G;
  std::vector<PwaBound> lower;
  std::vector<PwaBound> upper;
};

struct QpFallback {
  StackedSystem sys;
  InputSet U;
  Mat G;
};

using FilterLaw = std::variant<ParallelSaturation, BlockSaturation, QpFallback>;

enum class FilterPolicy { Auto, ForceQp, ForceExplicit };

std::string_view to_string(FilterPolicy p);
std::string_view law_name(const FilterLaw& law);

/// Picks a closed form when the structure allows it. ForceExplicit throws GMismatch
/// (or InvalidArgument) when no closed form applies.
FilterLaw synthesize_filter(const StackedSystem& sys, const InputSet& U, const Mat& G,
                            FilterPolicy policy = FilterPolicy::Auto);

/// The filter QP at state x: rows [M; Q] u <= [d(x); b].
QpProblem build_qp(const StackedSystem& sys, const InputSet& U, const Mat& G, const Vec& x, const Vec& u_d);

/// Evaluates the law. `warm` carries the QP working set across calls and may be null.
Vec apply_filter(const FilterLaw& law, const Vec& x, const Vec& u_d, std::vector<int>* warm = nullptr);

}  // namespace hocbf
