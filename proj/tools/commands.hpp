#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hocbf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitInfeasible = 4;

inline constexpr const char* kVersion = "0.1.0";

struct CommonArgs {
  std::string scenario;
  std::string out = "hocbf_out";
};

struct SimulateArgs : CommonArgs {
  std::optional<std::uint64_t> seed;
  bool compare_qp = false;
};

struct RasterArgs : CommonArgs {
  std::optional<std::array<double, 4>> window;
  std::optional<int> resolution;
  std::vector<std::pair<long, double>> slice;
};

int run_analyze(const CommonArgs& args, std::ostream& err);
int run_simulate(const SimulateArgs& args, std::ostream& err);
int run_raster(const RasterArgs& args, std::ostream& err);

/// "a,b,c,d"; throws std::invalid_argument.
std::array<double, 4> parse_window(const std::string& s);
/// "k=v,k=v"; throws std::invalid_argument.
std::vector<std::pair<long, double>> parse_slice(const std::string& s);

}  // namespace hocbf::cli
