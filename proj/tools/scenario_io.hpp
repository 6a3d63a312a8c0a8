#pragma once

// Scenario files: JSON documents describing a plant, safety rows, input set,
// controller, filter and run settings. Parsing is strict (unknown keys and
// non-finite numbers are rejected) and serialization is canonical, so
// parse -> serialize -> parse is the identity on the resolved scenario.

#include "hocbf/simulation.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace hocbf::cli {

using json = nlohmann::ordered_json;

/// Schema or semantic error in a scenario file (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExplicitSystem {
  Mat A, B;
};

/// Integrator-augmented plant with held command states and virtual input.
struct AugmentedSystem {
  Mat Ap, Bp, Cp, Dp;
};

struct WeightSpec {
  enum class Kind { Identity, Matrix, Construct } kind = Kind::Identity;
  Mat G;    // Matrix
  Mat S;    // Construct
  double tau = 1.0;
};

struct SampleSpec {
  std::size_t count = 0;
  std::uint64_t seed = 0;
  Vec lo, hi;
  bool require_feasible = false;
};

struct RegionSpec {
  std::vector<Index> coords;
  Vec lo, hi;
  int points_per_axis = 5;
  Vec base;
};

struct RasterSpec {
  double window[4] = {-1, 1, -1, 1};
  int resolution = 100;
  std::vector<Index> free;  // coordinates eligible as grid axes
  Vec base;
};

struct ScenarioFile {
  std::string name;
  std::map<std::string, std::string> provenance;
  std::variant<ExplicitSystem, AugmentedSystem> system_spec;
  std::vector<std::vector<double>> gains_by_degree;
  std::vector<AffineSafety> safeties;  // as written (alphas may be empty)
  FilterPolicy policy = FilterPolicy::Auto;
  WeightSpec weight;
  double dt = 0.005;
  double horizon = 10.0;
  std::vector<Vec> initial_states;
  std::optional<SampleSpec> samples;
  std::optional<RegionSpec> verification;
  RasterSpec raster;

  /// Fully resolved, validated scenario (always set after parsing).
  std::optional<Scenario> resolved;

  [[nodiscard]] const Scenario& scenario() const { return *resolved; }
};

ScenarioFile parse_scenario(const json& doc);
ScenarioFile load_scenario(const std::string& path);
json to_json(const ScenarioFile& f);

}  // namespace hocbf::cli
