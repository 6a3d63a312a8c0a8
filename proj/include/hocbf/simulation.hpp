#pragma once

// Closed-loop simulation of x' = A x + B u with a nominal controller and a
// safety filter, plus the set sampling and rasterization used for region data.

#include "hocbf/construction.hpp"
#include "hocbf/error.hpp"
#include "hocbf/filters.hpp"
#include "hocbf/geometry.hpp"
#include "hocbf/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace hocbf {

/// u_d = -K (x - x_ref).
struct AffineFeedback {
  Mat K;
  Vec x_ref;
};

struct Waypoint {
  double time = 0.0;
  Vec target;
};

/// u_d = K_P (p_d(t) - x[pos]) - K_D x[vel], p_d piecewise constant.
struct WaypointPD {
  Mat K_P;
  Mat K_D;
  std::vector<Waypoint> waypoints;
  std::vector<Index> position;
  std::vector<Index> velocity;
};

using NominalController = std::variant<AffineFeedback, WaypointPD>;

Vec nominal_input(const NominalController& c, double t, const Vec& x);
void validate_controller(const NominalController& c, Index n, Index m);

/// Piecewise-constant exogenous states: from `times[k]` on, x[indices] = values[k].
struct CommandSchedule {
  std::vector<Index> indices;
  std::vector<double> times;
  std::vector<Vec> values;

  [[nodiscard]] bool empty() const { return times.empty(); }
  /// Value in force at t, or nullopt before the first switch.
  [[nodiscard]] std::optional<Vec> at(double t) const;
};

struct Scenario {
  std::string name;
  LtiSystem system;
  std::vector<AffineSafety> safeties;
  InputSet input_set;
  NominalController controller;
  FilterPolicy policy = FilterPolicy::Auto;
  Mat G;
  double dt = 0.005;
  double horizon = 10.0;
  CommandSchedule commands;
};

/// Everything derived once from a scenario.
struct ClosedLoop {
  StackedSystem stack;
  std::vector<PsiChain> chains;
  FilterLaw law;
  FilterLaw qp;
};

ClosedLoop prepare(const Scenario& sc);

struct TrajectoryLog {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> nominal;
  std::vector<Vec> filtered;
  std::vector<Vec> h;    // one entry per safety
  std::vector<Vec> psi;  // all chain levels, safety by safety
  std::vector<std::uint8_t> feasible;
  std::vector<double> deviation;  // |u_exp - u_qp|_inf, compare mode only

  [[nodiscard]] std::size_t size() const { return times.size(); }
  [[nodiscard]] double min_h() const;
  [[nodiscard]] double min_psi() const;
  [[nodiscard]] double max_deviation() const;
};

/// Raised when the filter has no admissible input; carries the partial log.
class InfeasibleAtState : public Error {
 public:
  InfeasibleAtState(double t, Vec x, Vec certificate, TrajectoryLog log);

  [[nodiscard]] double time() const { return t_; }
  [[nodiscard]] const Vec& state() const { return x_; }
  [[nodiscard]] const Vec& certificate() const { return lambda_; }
  [[nodiscard]] const TrajectoryLog& log() const { return log_; }

 private:
  double t_;
  Vec x_;
  Vec lambda_;
  TrajectoryLog log_;
};

using Dynamics = std::function<Vec(const Vec& x, const Vec& u)>;

/// Classical RK4 with u held over the step. Throws NonFiniteState.
Vec rk4_step(const Dynamics& f, const Vec& x, const Vec& u, double dt);

struct SimulationOptions {
  bool compare_qp = false;
  /// Require x0 in the invariant set.
  bool check_start = true;
};

TrajectoryLog simulate(const Scenario& sc, const ClosedLoop& loop, const Vec& x0, const SimulationOptions& opts = {});
TrajectoryLog simulate(const Scenario& sc, const Vec& x0, const SimulationOptions& opts = {});

struct BatchOutcome {
  /// Full log on success, the partial log on InfeasibleAtState, empty otherwise.
  std::optional<TrajectoryLog> log;
  bool ok = false;
  std::string error;
  ErrorCode code = ErrorCode::InvalidArgument;
  std::optional<double> failure_time;
  Vec failure_state;
  Vec certificate;
};

/// One run per initial state, in parallel across states; each run stays single-threaded.
std::vector<BatchOutcome> simulate_batch(const Scenario& sc, const std::vector<Vec>& x0s,
                                         const SimulationOptions& opts = {});
std::vector<BatchOutcome> simulate_batch_serial(const Scenario& sc, const std::vector<Vec>& x0s,
                                                const SimulationOptions& opts = {});

/// Per-axis interval bounds for a double-integrator axis with position limits
/// (HOCBF gains alpha1, alpha2) and velocity limits (gain gamma).
struct AxisLimits {
  double x_min, x_max, v_min, v_max;
};

std::vector<MergedInterval> build_planar_bounds(double alpha1, double alpha2, double gamma,
                                                const std::vector<AxisLimits>& axes);

/// [e_yI; x_p] integrator augmentation with v as a virtual integrator input.
struct AugmentedPlant {
  LtiSystem plant;  // input u only
  Mat E;            // multiplies (y_cmd - v)
  Index outputs;

  /// State [e_yI; x_p; y_cmd] with y_cmd held constant and input (u, v).
  [[nodiscard]] LtiSystem with_held_command() const;
};

AugmentedPlant augment_with_integrator(const Mat& Ap, const Mat& Bp, const Mat& Cp, const Mat& Dp);

/// Rejection sampling inside the invariant set intersected with a box window.
std::vector<Vec> sample_in_S(std::span<const PsiChain> chains, const Vec& lo, const Vec& hi, std::size_t count,
                             std::uint64_t seed, const std::function<bool(const Vec&)>& extra = {},
                             std::size_t max_attempts = 1000000);

struct Window {
  double x_lo, x_hi, y_lo, y_hi;
};

/// Grid over two coordinates of a state whose other entries come from `base`.
struct Slice {
  Index ix = 0;
  Index iy = 1;
  Vec base;
};

struct Raster {
  int nx = 0, ny = 0;
  std::vector<double> xs, ys;
  std::vector<std::uint8_t> cells;  // row-major, row j is ys[j]

  [[nodiscard]] bool at(int i, int j) const { return cells[static_cast<std::size_t>(j) * nx + i] != 0; }
  [[nodiscard]] std::size_t count() const;
};

using Membership = std::function<bool(const Vec&)>;

Raster rasterize_set(const Membership& pred, const Window& w, int nx, int ny, const Slice& slice);
Raster rasterize_set_serial(const Membership& pred, const Window& w, int nx, int ny, const Slice& slice);

}  // namespace hocbf
