#include "hocbf/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace hocbf {

// ---------------------------------------------------------------- controllers

Vec nominal_input(const NominalController& c, double t, const Vec& x) {
  if (const auto* fb = std::get_if<AffineFeedback>(&c)) return -fb->K * (x - fb->x_ref);
  const auto& pd = std::get<WaypointPD>(c);
  const Index k = static_cast<Index>(pd.position.size());
  const Waypoint* active = &pd.waypoints.front();
  for (const auto& w : pd.waypoints) {
    if (w.time <= t) active = &w;
  }
  Vec pos(k), vel(k);
  for (Index i = 0; i < k; ++i) {
    pos(i) = x(pd.position[static_cast<std::size_t>(i)]);
    vel(i) = x(pd.velocity[static_cast<std::size_t>(i)]);
  }
  return pd.K_P * (active->target - pos) - pd.K_D * vel;
}

void validate_controller(const NominalController& c, Index n, Index m) {
  if (const auto* fb = std::get_if<AffineFeedback>(&c)) {
    require(fb->K.rows() == m && fb->K.cols() == n && fb->x_ref.size() == n, ErrorCode::DimensionMismatch,
            "feedback gain must be m x n and x_ref of length n");
    require(fb->K.allFinite() && fb->x_ref.allFinite(), ErrorCode::InvalidArgument, "feedback data must be finite");
    return;
  }
  const auto& pd = std::get<WaypointPD>(c);
  const Index k = static_cast<Index>(pd.position.size());
  require(k == m && static_cast<Index>(pd.velocity.size()) == m, ErrorCode::DimensionMismatch,
          "one position and one velocity index per input");
  for (Index i : pd.position) require(i >= 0 && i < n, ErrorCode::DimensionMismatch, "position index out of range");
  for (Index i : pd.velocity) require(i >= 0 && i < n, ErrorCode::DimensionMismatch, "velocity index out of range");
  require(pd.K_P.rows() == m && pd.K_P.cols() == m && pd.K_D.rows() == m && pd.K_D.cols() == m,
          ErrorCode::DimensionMismatch, "PD gains must be m x m");
  require(!pd.waypoints.empty(), ErrorCode::InvalidArgument, "at least one waypoint is required");
  for (std::size_t i = 0; i < pd.waypoints.size(); ++i) {
    require(pd.waypoints[i].target.size() == m, ErrorCode::DimensionMismatch, "waypoint target has wrong length");
    if (i > 0) {
      require(pd.waypoints[i].time > pd.waypoints[i - 1].time, ErrorCode::InvalidArgument,
              "waypoint times must be strictly increasing");
    }
  }
}

std::optional<Vec> CommandSchedule::at(double t) const {
  std::optional<Vec> out;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] <= t + 1e-12) out = values[k];
  }
  return out;
}

// ---------------------------------------------------------------- closed loop

ClosedLoop prepare(const Scenario& sc) {
  require(sc.dt > 0.0 && std::isfinite(sc.dt), ErrorCode::InvalidArgument, "dt must be positive");
  require(sc.horizon >= 0.0 && std::isfinite(sc.horizon), ErrorCode::InvalidArgument, "horizon must be nonnegative");
  require(sc.input_set.m() == sc.system.m(), ErrorCode::DimensionMismatch, "input set and system disagree on m");
  validate_controller(sc.controller, sc.system.n(), sc.system.m());
  for (Index i : sc.commands.indices) {
    require(i >= 0 && i < sc.system.n(), ErrorCode::DimensionMismatch, "command index out of range");
  }
  for (const auto& v : sc.commands.values) {
    require(v.size() == static_cast<Index>(sc.commands.indices.size()), ErrorCode::DimensionMismatch,
            "command value has wrong length");
  }
  std::vector<BarrierRow> rows;
  std::vector<PsiChain> chains;
  for (std::size_t i = 0; i < sc.safeties.size(); ++i) {
    rows.push_back(build_barrier_row(sc.system, sc.safeties[i], i));
    chains.push_back(psi_chain(sc.system, sc.safeties[i]));
  }
  StackedSystem st = rows.empty() ? StackedSystem::empty(sc.system.n(), sc.system.m()) : stack(std::move(rows));
  FilterLaw law = synthesize_filter(st, sc.input_set, sc.G, sc.policy);
  FilterLaw qp = synthesize_filter(st, sc.input_set, sc.G, FilterPolicy::ForceQp);
  ClosedLoop out{std::move(st), std::move(chains), std::move(law), std::move(qp)};
  return out;
}

double TrajectoryLog::min_h() const {
  double v = kInf;
  for (const auto& e : h) {
    if (e.size()) v = std::min(v, e.minCoeff());
  }
  return v;
}

double TrajectoryLog::min_psi() const {
  double v = kInf;
  for (const auto& e : psi) {
    if (e.size()) v = std::min(v, e.minCoeff());
  }
  return v;
}

double TrajectoryLog::max_deviation() const {
  double v = 0.0;
  for (double d : deviation) v = std::max(v, d);
  return v;
}

InfeasibleAtState::InfeasibleAtState(double t, Vec x, Vec certificate, TrajectoryLog log)
    : Error(ErrorCode::InfeasibleAtState, "no admissible input at t = " + std::to_string(t)),
      t_(t),
      x_(std::move(x)),
      lambda_(std::move(certificate)),
      log_(std::move(log)) {}

Vec rk4_step(const Dynamics& f, const Vec& x, const Vec& u, double dt) {
  require(dt > 0.0, ErrorCode::InvalidArgument, "step size must be positive");
  const Vec k1 = f(x, u);
  const Vec k2 = f(x + 0.5 * dt * k1, u);
  const Vec k3 = f(x + 0.5 * dt * k2, u);
  const Vec k4 = f(x + dt * k3, u);
  Vec out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  require(out.allFinite(), ErrorCode::NonFiniteState, "state became non-finite");
  return out;
}

namespace {

bool is_infeasibility(ErrorCode c) { return c == ErrorCode::InfeasibleState || c == ErrorCode::Infeasible; }

void record(TrajectoryLog& log, const Scenario& sc, const ClosedLoop& loop, double t, const Vec& x, const Vec& ud,
            const Vec& u, bool feasible) {
  log.times.push_back(t);
  log.states.push_back(x);
  log.nominal.push_back(ud);
  log.filtered.push_back(u);
  Vec h(static_cast<Index>(sc.safeties.size()));
  for (std::size_t i = 0; i < sc.safeties.size(); ++i) h(static_cast<Index>(i)) = sc.safeties[i].h()(x);
  log.h.push_back(std::move(h));
  std::vector<double> levels;
  for (const auto& c : loop.chains) {
    for (const auto& f : c.levels) levels.push_back(f(x));
  }
  log.psi.push_back(Eigen::Map<Vec>(levels.data(), static_cast<Index>(levels.size())));
  log.feasible.push_back(feasible ? 1 : 0);
}

}  // namespace

TrajectoryLog simulate(const Scenario& sc, const ClosedLoop& loop, const Vec& x0, const SimulationOptions& opts) {
  require(x0.size() == sc.system.n(), ErrorCode::DimensionMismatch, "initial state has wrong dimension");
  require(x0.allFinite(), ErrorCode::NonFiniteState, "initial state must be finite");
  const double steps_real = sc.horizon / sc.dt;
  const long steps = std::lround(steps_real);
  require(std::abs(steps_real - static_cast<double>(steps)) <= 1e-6, ErrorCode::InvalidArgument,
          "horizon must be an integer multiple of dt");

  const Dynamics f = [&](const Vec& x, const Vec& u) { return sc.system.derivative(x, u); };
  TrajectoryLog log;
  Vec x = x0;
  std::vector<int> warm, warm_qp;
  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * sc.dt;
    if (auto cmd = sc.commands.at(t)) {
      for (std::size_t j = 0; j < sc.commands.indices.size(); ++j) x(sc.commands.indices[j]) = (*cmd)(static_cast<Index>(j));
    }
    if (k == 0 && opts.check_start) {
      require(in_invariant_set(loop.chains, x, 1e-12), ErrorCode::InvalidArgument,
              "initial state lies outside the invariant set");
    }
    const Vec ud = nominal_input(sc.controller, t, x);
    Vec u;
    try {
      u = apply_filter(loop.law, x, ud, &warm);
    } catch (const Error& e) {
      if (!is_infeasibility(e.code())) throw;
      record(log, sc, loop, t, x, ud, ud, false);
      const auto rep = feasible_at(loop.stack, sc.input_set, x);
      throw InfeasibleAtState(t, x, rep.certificate.value_or(Vec()), std::move(log));
    }
    if (opts.compare_qp) {
      const Vec uq = apply_filter(loop.qp, x, ud, &warm_qp);
      log.deviation.push_back((u - uq).cwiseAbs().maxCoeff());
    }
    record(log, sc, loop, t, x, ud, u, true);
    if (k == steps) break;
    x = rk4_step(f, x, u, sc.dt);
  }
  return log;
}

TrajectoryLog simulate(const Scenario& sc, const Vec& x0, const SimulationOptions& opts) {
  return simulate(sc, prepare(sc), x0, opts);
}

namespace {

BatchOutcome run_one(const Scenario& sc, const ClosedLoop& loop, const Vec& x0, const SimulationOptions& opts) {
  BatchOutcome out;
  try {
    out.log = simulate(sc, loop, x0, opts);
    out.ok = true;
  } catch (const InfeasibleAtState& e) {
    out.log = e.log();
    out.error = e.what();
    out.code = e.code();
    out.failure_time = e.time();
    out.failure_state = e.state();
    out.certificate = e.certificate();
  } catch (const Error& e) {
    out.error = e.what();
    out.code = e.code();
  }
  return out;
}

}  // namespace

std::vector<BatchOutcome> simulate_batch(const Scenario& sc, const std::vector<Vec>& x0s,
                                         const SimulationOptions& opts) {
  const ClosedLoop loop = prepare(sc);
  std::vector<BatchOutcome> out(x0s.size());
  const long n = static_cast<long>(x0s.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = run_one(sc, loop, x0s[static_cast<std::size_t>(i)], opts);
  return out;
}

std::vector<BatchOutcome> simulate_batch_serial(const Scenario& sc, const std::vector<Vec>& x0s,
                                                const SimulationOptions& opts) {
  const ClosedLoop loop = prepare(sc);
  std::vector<BatchOutcome> out;
  out.reserve(x0s.size());
  for (const auto& x0 : x0s) out.push_back(run_one(sc, loop, x0, opts));
  return out;
}

// ---------------------------------------------------------------- planar bounds

std::vector<MergedInterval> build_planar_bounds(double alpha1, double alpha2, double gamma,
                                                const std::vector<AxisLimits>& axes) {
  require(alpha1 > 0 && alpha2 > 0 && gamma > 0, ErrorCode::InvalidArgument, "gains must be positive");
  const Index k = static_cast<Index>(axes.size());
  const Index n = 2 * k;
  const double a = alpha1 + alpha2;
  const double b = alpha1 * alpha2;
  std::vector<MergedInterval> out;
  for (Index i = 0; i < k; ++i) {
    const AxisLimits& L = axes[static_cast<std::size_t>(i)];
    require(L.x_min < L.x_max && L.v_min < L.v_max, ErrorCode::InvalidArgument, "limits must be ordered");
    const Index p = i, v = i + k;
    MergedInterval mi{{{}, PwaBound::Kind::Max}, {{}, PwaBound::Kind::Min}};
    Vec c = Vec::Zero(n);
    // -a x_v - b (x_p - x_min)
    c(v) = -a;
    c(p) = -b;
    mi.lower.pieces.emplace_back(c, b * L.x_min);
    // -gamma (x_v - v_min)
    c.setZero();
    c(v) = -gamma;
    mi.lower.pieces.emplace_back(c, gamma * L.v_min);
    // -a x_v + b (x_max - x_p)
    c.setZero();
    c(v) = -a;
    c(p) = -b;
    mi.upper.pieces.emplace_back(c, b * L.x_max);
    // gamma (v_max - x_v)
    c.setZero();
    c(v) = -gamma;
    mi.upper.pieces.emplace_back(c, gamma * L.v_max);
    out.push_back(std::move(mi));
  }
  return out;
}

// ---------------------------------------------------------------- integrator augmentation

AugmentedPlant augment_with_integrator(const Mat& Ap, const Mat& Bp, const Mat& Cp, const Mat& Dp) {
  const Index np = Ap.rows();
  const Index m = Cp.rows();
  const Index mu = Bp.cols();
  require(Ap.cols() == np && Bp.rows() == np && Cp.cols() == np && Dp.rows() == m && Dp.cols() == mu,
          ErrorCode::DimensionMismatch, "plant matrices have inconsistent shapes");
  Mat A = Mat::Zero(m + np, m + np);
  A.topRightCorner(m, np) = Cp;
  A.bottomRightCorner(np, np) = Ap;
  Mat B(m + np, mu);
  B << Dp, Bp;
  Mat E = Mat::Zero(m + np, m);
  E.topRows(m) = -Mat::Identity(m, m);
  return {LtiSystem(A, B), E, m};
}

LtiSystem AugmentedPlant::with_held_command() const {
  const Index n = plant.n();
  const Index mu = plant.m();
  const Index m = outputs;
  Mat A = Mat::Zero(n + m, n + m);
  A.topLeftCorner(n, n) = plant.A();
  A.topRightCorner(n, m) = E;  // E y_cmd
  Mat B = Mat::Zero(n + m, mu + m);
  B.topLeftCorner(n, mu) = plant.B();
  B.block(0, mu, n, m) = -E;  // -E v
  return {A, B};
}

// ---------------------------------------------------------------- sampling and rasters

std::vector<Vec> sample_in_S(std::span<const PsiChain> chains, const Vec& lo, const Vec& hi, std::size_t count,
                             std::uint64_t seed, const std::function<bool(const Vec&)>& extra,
                             std::size_t max_attempts) {
  require(count >= 1, ErrorCode::InvalidArgument, "sample count must be positive");
  require(lo.size() == hi.size() && lo.allFinite() && hi.allFinite() && (lo.array() <= hi.array()).all(),
          ErrorCode::InvalidArgument, "sampling window must be finite and ordered");
  std::mt19937_64 rng(seed);
  std::vector<std::uniform_real_distribution<double>> dist;
  for (Index k = 0; k < lo.size(); ++k) dist.emplace_back(lo(k), hi(k));
  std::vector<Vec> out;
  Vec x(lo.size());
  for (std::size_t attempt = 0; attempt < max_attempts && out.size() < count; ++attempt) {
    for (Index k = 0; k < lo.size(); ++k) x(k) = dist[static_cast<std::size_t>(k)](rng);
    if (in_invariant_set(chains, x) && (!extra || extra(x))) out.push_back(x);
  }
  if (out.size() < count) {
    fail(ErrorCode::SamplingExhausted, "accepted " + std::to_string(out.size()) + " of " + std::to_string(count) +
                                           " samples in " + std::to_string(max_attempts) + " attempts");
  }
  return out;
}

std::size_t Raster::count() const { return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), 1)); }

namespace {

Raster raster_frame(const Window& w, int nx, int ny, const Slice& s) {
  require(nx >= 2 && ny >= 2, ErrorCode::InvalidArgument, "resolution must be at least 2 per axis");
  require(std::isfinite(w.x_lo) && std::isfinite(w.x_hi) && std::isfinite(w.y_lo) && std::isfinite(w.y_hi) &&
              w.x_lo < w.x_hi && w.y_lo < w.y_hi,
          ErrorCode::InvalidArgument, "window must be finite and ordered");
  require(s.ix != s.iy && s.ix >= 0 && s.iy >= 0 && s.ix < s.base.size() && s.iy < s.base.size(),
          ErrorCode::InvalidArgument, "slice axes must be distinct state coordinates");
  Raster r;
  r.nx = nx;
  r.ny = ny;
  for (int i = 0; i < nx; ++i) r.xs.push_back(w.x_lo + (w.x_hi - w.x_lo) * i / (nx - 1));
  for (int j = 0; j < ny; ++j) r.ys.push_back(w.y_lo + (w.y_hi - w.y_lo) * j / (ny - 1));
  r.cells.assign(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), 0);
  return r;
}

}  // namespace

Raster rasterize_set(const Membership& pred, const Window& w, int nx, int ny, const Slice& slice) {
  Raster r = raster_frame(w, nx, ny, slice);
  const long total = static_cast<long>(nx) * ny;
#pragma omp parallel
  {
    Vec x = slice.base;
#pragma omp for schedule(static)
    for (long c = 0; c < total; ++c) {
      x(slice.ix) = r.xs[static_cast<std::size_t>(c % nx)];
      x(slice.iy) = r.ys[static_cast<std::size_t>(c / nx)];
      r.cells[static_cast<std::size_t>(c)] = pred(x) ? 1 : 0;
    }
  }
  return r;
}

Raster rasterize_set_serial(const Membership& pred, const Window& w, int nx, int ny, const Slice& slice) {
  Raster r = raster_frame(w, nx, ny, slice);
  Vec x = slice.base;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      x(slice.ix) = r.xs[static_cast<std::size_t>(i)];
      x(slice.iy) = r.ys[static_cast<std::size_t>(j)];
      r.cells[static_cast<std::size_t>(j) * nx + i] = pred(x) ? 1 : 0;
    }
  }
  return r;
}

}  // namespace hocbf
