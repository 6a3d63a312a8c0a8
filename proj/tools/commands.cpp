#include "commands.hpp"

#include "output.hpp"
#include "scenario_io.hpp"

#include "hocbf/error.hpp"
#include "hocbf/filters.hpp"
#include "hocbf/geometry.hpp"
#include "hocbf/simulation.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace hocbf::cli {

namespace fs = std::filesystem;

namespace {

json vec_json(const Vec& v) {
  json a = json::array();
  for (Index k = 0; k < v.size(); ++k) {
    if (std::isfinite(v(k))) a.push_back(v(k));
    else a.push_back(format_double(v(k)));
  }
  return a;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::vector<std::string> indexed(const std::string& prefix, Index n) {
  std::vector<std::string> out;
  for (Index k = 0; k < n; ++k) out.push_back(prefix + std::to_string(k));
  return out;
}

void append(std::vector<double>& row, const Vec& v) { row.insert(row.end(), v.data(), v.data() + v.size()); }

// Runs `body` with the shared error-to-exit-code mapping.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << '\n';
    return kExitNumeric;
  }
}

json manifest_header(const ScenarioFile& f, const std::string& command) {
  json m;
  m["tool"] = "hocbf";
  m["version"] = kVersion;
  m["command"] = command;
  m["started_utc"] = utc_now();
  m["scenario"] = to_json(f);
  return m;
}

void write_halfspaces(const fs::path& path, const std::vector<std::pair<int, Halfspace>>& rows, Index n) {
  std::vector<std::string> header{"group"};
  for (const auto& h : indexed("a", n)) header.push_back(h);
  header.push_back("offset");
  CsvWriter csv(path, header);
  for (const auto& [g, h] : rows) {
    std::vector<double> r{static_cast<double>(g)};
    append(r, h.normal);
    r.push_back(h.offset);
    csv.row(r);
  }
  csv.close();
}

bool axis_direction(const Vec& v, Index& k) {
  Index best;
  const double big = v.cwiseAbs().maxCoeff(&best);
  k = best;
  return std::abs(big - 1.0) <= 1e-12 && v.cwiseAbs().sum() - big <= 1e-12;
}

// Points of a box grid over `coords`, other coordinates from `base`.
std::vector<Vec> region_grid(const RegionSpec& r) {
  std::vector<Vec> pts{r.base};
  for (std::size_t c = 0; c < r.coords.size(); ++c) {
    std::vector<Vec> next;
    for (const auto& p : pts) {
      for (int i = 0; i < r.points_per_axis; ++i) {
        Vec q = p;
        const auto k = static_cast<Index>(c);
        q(r.coords[c]) = r.lo(k) + (r.hi(k) - r.lo(k)) * i / (r.points_per_axis - 1);
        next.push_back(std::move(q));
      }
    }
    pts = std::move(next);
  }
  return pts;
}

}  // namespace

// ---------------------------------------------------------------- analyze

int run_analyze(const CommonArgs& args, std::ostream& err) {
  return guarded(err, [&] {
    const ScenarioFile f = load_scenario(args.scenario);
    const Scenario& sc = f.scenario();
    const ClosedLoop loop = prepare(sc);
    const StackedSystem& st = loop.stack;
    const InputSet& U = sc.input_set;
    const Index n = sc.system.n();
    const fs::path out(args.out);
    fs::create_directories(out);
    Manifest manifest(out);
    json& m = manifest.body();
    m = manifest_header(f, "analyze");
    const auto t0 = std::chrono::steady_clock::now();

    json report;
    json rows = json::array();
    for (const auto& r : st.rows()) {
      rows.push_back({{"ell", vec_json(r.ell)}, {"beta", vec_json(r.beta.c)}, {"beta0", r.beta.c0},
                      {"relative_degree", r.rel_degree}});
    }
    report["rows"] = rows;

    const auto fams = detect_parallel_families(st);
    json jf = json::array();
    for (const auto& fam : fams) {
      json members = json::array();
      for (auto i : fam.members) members.push_back(i);
      jf.push_back({{"direction", vec_json(fam.v)}, {"members", members}, {"c", fam.c}});
    }
    report["parallel_families"] = jf;

    const BlockPartition part = detect_blocks(st);
    json jb = json::array();
    for (const auto& b : part.blocks) {
      json o{{"kind", std::string(to_string(b.kind))}, {"rows", b.rows}};
      if (b.direction) o["direction"] = vec_json(*b.direction);
      jb.push_back(o);
    }
    report["blocks"] = jb;
    report["partition_verified"] = st.p() == 0 || verify_partition(st, part);

    // one representative row per family; independent representatives give feasibility for every x
    Mat V(static_cast<Index>(fams.size()), U.m());
    std::vector<std::size_t> reps;
    for (std::size_t k = 0; k < fams.size(); ++k) {
      V.row(static_cast<Index>(k)) = fams[k].v.transpose();
      reps.push_back(fams[k].members.front());
    }
    const bool dirs_independent = fams.empty() || numerical_rank(V, kTolRank) == V.rows();
    report["family_directions_independent"] = dirs_independent;
    report["all_rows_independent"] = independent_always_feasible(st, [&] {
      std::vector<std::size_t> all(st.p());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      return all;
    }());
    report["input_set"] = std::string(to_string(U.kind()));
    report["filter_law"] = std::string(law_name(loop.law));

    // feasibility domains family by family
    std::vector<std::pair<int, Halfspace>> xu, xb;
    for (std::size_t k = 0; k < fams.size(); ++k) {
      const ParallelDomain d = feasibility_domain_parallel(fams[k], U);
      for (const auto& h : d.unbounded.halfspaces) xu.emplace_back(static_cast<int>(k), h);
      for (const auto& h : d.bounded.halfspaces) xb.emplace_back(static_cast<int>(k), h);
    }
    write_halfspaces(out / "xu_halfspaces.csv", xu, n);
    write_halfspaces(out / "xb_halfspaces.csv", xb, n);
    manifest.add_file(out / "xu_halfspaces.csv");
    manifest.add_file(out / "xb_halfspaces.csv");
    report["xu_halfspaces"] = xu.size();
    report["xb_halfspaces"] = xb.size();
    report["xu_exact"] = dirs_independent;
    bool aligned = U.kind() == InputSet::Kind::All;
    if (U.kind() == InputSet::Kind::Box && dirs_independent) {
      aligned = true;
      for (Index k = 0; k < U.m(); ++k) {
        if (!std::isfinite(U.lo()(k)) && !std::isfinite(U.hi()(k))) continue;
        bool hit = false;
        for (const auto& fam : fams) {
          Index a;
          hit = hit || (axis_direction(fam.v, a) && a == k);
        }
        aligned = aligned && hit;
      }
    }
    report["xb_exact"] = dirs_independent && aligned;

    try {
      const Polytope P = project_feasible_set(st, U);
      std::vector<std::pair<int, Halfspace>> rows_fm;
      for (const auto& h : P.halfspaces) rows_fm.emplace_back(0, h);
      write_halfspaces(out / "xfeas_halfspaces.csv", rows_fm, n);
      manifest.add_file(out / "xfeas_halfspaces.csv");
      report["xfeas_halfspaces"] = rows_fm.size();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::CombinatorialBlowup) throw;
      report["xfeas_error"] = e.what();
    }

    // box directions outside the family span are certified through an expansion over the families
    if (U.kind() == InputSet::Kind::Box && dirs_independent && !fams.empty() && !aligned) {
      json cert;
      std::vector<Index> dep_coords;
      for (Index k = 0; k < U.m(); ++k) {
        if (std::isfinite(U.lo()(k)) || std::isfinite(U.hi()(k))) dep_coords.push_back(k);
      }
      Mat E = Mat::Zero(static_cast<Index>(dep_coords.size()), U.m());
      for (std::size_t j = 0; j < dep_coords.size(); ++j) E(static_cast<Index>(j), dep_coords[j]) = 1.0;
      cert["dependent_coordinates"] = dep_coords;
      try {
        Mat eta = expansion_coefficients(V, E);
        eta = eta.unaryExpr([](double e) { return std::abs(e) <= 1e-12 ? 0.0 : e; });
        cert["eta"] = json::array();
        for (Index j = 0; j < eta.rows(); ++j) cert["eta"].push_back(vec_json(eta.row(j).transpose()));
        if (f.verification) {
          std::vector<MergedInterval> merged;
          for (const auto& fam : fams) merged.push_back(merge_parallel(fam));
          std::vector<Interval> dep;
          for (Index k : dep_coords) dep.push_back({U.lo()(k), U.hi()(k)});
          const auto pts = region_grid(*f.verification);
          std::vector<std::string> header = indexed("x", n);
          header.push_back("certified");
          header.push_back("lp_feasible");
          CsvWriter csv(out / "certificate_points.csv", header);
          std::size_t certified = 0, feasible = 0, unsound = 0;
          for (const auto& x : pts) {
            std::vector<Interval> ind;
            bool ordered = true;
            for (const auto& mi : merged) {
              ind.push_back({mi.lower(x), mi.upper(x)});
              ordered = ordered && !ind.back().empty();
            }
            const bool ok = ordered && dependent_certificate(V, ind, eta, E, dep);
            const bool lp = feasible_at(st, U, x).feasible;
            certified += ok;
            feasible += lp;
            unsound += ok && !lp;
            std::vector<double> r(x.data(), x.data() + x.size());
            r.push_back(ok);
            r.push_back(lp);
            csv.row(r);
          }
          csv.close();
          manifest.add_file(out / "certificate_points.csv");
          cert["points"] = pts.size();
          cert["certified"] = certified;
          cert["lp_feasible"] = feasible;
          cert["unsound"] = unsound;
          cert["region_certified"] = certified == pts.size();
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DependencyMismatch) throw;
        cert["error"] = e.what();
      }
      report["dependent_certificate"] = cert;
    }

    {
      std::ofstream rep(out / "geometry_report.json");
      rep << report.dump(2) << '\n';
      if (!rep) throw std::runtime_error("cannot write geometry_report.json");
    }
    manifest.add_file(out / "geometry_report.json");
    m["elapsed_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    manifest.write();
    return kExitOk;
  });
}

// ---------------------------------------------------------------- simulate

int run_simulate(const SimulateArgs& args, std::ostream& err) {
  return guarded(err, [&] {
    const ScenarioFile f = load_scenario(args.scenario);
    const Scenario& sc = f.scenario();
    const ClosedLoop loop = prepare(sc);
    const Index n = sc.system.n(), m = sc.system.m();

    std::vector<Vec> x0s = f.initial_states;
    std::uint64_t seed = 0;
    if (f.samples) {
      seed = args.seed.value_or(f.samples->seed);
      std::function<bool(const Vec&)> extra;
      if (f.samples->require_feasible) {
        extra = [&](const Vec& x) { return feasible_at(loop.stack, sc.input_set, x).feasible; };
      }
      const auto s = sample_in_S(loop.chains, f.samples->lo, f.samples->hi, f.samples->count, seed, extra);
      x0s.insert(x0s.end(), s.begin(), s.end());
    }
    if (x0s.empty()) throw ConfigError("scenario.simulation: no initial_states and no samples");

    const fs::path out(args.out);
    fs::create_directories(out);
    Manifest manifest(out);
    json& man = manifest.body();
    man = manifest_header(f, "simulate");
    man["seed"] = seed;
    man["compare_qp"] = args.compare_qp;
    const auto t0 = std::chrono::steady_clock::now();

    // explicitly listed states may sit outside the invariant set; sampled ones never do
    SimulationOptions opts{args.compare_qp, false};
    const auto outcomes = simulate_batch(sc, x0s, opts);

    std::vector<std::string> header{"t"};
    for (const auto& h : indexed("x", n)) header.push_back(h);
    for (const auto& h : indexed("ud", m)) header.push_back(h);
    for (const auto& h : indexed("u", m)) header.push_back(h);
    for (const auto& h : indexed("h", static_cast<Index>(sc.safeties.size()))) header.push_back(h);
    std::size_t levels = 0;
    for (const auto& c : loop.chains) levels += c.levels.size();
    for (const auto& h : indexed("psi", static_cast<Index>(levels))) header.push_back(h);
    header.push_back("feasible");

    json runs = json::array();
    bool infeasible = false;
    double max_dev = 0.0;
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
      const auto& o = outcomes[k];
      json run{{"index", k}, {"x0", vec_json(x0s[k])}};
      if (!o.log) {
        err << "run " << k << ": " << o.error << '\n';
        throw Error(o.code, "run " + std::to_string(k) + ": " + o.error);
      }
      const TrajectoryLog& log = *o.log;
      const std::string traj = "trajectory_" + std::to_string(k) + ".csv";
      CsvWriter csv(out / traj, header);
      for (std::size_t i = 0; i < log.size(); ++i) {
        std::vector<double> r{log.times[i]};
        append(r, log.states[i]);
        append(r, log.nominal[i]);
        append(r, log.filtered[i]);
        append(r, log.h[i]);
        append(r, log.psi[i]);
        r.push_back(log.feasible[i]);
        csv.row(r);
      }
      csv.close();
      manifest.add_file(out / traj);
      if (args.compare_qp) {
        const std::string dev = "deviation_" + std::to_string(k) + ".csv";
        CsvWriter d(out / dev, {"t", "deviation_inf"});
        for (std::size_t i = 0; i < log.deviation.size(); ++i) d.row({log.times[i], log.deviation[i]});
        d.close();
        manifest.add_file(out / dev);
        run["max_deviation"] = log.max_deviation();
        max_dev = std::max(max_dev, log.max_deviation());
      }
      run["samples"] = log.size();
      run["min_h"] = log.min_h();
      run["min_psi"] = log.min_psi();
      if (o.ok) {
        run["status"] = "ok";
      } else {
        infeasible = true;
        run["status"] = "infeasible";
        run["failure"] = {{"t", *o.failure_time}, {"x", vec_json(o.failure_state)}, {"lambda", vec_json(o.certificate)}};
        err << "run " << k << ": " << o.error << '\n';
      }
      runs.push_back(run);
    }
    man["filter_law"] = std::string(law_name(loop.law));
    man["runs"] = runs;
    if (args.compare_qp) man["max_deviation"] = max_dev;
    man["elapsed_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    manifest.write();
    return infeasible ? kExitInfeasible : kExitOk;
  });
}

// ---------------------------------------------------------------- raster

int run_raster(const RasterArgs& args, std::ostream& err) {
  return guarded(err, [&] {
    const ScenarioFile f = load_scenario(args.scenario);
    const Scenario& sc = f.scenario();
    const ClosedLoop loop = prepare(sc);
    const Index n = sc.system.n();

    Vec base = f.raster.base;
    std::vector<bool> fixed(static_cast<std::size_t>(n), false);
    for (const auto& [k, v] : args.slice) {
      if (k < 0 || k >= n) throw ConfigError("--slice: coordinate " + std::to_string(k) + " out of range");
      if (!std::isfinite(v)) throw ConfigError("--slice: value must be finite");
      base(k) = v;
      fixed[static_cast<std::size_t>(k)] = true;
    }
    std::vector<Index> axes;
    for (Index k : f.raster.free) {
      if (!fixed[static_cast<std::size_t>(k)] && axes.size() < 2) axes.push_back(k);
    }
    if (axes.size() < 2) throw ConfigError("--slice leaves fewer than two free coordinates");
    const auto w = args.window.value_or(std::array<double, 4>{f.raster.window[0], f.raster.window[1],
                                                              f.raster.window[2], f.raster.window[3]});
    if (!(w[0] < w[1] && w[2] < w[3]) || !std::isfinite(w[0] + w[1] + w[2] + w[3])) {
      throw ConfigError("--window: expected finite x_lo < x_hi and y_lo < y_hi");
    }
    const int res = args.resolution.value_or(f.raster.resolution);
    if (res < 2) throw ConfigError("--res must be at least 2");

    const fs::path out(args.out);
    fs::create_directories(out);
    Manifest manifest(out);
    json& man = manifest.body();
    man = manifest_header(f, "raster");
    const auto t0 = std::chrono::steady_clock::now();

    const InputSet all = InputSet::all(sc.system.m());
    const std::vector<std::pair<std::string, Membership>> sets{
        {"C", [&](const Vec& x) {
           for (const auto& s : sc.safeties) {
             if (s.h()(x) < 0) return false;
           }
           return true;
         }},
        {"S", [&](const Vec& x) { return in_invariant_set(loop.chains, x); }},
        {"Xu", [&](const Vec& x) { return feasible_at(loop.stack, all, x).feasible; }},
        {"Xb", [&](const Vec& x) { return feasible_at(loop.stack, sc.input_set, x).feasible; }},
    };
    const Slice slice{axes[0], axes[1], base};
    json counts;
    for (const auto& [name, pred] : sets) {
      const Raster r = rasterize_set(pred, Window{w[0], w[1], w[2], w[3]}, res, res, slice);
      std::vector<std::string> header{"y\\x"};
      for (double x : r.xs) header.push_back(format_double(x));
      const std::string file = "raster_" + name + ".csv";
      CsvWriter csv(out / file, header);
      for (int j = 0; j < r.ny; ++j) {
        std::vector<double> row{r.ys[static_cast<std::size_t>(j)]};
        for (int i = 0; i < r.nx; ++i) row.push_back(r.at(i, j) ? 1.0 : 0.0);
        csv.row(row);
      }
      csv.close();
      manifest.add_file(out / file);
      counts[name] = r.count();
    }
    man["axes"] = {axes[0], axes[1]};
    man["base"] = vec_json(base);
    man["window"] = {w[0], w[1], w[2], w[3]};
    man["resolution"] = res;
    man["cell_counts"] = counts;
    man["elapsed_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    manifest.write();
    return kExitOk;
  });
}

std::array<double, 4> parse_window(const std::string& s) {
  std::array<double, 4> w{};
  std::stringstream ss(s);
  std::string item;
  std::size_t k = 0;
  while (std::getline(ss, item, ',')) {
    if (k == 4) throw std::invalid_argument("window takes four numbers");
    std::size_t used = 0;
    try {
      w[k++] = std::stod(item, &used);
    } catch (const std::logic_error&) {
      used = std::string::npos;
    }
    if (used != item.size()) throw std::invalid_argument("bad number '" + item + "'");
  }
  if (k != 4) throw std::invalid_argument("window takes four numbers");
  return w;
}

std::vector<std::pair<long, double>> parse_slice(const std::string& s) {
  std::vector<std::pair<long, double>> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("slice entries look like k=v");
    std::size_t u1 = 0, u2 = 0;
    long k = 0;
    double v = 0.0;
    try {
      k = std::stol(item.substr(0, eq), &u1);
      v = std::stod(item.substr(eq + 1), &u2);
    } catch (const std::logic_error&) {
      u1 = std::string::npos;
    }
    if (u1 != eq || u2 != item.size() - eq - 1) throw std::invalid_argument("bad slice entry '" + item + "'");
    out.emplace_back(k, v);
  }
  return out;
}

}  // namespace hocbf::cli
