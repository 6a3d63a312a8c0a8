#include "scenario_io.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace hocbf::cli {

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& msg) { throw ConfigError(path + ": " + msg); }

// Object view that rejects keys outside `allowed`.
class Obj {
 public:
  Obj(const json& j, std::string path, std::initializer_list<const char*> allowed) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) bad(path_, "expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items()) {
      if (!ok.count(k)) bad(path_, "unknown key '" + k + "'");
    }
  }

  [[nodiscard]] bool has(const char* k) const { return j_.contains(k); }
  [[nodiscard]] const json& at(const char* k) const {
    if (!j_.contains(k)) bad(path_, "missing key '" + std::string(k) + "'");
    return j_.at(k);
  }
  [[nodiscard]] std::string sub(const char* k) const { return path_ + "." + k; }

 private:
  const json& j_;
  std::string path_;
};

double number(const json& j, const std::string& path, bool allow_inf = false) {
  if (allow_inf && j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    bad(path, "expected a number, \"inf\" or \"-inf\"");
  }
  if (!j.is_number()) bad(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(path, "number must be finite");
  return v;
}

std::string string(const json& j, const std::string& path) {
  if (!j.is_string()) bad(path, "expected a string");
  return j.get<std::string>();
}

Vec vector(const json& j, const std::string& path, bool allow_inf = false) {
  if (!j.is_array()) bad(path, "expected an array of numbers");
  Vec v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = number(j[i], path + "[" + std::to_string(i) + "]", allow_inf);
  return v;
}

Mat matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) bad(path, "expected a nonempty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) bad(path, "rows must be nonempty arrays");
  Mat M(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vec row = vector(j[r], path + "[" + std::to_string(r) + "]");
    if (static_cast<std::size_t>(row.size()) != cols) bad(path, "rows have unequal lengths");
    M.row(static_cast<Index>(r)) = row.transpose();
  }
  return M;
}

// Scalar or square matrix gain.
Mat gain(const json& j, const std::string& path, Index m) {
  if (j.is_number()) return number(j, path) * Mat::Identity(m, m);
  return matrix(j, path);
}

std::vector<Index> indices(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array of indices");
  std::vector<Index> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer() || j[i].get<long long>() < 0) bad(path, "indices must be nonnegative integers");
    out.push_back(static_cast<Index>(j[i].get<long long>()));
  }
  return out;
}

json to_json_vec(const Vec& v) {
  json a = json::array();
  for (Index k = 0; k < v.size(); ++k) {
    if (std::isinf(v(k))) a.push_back(v(k) > 0 ? "inf" : "-inf");
    else a.push_back(v(k));
  }
  return a;
}

json to_json_mat(const Mat& M) {
  json a = json::array();
  for (Index r = 0; r < M.rows(); ++r) a.push_back(to_json_vec(M.row(r).transpose()));
  return a;
}

json to_json_idx(const std::vector<Index>& v) {
  json a = json::array();
  for (Index i : v) a.push_back(static_cast<long long>(i));
  return a;
}

FilterPolicy policy_from(const std::string& s, const std::string& path) {
  if (s == "auto") return FilterPolicy::Auto;
  if (s == "force-qp") return FilterPolicy::ForceQp;
  if (s == "force-explicit") return FilterPolicy::ForceExplicit;
  bad(path, "policy must be auto, force-qp or force-explicit");
}

InputSet parse_input_set(const json& j, const std::string& path, Index m) {
  const std::string kind = string(Obj(j, path, {"kind", "lo", "hi", "Q", "b"}).at("kind"), path + ".kind");
  try {
    if (kind == "all") {
      Obj(j, path, {"kind"});
      return InputSet::all(m);
    }
    if (kind == "box") {
      Obj o(j, path, {"kind", "lo", "hi"});
      const Vec lo = vector(o.at("lo"), o.sub("lo"), true), hi = vector(o.at("hi"), o.sub("hi"), true);
      if (lo.size() != m || hi.size() != m) bad(path, "box bounds must have length m = " + std::to_string(m));
      return InputSet::box(lo, hi);
    }
    if (kind == "polyhedron") {
      Obj o(j, path, {"kind", "Q", "b"});
      const Mat Q = matrix(o.at("Q"), o.sub("Q"));
      if (Q.cols() != m) bad(path, "Q must have m columns");
      return InputSet::polyhedron(Q, vector(o.at("b"), o.sub("b")));
    }
  } catch (const Error& e) {
    bad(path, e.what());
  }
  bad(path + ".kind", "expected all, box or polyhedron");
}

NominalController parse_controller(const json& j, const std::string& path, Index m) {
  const std::string kind =
      string(Obj(j, path, {"kind", "K", "x_ref", "K_P", "K_D", "waypoints", "position", "velocity"}).at("kind"),
             path + ".kind");
  if (kind == "affine_feedback") {
    Obj o(j, path, {"kind", "K", "x_ref"});
    return AffineFeedback{matrix(o.at("K"), o.sub("K")), vector(o.at("x_ref"), o.sub("x_ref"))};
  }
  if (kind == "waypoint_pd") {
    Obj o(j, path, {"kind", "K_P", "K_D", "waypoints", "position", "velocity"});
    WaypointPD pd;
    pd.K_P = gain(o.at("K_P"), o.sub("K_P"), m);
    pd.K_D = gain(o.at("K_D"), o.sub("K_D"), m);
    const json& wps = o.at("waypoints");
    if (!wps.is_array()) bad(o.sub("waypoints"), "expected an array");
    for (std::size_t i = 0; i < wps.size(); ++i) {
      const std::string wp = o.sub("waypoints") + "[" + std::to_string(i) + "]";
      Obj w(wps[i], wp, {"time", "target"});
      pd.waypoints.push_back({number(w.at("time"), w.sub("time")), vector(w.at("target"), w.sub("target"))});
    }
    pd.position = indices(o.at("position"), o.sub("position"));
    pd.velocity = indices(o.at("velocity"), o.sub("velocity"));
    return pd;
  }
  bad(path + ".kind", "expected affine_feedback or waypoint_pd");
}

CommandSchedule parse_commands(const json& j, const std::string& path) {
  Obj o(j, path, {"indices", "steps"});
  CommandSchedule c;
  c.indices = indices(o.at("indices"), o.sub("indices"));
  const json& steps = o.at("steps");
  if (!steps.is_array() || steps.empty()) bad(o.sub("steps"), "expected a nonempty array");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string sp = o.sub("steps") + "[" + std::to_string(i) + "]";
    Obj s(steps[i], sp, {"time", "value"});
    c.times.push_back(number(s.at("time"), s.sub("time")));
    c.values.push_back(vector(s.at("value"), s.sub("value")));
    if (i > 0 && !(c.times[i] > c.times[i - 1])) bad(sp, "step times must be strictly increasing");
  }
  return c;
}

Vec window_vec(const json& j, const std::string& path, Index n) {
  const Vec v = vector(j, path);
  if (v.size() != n) bad(path, "expected length " + std::to_string(n));
  return v;
}

}  // namespace

ScenarioFile parse_scenario(const json& doc) {
  Obj root(doc, "scenario",
           {"name", "provenance", "system", "gains_by_degree", "safeties", "input_set", "controller", "commands",
            "filter", "simulation", "verification_region", "raster"});
  ScenarioFile f;
  f.name = string(root.at("name"), "scenario.name");

  if (root.has("provenance")) {
    const json& p = root.at("provenance");
    if (!p.is_object()) bad("scenario.provenance", "expected an object of strings");
    for (const auto& [k, v] : p.items()) f.provenance[k] = string(v, "scenario.provenance." + k);
  }

  // plant
  {
    const json& s = root.at("system");
    Obj o(s, "scenario.system", {"A", "B", "integrator_augmented"});
    if (o.has("integrator_augmented")) {
      if (o.has("A") || o.has("B")) bad("scenario.system", "give either A/B or integrator_augmented");
      Obj a(o.at("integrator_augmented"), o.sub("integrator_augmented"), {"Ap", "Bp", "Cp", "Dp"});
      f.system_spec = AugmentedSystem{matrix(a.at("Ap"), a.sub("Ap")), matrix(a.at("Bp"), a.sub("Bp")),
                                      matrix(a.at("Cp"), a.sub("Cp")), matrix(a.at("Dp"), a.sub("Dp"))};
    } else {
      f.system_spec = ExplicitSystem{matrix(o.at("A"), o.sub("A")), matrix(o.at("B"), o.sub("B"))};
    }
  }
  std::optional<LtiSystem> sys;
  try {
    if (const auto* e = std::get_if<ExplicitSystem>(&f.system_spec)) {
      sys.emplace(e->A, e->B);
    } else {
      const auto& a = std::get<AugmentedSystem>(f.system_spec);
      sys.emplace(augment_with_integrator(a.Ap, a.Bp, a.Cp, a.Dp).with_held_command());
    }
  } catch (const Error& e) {
    bad("scenario.system", e.what());
  }
  const Index n = sys->n(), m = sys->m();

  if (root.has("gains_by_degree")) {
    const json& g = root.at("gains_by_degree");
    if (!g.is_array()) bad("scenario.gains_by_degree", "expected an array of gain lists");
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Vec v = vector(g[i], "scenario.gains_by_degree[" + std::to_string(i) + "]");
      f.gains_by_degree.emplace_back(v.data(), v.data() + v.size());
    }
  }

  const json& saf = root.at("safeties");
  if (!saf.is_array()) bad("scenario.safeties", "expected an array");
  std::vector<AffineSafety> resolved;
  for (std::size_t i = 0; i < saf.size(); ++i) {
    const std::string sp = "scenario.safeties[" + std::to_string(i) + "]";
    Obj o(saf[i], sp, {"a", "b", "alphas"});
    AffineSafety s{vector(o.at("a"), o.sub("a")), number(o.at("b"), o.sub("b")), {}};
    if (s.a.size() != n) bad(sp + ".a", "expected length n = " + std::to_string(n));
    if (o.has("alphas")) {
      const Vec al = vector(o.at("alphas"), o.sub("alphas"));
      s.alphas.assign(al.data(), al.data() + al.size());
    }
    f.safeties.push_back(s);
    try {
      resolved.push_back(with_uniform_gains(*sys, s, f.gains_by_degree));
      (void)build_barrier_row(*sys, resolved.back(), i);
    } catch (const Error& e) {
      bad(sp, e.what());
    }
  }

  const InputSet U = parse_input_set(root.at("input_set"), "scenario.input_set", m);
  const NominalController ctrl = parse_controller(root.at("controller"), "scenario.controller", m);
  CommandSchedule cmds;
  if (root.has("commands")) cmds = parse_commands(root.at("commands"), "scenario.commands");

  // filter
  if (root.has("filter")) {
    Obj o(root.at("filter"), "scenario.filter", {"policy", "weight"});
    if (o.has("policy")) f.policy = policy_from(string(o.at("policy"), o.sub("policy")), o.sub("policy"));
    if (o.has("weight")) {
      const json& w = o.at("weight");
      if (w.is_string()) {
        if (w.get<std::string>() != "identity") bad(o.sub("weight"), "expected \"identity\", a matrix or {construct}");
      } else if (w.is_array()) {
        f.weight.kind = WeightSpec::Kind::Matrix;
        f.weight.G = matrix(w, o.sub("weight"));
      } else {
        Obj c(w, o.sub("weight"), {"construct"});
        Obj cc(c.at("construct"), c.sub("construct"), {"S", "tau"});
        f.weight.kind = WeightSpec::Kind::Construct;
        f.weight.S = matrix(cc.at("S"), cc.sub("S"));
        if (cc.has("tau")) f.weight.tau = number(cc.at("tau"), cc.sub("tau"));
      }
    }
  }
  Mat G;
  try {
    switch (f.weight.kind) {
      case WeightSpec::Kind::Identity: G = Mat::Identity(m, m); break;
      case WeightSpec::Kind::Matrix: G = f.weight.G; break;
      case WeightSpec::Kind::Construct: G = construct_G(f.weight.S, f.weight.tau); break;
    }
  } catch (const Error& e) {
    bad("scenario.filter.weight", e.what());
  }

  // run settings
  if (root.has("simulation")) {
    Obj o(root.at("simulation"), "scenario.simulation", {"dt", "horizon", "initial_states", "samples"});
    if (o.has("dt")) f.dt = number(o.at("dt"), o.sub("dt"));
    if (o.has("horizon")) f.horizon = number(o.at("horizon"), o.sub("horizon"));
    if (o.has("initial_states")) {
      const json& xs = o.at("initial_states");
      if (!xs.is_array()) bad(o.sub("initial_states"), "expected an array of states");
      for (std::size_t i = 0; i < xs.size(); ++i) {
        f.initial_states.push_back(window_vec(xs[i], o.sub("initial_states") + "[" + std::to_string(i) + "]", n));
      }
    }
    if (o.has("samples")) {
      Obj s(o.at("samples"), o.sub("samples"), {"count", "seed", "lo", "hi", "require_feasible"});
      SampleSpec sp;
      const json& c = s.at("count");
      if (!c.is_number_integer() || c.get<long long>() < 1) bad(s.sub("count"), "expected a positive integer");
      sp.count = c.get<std::size_t>();
      if (s.has("seed")) {
        const json& sd = s.at("seed");
        if (!sd.is_number_integer() || sd.get<long long>() < 0) bad(s.sub("seed"), "expected a nonnegative integer");
        sp.seed = sd.get<std::uint64_t>();
      }
      sp.lo = window_vec(s.at("lo"), s.sub("lo"), n);
      sp.hi = window_vec(s.at("hi"), s.sub("hi"), n);
      if (!(sp.lo.array() <= sp.hi.array()).all()) bad(o.sub("samples"), "lo must not exceed hi");
      if (s.has("require_feasible")) {
        if (!s.at("require_feasible").is_boolean()) bad(s.sub("require_feasible"), "expected a boolean");
        sp.require_feasible = s.at("require_feasible").get<bool>();
      }
      f.samples = sp;
    }
  }
  if (!(f.dt > 0)) bad("scenario.simulation.dt", "must be positive");
  if (f.horizon < 0) bad("scenario.simulation.horizon", "must be nonnegative");
  {
    const double steps = f.horizon / f.dt;
    if (std::abs(steps - std::round(steps)) > 1e-6) bad("scenario.simulation", "horizon must be a multiple of dt");
  }

  if (root.has("verification_region")) {
    Obj o(root.at("verification_region"), "scenario.verification_region",
          {"coords", "lo", "hi", "points_per_axis", "base"});
    RegionSpec r;
    r.coords = indices(o.at("coords"), o.sub("coords"));
    r.lo = vector(o.at("lo"), o.sub("lo"));
    r.hi = vector(o.at("hi"), o.sub("hi"));
    const auto k = static_cast<Index>(r.coords.size());
    if (r.lo.size() != k || r.hi.size() != k) bad(o.sub("lo"), "one bound per listed coordinate");
    for (Index c : r.coords) {
      if (c >= n) bad(o.sub("coords"), "coordinate out of range");
    }
    if (!(r.lo.array() <= r.hi.array()).all()) bad("scenario.verification_region", "lo must not exceed hi");
    if (o.has("points_per_axis")) {
      const json& p = o.at("points_per_axis");
      if (!p.is_number_integer() || p.get<int>() < 2) bad(o.sub("points_per_axis"), "expected an integer >= 2");
      r.points_per_axis = p.get<int>();
    }
    r.base = o.has("base") ? window_vec(o.at("base"), o.sub("base"), n) : Vec(Vec::Zero(n));
    f.verification = r;
  }

  f.raster.base = Vec::Zero(n);
  for (Index k = 0; k < n; ++k) f.raster.free.push_back(k);
  if (root.has("raster")) {
    Obj o(root.at("raster"), "scenario.raster", {"window", "resolution", "free", "base"});
    if (o.has("window")) {
      const Vec w = window_vec(o.at("window"), o.sub("window"), 4);
      if (!(w(0) < w(1) && w(2) < w(3))) bad(o.sub("window"), "expected x_lo < x_hi and y_lo < y_hi");
      for (int k = 0; k < 4; ++k) f.raster.window[k] = w(k);
    }
    if (o.has("resolution")) {
      const json& r = o.at("resolution");
      if (!r.is_number_integer() || r.get<int>() < 2) bad(o.sub("resolution"), "expected an integer >= 2");
      f.raster.resolution = r.get<int>();
    }
    if (o.has("free")) {
      f.raster.free = indices(o.at("free"), o.sub("free"));
      for (Index c : f.raster.free) {
        if (c >= n) bad(o.sub("free"), "coordinate out of range");
      }
      if (f.raster.free.size() < 2) bad(o.sub("free"), "need at least two coordinates");
    }
    if (o.has("base")) f.raster.base = window_vec(o.at("base"), o.sub("base"), n);
  }

  try {
    f.resolved = Scenario{f.name, *sys, resolved, U, ctrl, f.policy, G, f.dt, f.horizon, cmds};
    (void)prepare(*f.resolved);
  } catch (const Error& e) {
    bad("scenario", e.what());
  }
  return f;
}

ScenarioFile load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open scenario file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_scenario(doc);
}

json to_json(const ScenarioFile& f) {
  json j;
  j["name"] = f.name;
  if (!f.provenance.empty()) {
    json p = json::object();
    for (const auto& [k, v] : f.provenance) p[k] = v;
    j["provenance"] = p;
  }
  if (const auto* e = std::get_if<ExplicitSystem>(&f.system_spec)) {
    j["system"] = {{"A", to_json_mat(e->A)}, {"B", to_json_mat(e->B)}};
  } else {
    const auto& a = std::get<AugmentedSystem>(f.system_spec);
    j["system"] = {{"integrator_augmented",
                    {{"Ap", to_json_mat(a.Ap)}, {"Bp", to_json_mat(a.Bp)}, {"Cp", to_json_mat(a.Cp)}, {"Dp", to_json_mat(a.Dp)}}}};
  }
  if (!f.gains_by_degree.empty()) {
    json g = json::array();
    for (const auto& l : f.gains_by_degree) g.push_back(l);
    j["gains_by_degree"] = g;
  }
  json saf = json::array();
  for (const auto& s : f.safeties) {
    json o{{"a", to_json_vec(s.a)}, {"b", s.b}};
    if (!s.alphas.empty()) o["alphas"] = s.alphas;
    saf.push_back(o);
  }
  j["safeties"] = saf;
  // re-emit the input set and controller from their parsed forms
  const InputSet& U = f.scenario().input_set;
  switch (U.kind()) {
    case InputSet::Kind::All: j["input_set"] = {{"kind", "all"}}; break;
    case InputSet::Kind::Box: j["input_set"] = {{"kind", "box"}, {"lo", to_json_vec(U.lo())}, {"hi", to_json_vec(U.hi())}}; break;
    case InputSet::Kind::Polyhedron: j["input_set"] = {{"kind", "polyhedron"}, {"Q", to_json_mat(U.Q())}, {"b", to_json_vec(U.b())}}; break;
  }
  if (const auto* fb = std::get_if<AffineFeedback>(&f.scenario().controller)) {
    j["controller"] = {{"kind", "affine_feedback"}, {"K", to_json_mat(fb->K)}, {"x_ref", to_json_vec(fb->x_ref)}};
  } else {
    const auto& pd = std::get<WaypointPD>(f.scenario().controller);
    json wps = json::array();
    for (const auto& w : pd.waypoints) wps.push_back({{"time", w.time}, {"target", to_json_vec(w.target)}});
    j["controller"] = {{"kind", "waypoint_pd"},          {"K_P", to_json_mat(pd.K_P)},
                       {"K_D", to_json_mat(pd.K_D)},     {"waypoints", wps},
                       {"position", to_json_idx(pd.position)}, {"velocity", to_json_idx(pd.velocity)}};
  }
  if (!f.scenario().commands.empty()) {
    json steps = json::array();
    for (std::size_t k = 0; k < f.scenario().commands.times.size(); ++k) {
      steps.push_back({{"time", f.scenario().commands.times[k]}, {"value", to_json_vec(f.scenario().commands.values[k])}});
    }
    j["commands"] = {{"indices", to_json_idx(f.scenario().commands.indices)}, {"steps", steps}};
  }
  json filter{{"policy", std::string(to_string(f.policy))}};
  switch (f.weight.kind) {
    case WeightSpec::Kind::Identity: filter["weight"] = "identity"; break;
    case WeightSpec::Kind::Matrix: filter["weight"] = to_json_mat(f.weight.G); break;
    case WeightSpec::Kind::Construct:
      filter["weight"] = {{"construct", {{"S", to_json_mat(f.weight.S)}, {"tau", f.weight.tau}}}};
      break;
  }
  j["filter"] = filter;
  json sim{{"dt", f.dt}, {"horizon", f.horizon}};
  if (!f.initial_states.empty()) {
    json xs = json::array();
    for (const auto& x : f.initial_states) xs.push_back(to_json_vec(x));
    sim["initial_states"] = xs;
  }
  if (f.samples) {
    sim["samples"] = {{"count", f.samples->count},           {"seed", f.samples->seed},
                      {"lo", to_json_vec(f.samples->lo)},     {"hi", to_json_vec(f.samples->hi)},
                      {"require_feasible", f.samples->require_feasible}};
  }
  j["simulation"] = sim;
  if (f.verification) {
    const auto& r = *f.verification;
    j["verification_region"] = {{"coords", to_json_idx(r.coords)}, {"lo", to_json_vec(r.lo)}, {"hi", to_json_vec(r.hi)},
                                {"points_per_axis", r.points_per_axis}, {"base", to_json_vec(r.base)}};
  }
  j["raster"] = {{"window", {f.raster.window[0], f.raster.window[1], f.raster.window[2], f.raster.window[3]}},
                 {"resolution", f.raster.resolution},
                 {"free", to_json_idx(f.raster.free)},
                 {"base", to_json_vec(f.raster.base)}};
  return j;
}

}  // namespace hocbf::cli
