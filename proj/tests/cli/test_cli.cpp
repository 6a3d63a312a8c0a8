#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "commands.hpp"
#include "output.hpp"
#include "scenario_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hocbf::cli;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kBundled{"double_integrator", "planar_double_integrator", "aircraft_roll_yaw"};

std::string bundled(const std::string& name) { return std::string(HOCBF_SCENARIO_DIR) + "/" + name + ".json"; }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hocbf_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::size_t fields(const std::string& line) { return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1; }

json minimal() {
  return json::parse(R"({
    "name": "tiny",
    "system": {"A": [[0, 1], [0, 0]], "B": [[0], [1]]},
    "safeties": [{"a": [1, 0], "b": -1, "alphas": [1, 2]}],
    "input_set": {"kind": "all"},
    "controller": {"kind": "affine_feedback", "K": [[1, 1]], "x_ref": [0, 0]},
    "simulation": {"dt": 0.01, "horizon": 0.1, "initial_states": [[0, 0]]}
  })");
}

}  // namespace

TEST_CASE("bundled scenarios round-trip through serialization") {
  for (const auto& name : kBundled) {
    CAPTURE(name);
    const ScenarioFile f = load_scenario(bundled(name));
    const json once = to_json(f);
    const ScenarioFile g = parse_scenario(once);
    CHECK(to_json(g) == once);
    CHECK(g.scenario().system.A() == f.scenario().system.A());
    CHECK(g.scenario().G == f.scenario().G);
    CHECK(g.scenario().safeties.size() == f.scenario().safeties.size());
  }
}

TEST_CASE("parser rejects malformed documents") {
  auto rejects = [](const json& doc) { CHECK_THROWS_AS(parse_scenario(doc), ConfigError); };
  CHECK_NOTHROW(parse_scenario(minimal()));

  json j = minimal();
  j["extra"] = 1;
  rejects(j);
  j = minimal();
  j["safeties"][0]["gain"] = 1;
  rejects(j);
  j = minimal();
  j["safeties"][0]["a"] = json::array({1, 0, 0});
  rejects(j);
  j = minimal();
  j["safeties"][0]["a"] = json::array({0, 0});
  rejects(j);
  j = minimal();
  j["safeties"][0]["alphas"] = json::array({1});
  rejects(j);
  j = minimal();
  j["simulation"]["dt"] = -0.1;
  rejects(j);
  j = minimal();
  j["simulation"]["horizon"] = 0.105;
  rejects(j);
  j = minimal();
  j["input_set"] = json::parse(R"({"kind": "box", "lo": [1], "hi": [0]})");
  rejects(j);
  j = minimal();
  j["input_set"] = json::parse(R"({"kind": "box", "lo": ["inf"], "hi": [0]})");
  rejects(j);
  j = minimal();
  j["filter"] = json::parse(R"({"policy": "sometimes"})");
  rejects(j);
  j = minimal();
  j["system"]["A"] = "eye";
  rejects(j);
}

TEST_CASE("infinite box bounds are accepted as strings") {
  json j = minimal();
  j["input_set"] = json::parse(R"({"kind": "box", "lo": ["-inf"], "hi": [2]})");
  const ScenarioFile f = parse_scenario(j);
  CHECK(std::isinf(f.scenario().input_set.lo()(0)));
  CHECK(to_json(parse_scenario(to_json(f))) == to_json(f));
}

TEST_CASE("malformed scenario exits 2 before creating outputs") {
  const fs::path bad = scratch("bad.json");
  {
    std::ofstream out(bad);
    out << "{\"name\": \"x\", \"system\": ";
  }
  const fs::path out = scratch("bad_out");
  std::ostringstream err;
  CHECK(run_analyze({bad.string(), out.string()}, err) == kExitConfig);
  CHECK_FALSE(fs::exists(out));
  CHECK(run_simulate({{bad.string(), out.string()}, {}, false}, err) == kExitConfig);
  CHECK(run_raster({{bad.string(), out.string()}, {}, {}, {}}, err) == kExitConfig);
  CHECK_FALSE(fs::exists(out));
  CHECK(run_analyze({(bad.string() + ".missing"), out.string()}, err) == kExitConfig);
}

TEST_CASE("infeasible start exits 4 with the failure recorded") {
  // unbounded drift toward the wall with a tiny actuator: the filter runs out of authority
  json j = minimal();
  j["input_set"] = json::parse(R"({"kind": "box", "lo": [-0.01], "hi": [0.01]})");
  j["simulation"]["initial_states"] = json::parse("[[-0.5, -0.9]]");
  j["simulation"]["horizon"] = 2.0;
  const fs::path in = scratch("infeasible.json");
  {
    std::ofstream out(in);
    out << j.dump();
  }
  const fs::path out = scratch("infeasible_out");
  std::ostringstream err;
  CHECK(run_simulate({{in.string(), out.string()}, {}, false}, err) == kExitInfeasible);
  const json m = read_json(out / "manifest.json");
  REQUIRE(m["runs"].size() == 1);
  CHECK(m["runs"][0]["status"] == "infeasible");
  CHECK(m["runs"][0]["failure"].contains("lambda"));
  const auto rows = lines(out / "trajectory_0.csv");
  CHECK(rows.back().substr(rows.back().size() - 2) == ",0");
}

TEST_CASE("analyze reports the documented structure") {
  std::ostringstream err;
  const fs::path a = scratch("analyze_a");
  REQUIRE(run_analyze({bundled("double_integrator"), a.string()}, err) == kExitOk);
  CHECK(lines(a / "xu_halfspaces.csv").size() == 7);
  CHECK(read_json(a / "geometry_report.json")["filter_law"] == "parallel-saturation");

  const fs::path b = scratch("analyze_b");
  REQUIRE(run_analyze({bundled("planar_double_integrator"), b.string()}, err) == kExitOk);
  CHECK(read_json(b / "geometry_report.json")["blocks"].size() == 2);

  const fs::path c = scratch("analyze_c");
  REQUIRE(run_analyze({bundled("aircraft_roll_yaw"), c.string()}, err) == kExitOk);
  const json cert = read_json(c / "geometry_report.json")["dependent_certificate"];
  CHECK(cert["unsound"] == 0);
  CHECK(cert["region_certified"] == true);
}

TEST_CASE("simulate is deterministic for a fixed seed and CSVs are rectangular") {
  std::ostringstream err;
  const fs::path a = scratch("sim_a"), b = scratch("sim_b"), c = scratch("sim_c");
  REQUIRE(run_simulate({{bundled("double_integrator"), a.string()}, 7, true}, err) == kExitOk);
  REQUIRE(run_simulate({{bundled("double_integrator"), b.string()}, 7, true}, err) == kExitOk);
  REQUIRE(run_simulate({{bundled("double_integrator"), c.string()}, 8, true}, err) == kExitOk);
  const json ma = read_json(a / "manifest.json"), mb = read_json(b / "manifest.json"), mc = read_json(c / "manifest.json");
  CHECK(ma["files"] == mb["files"]);
  CHECK(ma["files"] != mc["files"]);
  CHECK(ma["seed"] == 7);
  CHECK(ma["max_deviation"].get<double>() <= 1e-8);

  for (const auto& entry : ma["files"]) {
    const auto rows = lines(a / entry["path"].get<std::string>());
    REQUIRE(rows.size() >= 2);
    const std::size_t width = fields(rows.front());
    for (const auto& r : rows) CHECK(fields(r) == width);
    CHECK(sha256_file(a / entry["path"].get<std::string>()) == entry["sha256"]);
  }
  const auto traj = lines(a / "trajectory_0.csv");
  CHECK(traj.front().rfind("t,x0,x1,ud0,u0,h0,h1,h2,h3,h4,", 0) == 0);
  CHECK(traj.size() == 1 + 2001);
}

TEST_CASE("raster picks the first two free coordinates left by the slice") {
  std::ostringstream err;
  const fs::path out = scratch("raster");
  RasterArgs args{{bundled("aircraft_roll_yaw"), out.string()}, std::array<double, 4>{-0.4, 0.4, -0.02, 0.02}, 12,
                  {{2, 0.005}}};
  REQUIRE(run_raster(args, err) == kExitOk);
  const json m = read_json(out / "manifest.json");
  CHECK(m["axes"] == json::array({3, 4}));
  for (const char* name : {"C", "S", "Xu", "Xb"}) {
    const auto rows = lines(out / (std::string("raster_") + name + ".csv"));
    REQUIRE(rows.size() == 13);
    CHECK(rows.front().rfind("y\\x,", 0) == 0);
    for (const auto& r : rows) CHECK(fields(r) == 13);
  }
  args.slice = {{2, 0.0}, {3, 0.0}, {4, 0.0}, {0, 0.0}, {1, 0.0}};
  CHECK(run_raster(args, err) == kExitConfig);
  args.slice = {{9, 0.0}};
  CHECK(run_raster(args, err) == kExitConfig);
}

TEST_CASE("window and slice arguments parse strictly") {
  CHECK(parse_window("-1,1,-2,2") == std::array<double, 4>{-1, 1, -2, 2});
  CHECK_THROWS(parse_window("1,2,3"));
  CHECK_THROWS(parse_window("1,2,3,4,5"));
  CHECK_THROWS(parse_window("1,2,3,x"));
  const auto s = parse_slice("2=0.5,3=-1e-2");
  REQUIRE(s.size() == 2);
  CHECK(s[1].first == 3);
  CHECK(s[1].second == -0.01);
  CHECK_THROWS(parse_slice("2:0.5"));
  CHECK_THROWS(parse_slice("a=1"));
}
