#include "commands.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
  using namespace hocbf::cli;

  CLI::App app{"hocbf: HOCBF safety filter analysis and simulation"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  CommonArgs analyze;
  auto* an = app.add_subcommand("analyze", "Parallel families, blocks, feasibility domains and certificates");
  an->add_option("scenario", analyze.scenario, "Scenario JSON")->required();
  an->add_option("--out", analyze.out, "Output directory");

  SimulateArgs sim;
  std::uint64_t seed = 0;
  auto* sm = app.add_subcommand("simulate", "Closed-loop runs from listed and sampled initial states");
  sm->add_option("scenario", sim.scenario, "Scenario JSON")->required();
  sm->add_option("--out", sim.out, "Output directory");
  auto* seed_opt = sm->add_option("--seed", seed, "Override the sampling seed");
  sm->add_flag("--compare-qp", sim.compare_qp, "Also solve the QP and log the deviation");

  RasterArgs ras;
  std::string window, slice;
  int res = 0;
  auto* rs = app.add_subcommand("raster", "Grid membership of C, S, Xu and Xb on a 2-D slice");
  rs->add_option("scenario", ras.scenario, "Scenario JSON")->required();
  rs->add_option("--out", ras.out, "Output directory");
  auto* window_opt = rs->add_option("--window", window, "x_lo,x_hi,y_lo,y_hi");
  auto* res_opt = rs->add_option("--res", res, "Cells per axis");
  rs->add_option("--slice", slice, "Fixed coordinates, k=v,k=v");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*an) return run_analyze(analyze, std::cerr);
  if (*sm) {
    if (*seed_opt) sim.seed = seed;
    return run_simulate(sim, std::cerr);
  }
  try {
    if (*window_opt) ras.window = parse_window(window);
    if (*res_opt) ras.resolution = res;
    if (!slice.empty()) ras.slice = parse_slice(slice);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return run_raster(ras, std::cerr);
}
