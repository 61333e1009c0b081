// Command-line front end: scan fitting, fault simulation, reverse-time
// stability boundaries, critical clearing time and the brute-force oracle
// grid. Exit codes: 0 success, 1 computation failure, 2 input/validation
// failure.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tlroa/tlroa.hpp"

namespace {

tlroa::ScenarioConfig load_config(const std::string& path,
                                  const std::string& out_override) {
  tlroa::ScenarioConfig cfg = tlroa::load_scenario(path);
  if (!out_override.empty()) cfg.output_dir = out_override;
  return cfg;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const tlroa::ValidationError*>(&e)) return 2;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reduced-order WPP stability toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string scan_path;
  std::string boundary_path;
  double f_nominal = 50.0;
  double half_window = 5.0;
  double horizon = -1.0;
  double search_window = 10.0;

  auto* fit = app.add_subcommand("fit", "Fit a series R-L to a scan window");
  fit->add_option("--scan", scan_path, "Scan CSV (f_hz, re_ohm, im_ohm)")
      ->required();
  fit->add_option("--f-nominal", f_nominal, "Nominal frequency (Hz)");
  fit->add_option("--half-window", half_window, "Fit half window (Hz)");
  fit->add_option("--out", out_dir, "Output directory")->required();

  auto* sim = app.add_subcommand("simulate", "Integrate the fault scenario");
  sim->add_option("--config", config_path, "Scenario file")->required();
  sim->add_option("--out", out_dir, "Output directory (overrides config)");

  auto* tl = app.add_subcommand("tlroa", "Compute the reverse-time boundary");
  tl->add_option("--config", config_path, "Scenario file")->required();
  tl->add_option("--out", out_dir, "Output directory (overrides config)");
  tl->add_option("--horizon", horizon, "Override roa.horizon_s");

  auto* cct = app.add_subcommand("cct", "Critical clearing time vs a boundary");
  cct->add_option("--config", config_path, "Scenario file")->required();
  cct->add_option("--boundary", boundary_path, "boundary.csv from `tlroa`")
      ->required();
  cct->add_option("--out", out_dir, "Output directory (overrides config)");
  cct->add_option("--search-window", search_window,
                  "Fault search window (s)");

  auto* grid = app.add_subcommand("roa-grid",
                                  "Brute-force forward-simulation grid");
  grid->add_option("--config", config_path, "Scenario file")->required();
  grid->add_option("--out", out_dir, "Output directory (overrides config)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) {
      const auto res = tlroa::cmd_fit(scan_path, f_nominal, half_window,
                                      out_dir);
      std::cout << "r_lg = " << res.fit.r_lg << " ohm, l_g = " << res.fit.l_g
                << " H (corner " << res.fit.f_corner << " Hz)\n"
                << "wrote " << res.report_path << "\n";
    } else if (sim->parsed()) {
      const auto res = tlroa::cmd_simulate(load_config(config_path, out_dir));
      std::cout << "integrated " << res.trajectory.samples.size()
                << " samples (" << res.trajectory.steps_taken << " steps)\n"
                << "wrote " << res.trajectory_path << "\n";
    } else if (tl->parsed()) {
      tlroa::ScenarioConfig cfg = load_config(config_path, out_dir);
      if (horizon >= 0.0) cfg.horizon_s = horizon;
      const auto res = tlroa::cmd_tlroa(cfg);
      std::cout << "boundary: " << res.boundary.vertices.size()
                << " vertices, horizon " << res.boundary.horizon_t << " s\n"
                << "wrote " << res.boundary_path << "\n";
    } else if (cct->parsed()) {
      const auto res = tlroa::cmd_cct(load_config(config_path, out_dir),
                                      boundary_path, search_window);
      if (res.cct.never_exits)
        std::cout << "cct = infinite (never exits within window)\n";
      else
        std::cout << "cct = " << res.cct.cct << " s\n";
      std::cout << "wrote " << res.report_path << "\n";
    } else if (grid->parsed()) {
      const auto res = tlroa::cmd_roa_grid(load_config(config_path, out_dir));
      std::size_t conv = 0;
      for (bool b : res.grid.converged) conv += b ? 1 : 0;
      std::cout << "grid " << res.grid.nx << "x" << res.grid.ny << ": " << conv
                << " converged (horizon " << res.horizon_used << " s)\n"
                << "wrote " << res.grid_path << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 0;
}
