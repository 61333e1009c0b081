#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>

#include "tlroa/io.hpp"
#include "tlroa/scenario.hpp"

namespace tlroa {

/// Hash of the physics content of a scenario: the output location does not
/// change what a run computes, so artifacts stay valid when relocated.
inline std::string config_hash(const ScenarioConfig& cfg) {
  json j = cfg.to_json();
  j.erase("output_dir");
  return fnv1a64_hex(j.dump(2));
}

/// Stable post-disturbance equilibrium of the scenario's operating point.
inline Equilibrium solve_post_equilibrium(const SystemModel& m,
                                          const RomCoefficients& coeffs,
                                          double branch_shift = 0.0) {
  const double amp = coeffs.t_e_amp_ki + coeffs.t_e_amp_kp;
  const double ratio =
      std::clamp((coeffs.t_m_eq - coeffs.t_e_const) / amp, -1.0, 1.0);
  const RomState guess{std::asin(ratio) + branch_shift, 0.0};
  return find_equilibrium(coeffs, m.pll, guess);
}

struct FitCommandResult {
  FitResult fit;
  std::string report_path;
  std::string window_csv_path;
};

/// `fit`: ingest a scan CSV, fit the series R-L around the nominal frequency,
/// emit the JSON report and the windowed reactance/fit-line CSV.
inline FitCommandResult cmd_fit(const std::string& scan_path, double f_nominal,
                                double half_window,
                                const std::string& out_dir) {
  const ImpedanceScan scan = read_scan_csv(scan_path);
  const FitResult fit = fit_impedance(scan, f_nominal, half_window);
  if (fit.f_corner_clamped)
    std::cerr << "warning: corner frequency " << fit.f_corner
              << " Hz outside the scan range; resistance clamped to the "
                 "nearest scan point\n";

  std::string win_csv = "f_hz, im_ohm, fitted_im_ohm\n";
  const double b = -fit.slope_m * fit.f_corner;
  for (const auto& p : scan.points) {
    if (p.f_hz < fit.window_lo || p.f_hz > fit.window_hi) continue;
    win_csv += fmt_double(p.f_hz);
    win_csv += ", ";
    win_csv += fmt_double(p.z_ohm.imag());
    win_csv += ", ";
    win_csv += fmt_double(fit.slope_m * p.f_hz + b);
    win_csv += "\n";
  }

  FitCommandResult res;
  res.fit = fit;
  res.report_path = (std::filesystem::path(out_dir) / "fit.json").string();
  res.window_csv_path =
      (std::filesystem::path(out_dir) / "fit_window.csv").string();
  write_file(res.report_path, fit_report_json(fit).dump(2) + "\n");
  write_file(res.window_csv_path, win_csv);
  return res;
}

struct SimulateCommandResult {
  Trajectory trajectory;
  Equilibrium pre_fault_eq;
  BuiltSchedule schedule;
  std::string trajectory_path;
  std::string manifest_path;
};

/// `simulate`: expand the fault into a schedule, start from the pre-fault
/// equilibrium and integrate the full window.
inline SimulateCommandResult cmd_simulate(const ScenarioConfig& cfg) {
  const SystemModel m = normalize(cfg);
  const RomCoefficients steady = steady_coefficients(m);

  SimulateCommandResult res;
  res.pre_fault_eq = solve_post_equilibrium(m, steady);
  res.schedule =
      build_schedule(m.fault, 0.0, cfg.t_end_s, m.loading, m.grid);
  res.trajectory = integrate_forward(res.pre_fault_eq.state, 0.0, cfg.t_end_s,
                                     res.schedule.events,
                                     res.schedule.injections, m.pll, m.grid,
                                     m.solver);

  const std::string out_dir = cfg.output_dir;
  res.trajectory_path =
      (std::filesystem::path(out_dir) / "trajectory.csv").string();
  res.manifest_path =
      (std::filesystem::path(out_dir) / "manifest.json").string();
  const std::string csv = trajectory_csv(res.trajectory, m.pll.x2_max);
  write_file(res.trajectory_path, csv);
  RunManifest manifest(config_hash(cfg));
  manifest.add("trajectory.csv", csv);
  write_file(res.manifest_path, manifest.to_json().dump(2) + "\n");
  return res;
}

struct TlroaCommandResult {
  TlroaBoundary boundary;
  LyapunovSeed seed;
  std::string boundary_path;
  std::string sidecar_path;
  std::string manifest_path;
};

/// Forward-convergence predicate used to certify seeds.
inline auto make_attracted_check(const SystemModel& m, const Equilibrium& eq,
                                 const RomCoefficients& coeffs) {
  return [&m, eq, coeffs](const RomState& s) {
    return converges_to(s, eq, m.seed_check_horizon, coeffs, m.pll, m.solver,
                        m.conv);
  };
}

/// `tlroa`: equilibrium, Lyapunov level set, reverse-time boundary.
inline TlroaCommandResult cmd_tlroa(const ScenarioConfig& cfg) {
  const SystemModel m = normalize(cfg);
  const RomCoefficients steady = steady_coefficients(m);
  const Equilibrium eq = solve_post_equilibrium(m, steady);
  if (eq.stability != StabilityClass::stable)
    throw ComputationError("cmd_tlroa: operating point is not a stable "
                           "equilibrium (" +
                           std::string(to_string(eq.stability)) + ")");

  const Mat2 p = solve_lyapunov(eq.jacobian, Mat2::identity());

  TlroaCommandResult res;
  res.seed = choose_seed(eq, p, Mat2::identity(), m.seeds,
                         make_attracted_check(m, eq, steady));
  res.boundary =
      compute_tlroa(res.seed, m.horizon, m.pll, steady, m.solver, m.refine);

  const std::string out_dir = cfg.output_dir;
  res.boundary_path =
      (std::filesystem::path(out_dir) / "boundary.csv").string();
  res.sidecar_path =
      (std::filesystem::path(out_dir) / "boundary_meta.json").string();
  res.manifest_path =
      (std::filesystem::path(out_dir) / "manifest.json").string();

  const std::string csv = boundary_csv(res.boundary);
  const std::string sidecar =
      boundary_sidecar_json(res.boundary, config_hash(cfg), m.seeds.n_points,
                            m.seeds.x1_extent)
          .dump(2) +
      "\n";
  write_file(res.boundary_path, csv);
  write_file(res.sidecar_path, sidecar);
  RunManifest manifest(config_hash(cfg));
  manifest.add("boundary.csv", csv);
  manifest.add("boundary_meta.json", sidecar);
  write_file(res.manifest_path, manifest.to_json().dump(2) + "\n");
  return res;
}

/// Loads a boundary written by cmd_tlroa, verifying its sidecar against the
/// config that is about to consume it.
inline TlroaBoundary load_boundary(const std::string& boundary_path,
                                   const ScenarioConfig& cfg) {
  const std::string csv = read_file(boundary_path);
  std::filesystem::path sp(boundary_path);
  sp.replace_filename(sp.stem().string() + "_meta.json");
  nlohmann::ordered_json meta;
  try {
    meta = nlohmann::ordered_json::parse(read_file(sp.string()));
  } catch (const std::exception& e) {
    throw ValidationError("boundary sidecar " + sp.string() + ": " + e.what());
  }
  if (meta.at("config_hash").get<std::string>() != config_hash(cfg))
    throw ValidationError(
        "boundary was produced by a different configuration (sidecar hash "
        "mismatch)");

  TlroaBoundary b;
  b.vertices = parse_boundary_csv(csv);
  b.horizon_t = meta.at("horizon_s").get<double>();
  b.level_c = meta.at("seed_settings").at("level_c").get<double>();
  const auto pj = meta.at("seed_settings").at("p");
  b.p = {pj.at(0).get<double>(), pj.at(1).get<double>(),
         pj.at(1).get<double>(), pj.at(2).get<double>()};
  b.x3_scale = meta.at("x3_scale_rad_per_s").get<double>();
  const auto ej = meta.at("equilibrium");
  b.equilibrium.state = {ej.at("x1_rad").get<double>(),
                         ej.at("x3_rad_per_s").get<double>()};
  b.equilibrium.branch_index = ej.at("branch_index").get<int>();
  b.rebuild_scaled();
  return b;
}

struct CctCommandResult {
  CctResult cct;
  std::string report_path;
  std::string manifest_path;
};

/// `cct`: time for the fault-period trajectory, started at the pre-fault
/// equilibrium, to leave the boundary.
inline CctCommandResult cmd_cct(const ScenarioConfig& cfg,
                                const std::string& boundary_path,
                                double search_window = 10.0) {
  const SystemModel m = normalize(cfg);
  const TlroaBoundary boundary = load_boundary(boundary_path, cfg);
  const RomCoefficients steady = steady_coefficients(m);
  const Equilibrium eq = solve_post_equilibrium(m, steady);
  if (std::abs(eq.state.x1 - boundary.equilibrium.state.x1) > 1e-6 ||
      std::abs(eq.state.x3 - boundary.equilibrium.state.x3) > 1e-6)
    throw ValidationError(
        "cmd_cct: boundary equilibrium does not match the configuration");

  const RomCoefficients during_fault = fault_coefficients(m);
  CctSettings cs;
  cs.search_window = search_window;
  cs.resolution = 1e-3;
  cs.edge_tol = m.edge_tol;

  CctCommandResult res;
  res.cct = critical_clearing_time(eq.state, during_fault, m.pll, boundary,
                                   m.solver, cs);

  nlohmann::ordered_json j;
  if (res.cct.never_exits)
    j["cct_s"] = "infinite";
  else
    j["cct_s"] = res.cct.cct;
  j["exit_point"] = {{"x1_rad", res.cct.exit_state.x1},
                     {"x3_rad_per_s", res.cct.exit_state.x3}};
  j["search_window_s"] = cs.search_window;
  j["resolution_s"] = cs.resolution;

  const std::string out_dir = cfg.output_dir;
  res.report_path = (std::filesystem::path(out_dir) / "cct.json").string();
  res.manifest_path =
      (std::filesystem::path(out_dir) / "manifest_cct.json").string();
  const std::string report = j.dump(2) + "\n";
  write_file(res.report_path, report);
  RunManifest manifest(config_hash(cfg));
  manifest.add("cct.json", report);
  write_file(res.manifest_path, manifest.to_json().dump(2) + "\n");
  return res;
}

struct RoaGridCommandResult {
  RoaGrid grid;
  double horizon_used{0.0};
  std::string grid_path;
  std::string manifest_path;
};

/// Auto horizon for the oracle: boundary horizon plus the linear-decay time
/// from the box scale down to the convergence ball, plus dwell margin.
inline double auto_grid_horizon(const SystemModel& m, const Equilibrium& eq,
                                const StateBox& box) {
  const double rate = -0.5 * eq.jacobian.trace();  // contraction of the spiral
  const double span =
      std::max({std::abs(box.x1_lo - eq.state.x1),
                std::abs(box.x1_hi - eq.state.x1),
                std::abs(box.x3_lo - eq.state.x3) / std::max(1.0, m.pll.x2_max),
                std::abs(box.x3_hi - eq.state.x3) / std::max(1.0, m.pll.x2_max),
                1.0});
  const double decay =
      rate > 0.0 ? std::log(span / m.conv.ball_radius) / rate : 10.0;
  return m.horizon + decay + 2.0 * m.conv.dwell;
}

/// `roa-grid`: brute-force forward-simulation classification over a box.
inline RoaGridCommandResult cmd_roa_grid(const ScenarioConfig& cfg) {
  const SystemModel m = normalize(cfg);
  const RomCoefficients steady = steady_coefficients(m);
  const Equilibrium eq = solve_post_equilibrium(m, steady);

  m.grid_box.validate();
  RoaGridCommandResult res;
  res.horizon_used =
      m.grid_horizon > 0.0 ? m.grid_horizon : auto_grid_horizon(m, eq, m.grid_box);
  res.grid = brute_force_roa(m.grid_box, m.grid_nx, m.grid_ny,
                             res.horizon_used, eq, steady, m.pll, m.solver,
                             m.conv);

  const std::string out_dir = cfg.output_dir;
  res.grid_path = (std::filesystem::path(out_dir) / "roa_grid.csv").string();
  res.manifest_path =
      (std::filesystem::path(out_dir) / "manifest_roa_grid.json").string();
  const std::string csv = roa_grid_csv(res.grid);
  write_file(res.grid_path, csv);
  RunManifest manifest(config_hash(cfg));
  manifest.add("roa_grid.csv", csv);
  write_file(res.manifest_path, manifest.to_json().dump(2) + "\n");
  return res;
}

}  // namespace tlroa
