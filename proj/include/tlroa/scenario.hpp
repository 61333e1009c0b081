#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

#include <json.hpp>

#include "tlroa/errors.hpp"
#include "tlroa/integrate.hpp"
#include "tlroa/model.hpp"
#include "tlroa/network.hpp"
#include "tlroa/roa.hpp"

namespace tlroa {

using json = nlohmann::ordered_json;

/// Full experiment description as read from a scenario file. Raw values are
/// kept in the declared unit system; normalize() produces the per-unit model.
///
/// With units = "si" the grid and transformer values are ohms/henries and the
/// fault impedance is ohms. With units = "pu" resistances are per-unit and
/// inductances carry L/Z_base (seconds).
struct ScenarioConfig {
  std::string units{"si"};

  // plant
  int n_turbines{1};
  double s_base_va{0.0};
  double v_base_v{0.0};
  double r_ls{0.0}, l_s{0.0};  ///< single-WT transformer
  double pll_kp{0.0}, pll_ki{0.0};
  double x2_max{0.0};              ///< rad/s, 0 = auto (0.1 * omega0)
  std::string pll_freq_base{"f0"}; ///< "f0" | "omega0" | "none"
  double id_pu{1.0}, iq_pu{0.0};

  // grid (exactly one source)
  bool grid_inline{true};
  double r_lg{0.0}, l_g{0.0}, v_g_pu{1.0};
  double omega0{0.0}, omega_g{0.0};
  std::string scan_file;
  double f_nominal_hz{50.0}, half_window_hz{5.0}, turns_ratio{1.0};
  double weak_multiplier{1.0};

  // fault
  double apply_s{0.0}, clear_s{0.0};
  double z_f_re{0.0}, z_f_im{0.0};
  double k_factor{0.0}, i_max_pu{1.0}, ramp_pu_per_s{2.0};

  // solver
  std::string method{"rkf45"};
  double rel_tol{1e-8}, abs_tol{1e-10};
  double fixed_step_s{1e-4}, sample_interval_s{1e-3};
  double escape_radius{1e3};
  double t_end_s{0.0};

  // roa
  double horizon_s{2.25};
  std::size_t n_seeds{256};
  double seed_x1_extent_rad{0.2};
  int max_level_halvings{10};
  double refine_max_arc{0.05};
  int refine_depth_cap{8};
  double x3_scale{0.0};  ///< 0 = auto (x2_max)
  double edge_tolerance{1e-9};
  double conv_ball_radius{1e-3}, conv_dwell_s{0.1};
  double seed_check_horizon_s{40.0};
  double grid_x1_lo{0.0}, grid_x1_hi{0.0}, grid_x3_lo{0.0}, grid_x3_hi{0.0};
  std::size_t grid_nx{41}, grid_ny{41};
  double grid_horizon_s{0.0};  ///< 0 = auto

  std::string output_dir{"out"};

  // not serialized: directory of the config file, anchors relative paths
  std::string config_dir;

  bool operator==(const ScenarioConfig& o) const {
    return to_json_string() == o.to_json_string();
  }

  json to_json() const;
  std::string to_json_string() const { return to_json().dump(2) + "\n"; }
};

namespace detail {

inline const json& require(const json& j, const char* key,
                           const std::string& where) {
  auto it = j.find(key);
  if (it == j.end())
    throw ValidationError("config: missing key `" + where + key + "`");
  return *it;
}

template <class T>
inline T require_as(const json& j, const char* key, const std::string& where) {
  try {
    return require(j, key, where).get<T>();
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw ValidationError("config: bad value for `" + where + key +
                          "`: " + e.what());
  }
}

template <class T>
inline T opt_as(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  return it->get<T>();
}

}  // namespace detail

inline ScenarioConfig parse_scenario(const json& root,
                                     const std::string& config_dir = ".") {
  using detail::opt_as;
  using detail::require;
  using detail::require_as;

  ScenarioConfig c;
  c.config_dir = config_dir;
  c.units = require_as<std::string>(root, "units", "");
  if (c.units != "si" && c.units != "pu")
    throw ValidationError("config: units must be \"si\" or \"pu\"");

  const json& plant = require(root, "plant", "");
  c.n_turbines = require_as<int>(plant, "n_turbines", "plant.");
  c.s_base_va = require_as<double>(plant, "s_base_va", "plant.");
  c.v_base_v = require_as<double>(plant, "v_base_v", "plant.");
  const json& xf = require(plant, "transformer", "plant.");
  c.r_ls = require_as<double>(xf, "r_ls", "plant.transformer.");
  c.l_s = require_as<double>(xf, "l_s", "plant.transformer.");
  const json& pll = require(plant, "pll", "plant.");
  c.pll_kp = require_as<double>(pll, "kp", "plant.pll.");
  c.pll_ki = require_as<double>(pll, "ki", "plant.pll.");
  c.x2_max = opt_as<double>(pll, "x2_max_rad_per_s", 0.0);
  c.pll_freq_base = opt_as<std::string>(pll, "freq_base", "f0");
  if (c.pll_freq_base != "f0" && c.pll_freq_base != "omega0" &&
      c.pll_freq_base != "none")
    throw ValidationError(
        "config: plant.pll.freq_base must be \"f0\", \"omega0\" or \"none\"");
  const json& loading = require(plant, "loading", "plant.");
  c.id_pu = require_as<double>(loading, "id_pu", "plant.loading.");
  c.iq_pu = require_as<double>(loading, "iq_pu", "plant.loading.");

  const json& grid = require(root, "grid", "");
  const bool has_inline = grid.contains("inline");
  const bool has_scan = grid.contains("scan");
  if (has_inline == has_scan)
    throw ValidationError(
        "config: grid must declare exactly one of `inline` or `scan`");
  c.grid_inline = has_inline;
  if (has_inline) {
    const json& gi = grid["inline"];
    c.r_lg = require_as<double>(gi, "r_lg", "grid.inline.");
    c.l_g = require_as<double>(gi, "l_g", "grid.inline.");
    c.v_g_pu = require_as<double>(gi, "v_g_pu", "grid.inline.");
    c.omega0 = require_as<double>(gi, "omega0_rad_per_s", "grid.inline.");
    c.omega_g = require_as<double>(gi, "omega_g_rad_per_s", "grid.inline.");
  } else {
    const json& gs = grid["scan"];
    c.scan_file = require_as<std::string>(gs, "file", "grid.scan.");
    c.f_nominal_hz = require_as<double>(gs, "f_nominal_hz", "grid.scan.");
    c.half_window_hz = opt_as<double>(gs, "half_window_hz", 5.0);
    c.turns_ratio = opt_as<double>(gs, "turns_ratio", 1.0);
    c.v_g_pu = opt_as<double>(gs, "v_g_pu", 1.0);
    c.omega0 = require_as<double>(gs, "omega0_rad_per_s", "grid.scan.");
    c.omega_g = require_as<double>(gs, "omega_g_rad_per_s", "grid.scan.");
    const auto p = std::filesystem::path(config_dir) / c.scan_file;
    if (!std::filesystem::exists(p))
      throw ValidationError("config: scan file not found: " + p.string());
  }
  c.weak_multiplier = opt_as<double>(grid, "weak_multiplier", 1.0);

  const json& fault = require(root, "fault", "");
  c.apply_s = require_as<double>(fault, "apply_s", "fault.");
  c.clear_s = require_as<double>(fault, "clear_s", "fault.");
  const json& zf = require(fault, "z_f", "fault.");
  c.z_f_re = require_as<double>(zf, "re", "fault.z_f.");
  c.z_f_im = require_as<double>(zf, "im", "fault.z_f.");
  c.k_factor = require_as<double>(fault, "k_factor", "fault.");
  c.i_max_pu = require_as<double>(fault, "i_max_pu", "fault.");
  c.ramp_pu_per_s = require_as<double>(fault, "ramp_pu_per_s", "fault.");

  const json& solver = require(root, "solver", "");
  c.method = opt_as<std::string>(solver, "method", "rkf45");
  if (c.method != "rkf45" && c.method != "rk4")
    throw ValidationError("config: solver.method must be \"rkf45\" or \"rk4\"");
  c.rel_tol = opt_as<double>(solver, "rel_tol", 1e-8);
  c.abs_tol = opt_as<double>(solver, "abs_tol", 1e-10);
  c.fixed_step_s = opt_as<double>(solver, "fixed_step_s", 1e-4);
  c.sample_interval_s = opt_as<double>(solver, "sample_interval_s", 1e-3);
  c.escape_radius = opt_as<double>(solver, "escape_radius", 1e3);
  c.t_end_s = require_as<double>(solver, "t_end_s", "solver.");

  const json& roa = require(root, "roa", "");
  c.horizon_s = require_as<double>(roa, "horizon_s", "roa.");
  c.n_seeds = opt_as<std::size_t>(roa, "n_seeds", 256);
  c.seed_x1_extent_rad = opt_as<double>(roa, "seed_x1_extent_rad", 0.2);
  c.max_level_halvings = opt_as<int>(roa, "max_level_halvings", 10);
  c.refine_max_arc = opt_as<double>(roa, "refine_max_arc", 0.05);
  c.refine_depth_cap = opt_as<int>(roa, "refine_depth_cap", 8);
  c.x3_scale = opt_as<double>(roa, "x3_scale_rad_per_s", 0.0);
  c.edge_tolerance = opt_as<double>(roa, "edge_tolerance", 1e-9);
  c.conv_ball_radius = opt_as<double>(roa, "conv_ball_radius", 1e-3);
  c.conv_dwell_s = opt_as<double>(roa, "conv_dwell_s", 0.1);
  c.seed_check_horizon_s = opt_as<double>(roa, "seed_check_horizon_s", 40.0);
  if (roa.contains("grid")) {
    const json& rg = roa["grid"];
    c.grid_x1_lo = require_as<double>(rg, "x1_lo", "roa.grid.");
    c.grid_x1_hi = require_as<double>(rg, "x1_hi", "roa.grid.");
    c.grid_x3_lo = require_as<double>(rg, "x3_lo", "roa.grid.");
    c.grid_x3_hi = require_as<double>(rg, "x3_hi", "roa.grid.");
    c.grid_nx = opt_as<std::size_t>(rg, "nx", 41);
    c.grid_ny = opt_as<std::size_t>(rg, "ny", 41);
    c.grid_horizon_s = opt_as<double>(rg, "horizon_s", 0.0);
  }

  c.output_dir = opt_as<std::string>(root, "output_dir", "out");

  // cross-field validation, before any computation
  if (!(c.s_base_va > 0.0) || !(c.v_base_v > 0.0))
    throw ValidationError("config: plant bases must be positive");
  if (!(c.clear_s > c.apply_s))
    throw ValidationError("config: fault.clear_s must exceed fault.apply_s");
  if (!(c.t_end_s > c.clear_s))
    throw ValidationError("config: solver.t_end_s must exceed fault.clear_s");
  if (!(c.apply_s > 0.0))
    throw ValidationError("config: fault.apply_s must be > 0");
  if (!(c.ramp_pu_per_s > 0.0))
    throw ValidationError("config: fault.ramp_pu_per_s must be > 0");
  if (!(c.weak_multiplier > 0.0))
    throw ValidationError("config: grid.weak_multiplier must be > 0");
  if (!(c.horizon_s >= 0.0))
    throw ValidationError("config: roa.horizon_s must be >= 0");
  return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const std::exception& e) {
    throw ValidationError("config: " + path + ": " + e.what());
  }
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_scenario(root, dir.empty() ? "." : dir.string());
}

inline json ScenarioConfig::to_json() const {
  json root;
  root["units"] = units;
  json plant;
  plant["n_turbines"] = n_turbines;
  plant["s_base_va"] = s_base_va;
  plant["v_base_v"] = v_base_v;
  plant["transformer"] = {{"r_ls", r_ls}, {"l_s", l_s}};
  plant["pll"] = {{"kp", pll_kp},
                  {"ki", pll_ki},
                  {"x2_max_rad_per_s", x2_max},
                  {"freq_base", pll_freq_base}};
  plant["loading"] = {{"id_pu", id_pu}, {"iq_pu", iq_pu}};
  root["plant"] = plant;

  json grid;
  if (grid_inline) {
    grid["inline"] = {{"r_lg", r_lg},
                      {"l_g", l_g},
                      {"v_g_pu", v_g_pu},
                      {"omega0_rad_per_s", omega0},
                      {"omega_g_rad_per_s", omega_g}};
  } else {
    grid["scan"] = {{"file", scan_file},
                    {"f_nominal_hz", f_nominal_hz},
                    {"half_window_hz", half_window_hz},
                    {"turns_ratio", turns_ratio},
                    {"v_g_pu", v_g_pu},
                    {"omega0_rad_per_s", omega0},
                    {"omega_g_rad_per_s", omega_g}};
  }
  grid["weak_multiplier"] = weak_multiplier;
  root["grid"] = grid;

  root["fault"] = {{"apply_s", apply_s},
                   {"clear_s", clear_s},
                   {"z_f", {{"re", z_f_re}, {"im", z_f_im}}},
                   {"k_factor", k_factor},
                   {"i_max_pu", i_max_pu},
                   {"ramp_pu_per_s", ramp_pu_per_s}};

  root["solver"] = {{"method", method},
                    {"rel_tol", rel_tol},
                    {"abs_tol", abs_tol},
                    {"fixed_step_s", fixed_step_s},
                    {"sample_interval_s", sample_interval_s},
                    {"escape_radius", escape_radius},
                    {"t_end_s", t_end_s}};

  json roa;
  roa["horizon_s"] = horizon_s;
  roa["n_seeds"] = n_seeds;
  roa["seed_x1_extent_rad"] = seed_x1_extent_rad;
  roa["max_level_halvings"] = max_level_halvings;
  roa["refine_max_arc"] = refine_max_arc;
  roa["refine_depth_cap"] = refine_depth_cap;
  roa["x3_scale_rad_per_s"] = x3_scale;
  roa["edge_tolerance"] = edge_tolerance;
  roa["conv_ball_radius"] = conv_ball_radius;
  roa["conv_dwell_s"] = conv_dwell_s;
  roa["seed_check_horizon_s"] = seed_check_horizon_s;
  roa["grid"] = {{"x1_lo", grid_x1_lo}, {"x1_hi", grid_x1_hi},
                 {"x3_lo", grid_x3_lo}, {"x3_hi", grid_x3_hi},
                 {"nx", grid_nx},       {"ny", grid_ny},
                 {"horizon_s", grid_horizon_s}};
  root["roa"] = roa;
  root["output_dir"] = output_dir;
  return root;
}

/// Per-unit bases on the converter side (peak phase-voltage convention:
/// I_base = (2/3) S / V).
struct PuBases {
  double s_base{0.0};
  double v_base{0.0};
  double i_base{0.0};
  double z_base{0.0};
};

/// Normalized model: everything the analysis modules consume, in per-unit on
/// the converter base, with effective PLL gains in rad/s per pu voltage.
struct SystemModel {
  PuBases bases;
  PllParams pll;
  GridEquivalent grid;
  OperatingPoint loading;
  FaultSpec fault;
  SolverSettings solver;

  double horizon{0.0};
  SeedSettings seeds;
  RefineSettings refine;
  ConvergenceCriterion conv;
  double edge_tol{1e-9};
  double seed_check_horizon{40.0};
  StateBox grid_box;
  std::size_t grid_nx{0}, grid_ny{0};
  double grid_horizon{0.0};
};

/// Converts the raw scenario to the per-unit model. SI electrical inputs are
/// divided by the converter-base impedance exactly once, here; the PLL gain
/// scale resolves the declared per-unit frequency base.
inline SystemModel normalize(const ScenarioConfig& c) {
  SystemModel m;
  m.bases.s_base = c.s_base_va;
  m.bases.v_base = c.v_base_v;
  m.bases.i_base = (2.0 / 3.0) * c.s_base_va / c.v_base_v;
  m.bases.z_base = c.v_base_v / m.bases.i_base;

  double r_lg = c.r_lg;
  double l_g = c.l_g;
  double v_g = c.v_g_pu;
  if (!c.grid_inline) {
    const auto p = std::filesystem::path(c.config_dir) / c.scan_file;
    const ImpedanceScan scan = read_scan_csv(p.string());
    const FitResult fit =
        fit_impedance(scan, c.f_nominal_hz, c.half_window_hz);
    const GridEquivalent gf = referred_to_lv(fit, c.turns_ratio,
                                             c.v_g_pu * c.v_base_v, c.omega0,
                                             c.omega_g);
    r_lg = gf.r_lg;  // SI ohms/henries, referred to the converter side
    l_g = gf.l_g;
    v_g = gf.v_g / c.v_base_v;
  }

  const double zb = (c.units == "si" || !c.grid_inline) ? m.bases.z_base : 1.0;
  m.grid.r_lg = c.weak_multiplier * r_lg / zb;
  m.grid.l_g = c.weak_multiplier * l_g / zb;
  m.grid.v_g = v_g;
  m.grid.omega0 = c.omega0;
  m.grid.omega_g = c.omega_g;
  m.grid.validate();

  double gain_scale = 1.0;
  if (c.pll_freq_base == "f0")
    gain_scale = c.omega0 / (2.0 * std::numbers::pi);
  else if (c.pll_freq_base == "omega0")
    gain_scale = c.omega0;
  m.pll.kp = c.pll_kp * gain_scale;
  m.pll.ki = c.pll_ki * gain_scale;
  m.pll.x2_max = c.x2_max > 0.0 ? c.x2_max : 0.1 * c.omega0;
  m.pll.validate();

  m.loading = {c.id_pu, c.iq_pu};

  const double zfb = (c.units == "si") ? m.bases.z_base : 1.0;
  m.fault.t_apply = c.apply_s;
  m.fault.t_clear = c.clear_s;
  m.fault.z_f = {c.z_f_re / zfb, c.z_f_im / zfb};
  m.fault.k_factor = c.k_factor;
  m.fault.i_max = c.i_max_pu;
  m.fault.ramp_rate = c.ramp_pu_per_s;

  m.solver.method =
      c.method == "rk4" ? SolverMethod::rk4 : SolverMethod::rkf45;
  m.solver.rel_tol = c.rel_tol;
  m.solver.abs_tol = c.abs_tol;
  m.solver.fixed_step = c.fixed_step_s;
  m.solver.sample_interval = c.sample_interval_s;
  m.solver.escape_radius = c.escape_radius;
  m.solver.validate();

  m.horizon = c.horizon_s;
  m.seeds.n_points = c.n_seeds;
  m.seeds.x1_extent = c.seed_x1_extent_rad;
  m.seeds.max_halvings = c.max_level_halvings;
  m.refine.max_arc = c.refine_max_arc;
  m.refine.depth_cap = c.refine_depth_cap;
  m.refine.x3_scale = c.x3_scale;
  m.conv.ball_radius = c.conv_ball_radius;
  m.conv.dwell = c.conv_dwell_s;
  m.edge_tol = c.edge_tolerance;
  m.seed_check_horizon = c.seed_check_horizon_s;
  m.grid_box = {c.grid_x1_lo, c.grid_x1_hi, c.grid_x3_lo, c.grid_x3_hi};
  m.grid_nx = c.grid_nx;
  m.grid_ny = c.grid_ny;
  m.grid_horizon = c.grid_horizon_s;
  return m;
}

/// Post-disturbance (= pre-fault) frozen coefficients for the model.
inline RomCoefficients steady_coefficients(const SystemModel& m) {
  InjectionSchedule sched;
  const double v = terminal_voltage(m.grid, {m.loading.id_c, m.loading.iq_c});
  sched.segments.push_back({0.0, m.loading.id_c, 0.0, m.loading.iq_c, 0.0, v, 0.0});
  sched.t_end = 1.0;
  return compute_coefficients(m.pll, m.grid, sched, 0.0);
}

/// Fault-period frozen coefficients (retained voltage and limited currents).
inline RomCoefficients fault_coefficients(const SystemModel& m) {
  const FaultConditions fc =
      fault_conditions(m.grid, m.fault.z_f, {m.grid.v_g, 0.0},
                       {m.loading.id_c, m.loading.iq_c}, m.fault.k_factor,
                       m.fault.i_max);
  InjectionSchedule sched;
  sched.segments.push_back({0.0, fc.id_c, 0.0, fc.iq_c, 0.0, fc.v_f, 0.0});
  sched.t_end = 1.0;
  return compute_coefficients(m.pll, m.grid, sched, 0.0);
}

}  // namespace tlroa
