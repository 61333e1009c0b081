#include <doctest.h>

#include <cmath>
#include <numbers>

#include "test_helpers.hpp"
#include "tlroa/commands.hpp"
#include "tlroa/scenario.hpp"

using namespace tlroa;
using tlroa::testing::load_case1;
using tlroa::testing::load_case2;

TEST_CASE("scenario: case-1 normalization produces the expected bases") {
  const ScenarioConfig cfg = load_case1();
  const SystemModel m = normalize(cfg);

  // Z_base = 1.5 * V^2 / S on the peak phase-voltage convention
  const double zb = 1.5 * cfg.v_base_v * cfg.v_base_v / cfg.s_base_va;
  CHECK(m.bases.z_base == doctest::Approx(zb).epsilon(1e-14));
  CHECK(m.grid.r_lg == doctest::Approx(9.85e-5 / zb).epsilon(1e-14));
  CHECK(m.grid.l_g == doctest::Approx(2.17e-6 / zb).epsilon(1e-14));
  CHECK(m.grid.v_g == 1.0);

  // freq_base "f0": gains scale by omega0 / (2*pi)
  const double scale = 314.0 / (2.0 * std::numbers::pi);
  CHECK(m.pll.kp == doctest::Approx(0.025 * scale).epsilon(1e-14));
  CHECK(m.pll.ki == doctest::Approx(1.5 * scale).epsilon(1e-14));
  // x2_max auto rule
  CHECK(m.pll.x2_max == doctest::Approx(31.4).epsilon(1e-14));
}

TEST_CASE("scenario: round trip is the identity") {
  const ScenarioConfig cfg = load_case1();
  const std::string once = cfg.to_json_string();
  const ScenarioConfig back = parse_scenario(json::parse(once));
  CHECK(back == cfg);
  CHECK(back.to_json_string() == once);
  CHECK(config_hash(back) == config_hash(cfg));
}

TEST_CASE("scenario: per-unit config matches the SI one after normalization") {
  const ScenarioConfig si = load_case1();
  const SystemModel m_si = normalize(si);

  ScenarioConfig pu = si;
  pu.units = "pu";
  pu.r_lg = m_si.grid.r_lg;
  pu.l_g = m_si.grid.l_g;
  pu.r_ls = si.r_ls / m_si.bases.z_base;
  pu.l_s = si.l_s / m_si.bases.z_base;
  // z_f is zero either way for the bolted case
  const SystemModel m_pu = normalize(pu);
  CHECK(m_pu.grid.r_lg == doctest::Approx(m_si.grid.r_lg).epsilon(1e-14));
  CHECK(m_pu.grid.l_g == doctest::Approx(m_si.grid.l_g).epsilon(1e-14));
  CHECK(m_pu.pll.kp == m_si.pll.kp);
}

TEST_CASE("scenario: weak-grid multiplier scales the equivalent") {
  const SystemModel m1 = normalize(load_case1());
  const SystemModel m2 = normalize(load_case2());
  CHECK(m2.grid.r_lg == doctest::Approx(2.0 * m1.grid.r_lg).epsilon(1e-14));
  CHECK(m2.grid.l_g == doctest::Approx(2.0 * m1.grid.l_g).epsilon(1e-14));
}

TEST_CASE("scenario: validation failures") {
  const ScenarioConfig base = load_case1();

  SUBCASE("clearing before application") {
    json j = base.to_json();
    j["fault"]["clear_s"] = 1.0;
    CHECK_THROWS_AS(parse_scenario(j), ValidationError);
  }
  SUBCASE("unknown unit system") {
    json j = base.to_json();
    j["units"] = "imperial";
    CHECK_THROWS_AS(parse_scenario(j), ValidationError);
  }
  SUBCASE("grid must have exactly one source") {
    json j = base.to_json();
    j["grid"].erase("inline");
    CHECK_THROWS_AS(parse_scenario(j), ValidationError);
    j["grid"]["inline"] = base.to_json()["grid"]["inline"];
    j["grid"]["scan"] = {{"file", "nope.csv"},
                         {"f_nominal_hz", 50.0},
                         {"omega0_rad_per_s", 314.0},
                         {"omega_g_rad_per_s", 314.0}};
    CHECK_THROWS_AS(parse_scenario(j), ValidationError);
  }
  SUBCASE("missing keys are named") {
    json j = base.to_json();
    j["plant"].erase("pll");
    CHECK_THROWS_WITH_AS(parse_scenario(j), doctest::Contains("plant.pll"),
                         ValidationError);
  }
  SUBCASE("window must cover the fault") {
    json j = base.to_json();
    j["solver"]["t_end_s"] = 1.55;
    CHECK_THROWS_AS(parse_scenario(j), ValidationError);
  }
  SUBCASE("referenced scan file must exist") {
    json j = base.to_json();
    j["grid"].erase("inline");
    j["grid"]["scan"] = {{"file", "does_not_exist.csv"},
                         {"f_nominal_hz", 50.0},
                         {"omega0_rad_per_s", 314.0},
                         {"omega_g_rad_per_s", 314.0}};
    CHECK_THROWS_WITH_AS(parse_scenario(j, "/tmp"),
                         doctest::Contains("does_not_exist.csv"),
                         ValidationError);
  }
}

TEST_CASE("scenario: scan-sourced grid runs the fit at load") {
  ScenarioConfig cfg = load_case1();
  json j = cfg.to_json();
  j["grid"].erase("inline");
  j["grid"]["scan"] = {{"file", "scan_synthetic.csv"},
                       {"f_nominal_hz", 50.0},
                       {"half_window_hz", 5.0},
                       {"turns_ratio", 1.0},
                       {"v_g_pu", 1.0},
                       {"omega0_rad_per_s", 314.0},
                       {"omega_g_rad_per_s", 314.0}};
  const ScenarioConfig scan_cfg = parse_scenario(j, TLROA_SCENARIO_DIR);
  const SystemModel m = normalize(scan_cfg);
  const SystemModel m_inline = normalize(cfg);
  // the bundled synthetic scan embeds the same R-L plus a far resonance
  CHECK(m.grid.r_lg ==
        doctest::Approx(m_inline.grid.r_lg).epsilon(1e-3));
  CHECK(m.grid.l_g == doctest::Approx(m_inline.grid.l_g).epsilon(1e-2));
}

TEST_CASE("scenario: equilibrium of the case study") {
  // torque balance: sin(x1*) = l*omega/v_f with iq = 0, id = 1
  const SystemModel m = normalize(load_case1());
  const RomCoefficients c = steady_coefficients(m);
  const Equilibrium eq = solve_post_equilibrium(m, c);
  const double vf = terminal_voltage(m.grid, {1.0, 0.0});
  const double expected = std::asin(m.grid.l_g * 314.0 * 1.0 / vf);
  CHECK(eq.state.x1 == doctest::Approx(expected).epsilon(1e-10));
  CHECK(eq.state.x3 == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(eq.stability == StabilityClass::stable);
}
