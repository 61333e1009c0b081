#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "test_helpers.hpp"
#include "tlroa/commands.hpp"
#include "tlroa/integrate.hpp"

using namespace tlroa;
using tlroa::testing::load_case1;

namespace {

struct Case1 {
  SystemModel m;
  RomCoefficients steady;
  Equilibrium eq;

  Case1() : m(normalize(load_case1())), steady(steady_coefficients(m)) {
    eq = solve_post_equilibrium(m, steady);
  }
};

InjectionSchedule constant_schedule(const SystemModel& m, double t_end) {
  InjectionSchedule s;
  const double v = terminal_voltage(m.grid, {m.loading.id_c, m.loading.iq_c});
  s.segments.push_back({0.0, m.loading.id_c, 0.0, m.loading.iq_c, 0.0, v, 0.0});
  s.t_end = t_end;
  return s;
}

}  // namespace

TEST_CASE("forward: equilibrium stays put for ten seconds") {
  Case1 c1;
  SolverSettings set = c1.m.solver;
  set.rel_tol = 1e-10;
  set.abs_tol = 1e-12;
  set.sample_interval = 0.01;
  const auto traj =
      integrate_forward(c1.eq.state, 0.0, 10.0, {}, constant_schedule(c1.m, 10.0),
                        c1.m.pll, c1.m.grid, set);
  for (const auto& s : traj.samples) {
    CHECK(std::abs(s.state.x1 - c1.eq.state.x1) < 1e-9);
    CHECK(std::abs(s.state.x3 - c1.eq.state.x3) < 1e-9);
  }
}

TEST_CASE("forward: event times are exact sample boundaries") {
  ScenarioConfig cfg = load_case1();
  cfg.id_pu = 0.6;  // forces a genuine post-fault ramp: 0.6 -> 1.0 at 2 pu/s
  const SystemModel m = normalize(cfg);
  const auto built = build_schedule(m.fault, 0.0, cfg.t_end_s, m.loading, m.grid);

  // RampEnd lands exactly (1.0 - 0.6)/2 = 0.2 s after clearing
  REQUIRE(built.events.events.size() == 3);
  CHECK(built.events.events[2].kind == EventKind::RampEnd);
  CHECK(built.events.events[2].t ==
        doctest::Approx(m.fault.t_clear + 0.2).epsilon(1e-15));

  const RomCoefficients steady = steady_coefficients(m);
  const Equilibrium eq = solve_post_equilibrium(m, steady);
  const auto traj = integrate_forward(eq.state, 0.0, cfg.t_end_s, built.events,
                                      built.injections, m.pll, m.grid, m.solver);
  for (const auto& ev : built.events.events) {
    bool found = false;
    for (const auto& s : traj.samples)
      if (s.t == ev.t) {
        found = true;
        break;
      }
    CHECK_MESSAGE(found, "event at t=", ev.t, " missing from samples");
  }
  CHECK(traj.saturation_violations == 0);
}

TEST_CASE("forward: rk4 endpoint converges at fourth order") {
  Case1 c1;
  const RomState x0{c1.eq.state.x1 + 0.3, 2.0};
  const auto sched = constant_schedule(c1.m, 2.0);

  SolverSettings ref = c1.m.solver;
  ref.method = SolverMethod::rkf45;
  ref.rel_tol = 1e-13;
  ref.abs_tol = 1e-14;
  ref.sample_interval = 0.0;
  const auto traj_ref =
      integrate_forward(x0, 0.0, 1.0, {}, sched, c1.m.pll, c1.m.grid, ref);
  const RomState xr = traj_ref.back_state();

  auto endpoint_err = [&](double h) {
    SolverSettings s = c1.m.solver;
    s.method = SolverMethod::rk4;
    s.fixed_step = h;
    s.sample_interval = 0.0;
    const auto tr =
        integrate_forward(x0, 0.0, 1.0, {}, sched, c1.m.pll, c1.m.grid, s);
    const RomState xe = tr.back_state();
    return std::max(std::abs(xe.x1 - xr.x1), std::abs(xe.x3 - xr.x3));
  };
  const double e1 = endpoint_err(1e-3);
  const double e2 = endpoint_err(5e-4);
  const double order = std::log2(e1 / e2);
  CHECK(order >= 3.5);
}

TEST_CASE("forward: adaptive and fixed-step endpoints agree") {
  Case1 c1;
  const RomState x0{c1.eq.state.x1 + 0.2, 1.0};
  const auto sched = constant_schedule(c1.m, 2.0);

  SolverSettings a = c1.m.solver;
  a.method = SolverMethod::rkf45;
  a.rel_tol = 1e-10;
  a.abs_tol = 1e-12;
  a.sample_interval = 0.0;
  SolverSettings b = c1.m.solver;
  b.method = SolverMethod::rk4;
  b.fixed_step = 1e-5;
  b.sample_interval = 0.0;

  const auto ta =
      integrate_forward(x0, 0.0, 1.0, {}, sched, c1.m.pll, c1.m.grid, a);
  const auto tb =
      integrate_forward(x0, 0.0, 1.0, {}, sched, c1.m.pll, c1.m.grid, b);
  CHECK(std::abs(ta.back_state().x1 - tb.back_state().x1) < 1e-7);
  CHECK(std::abs(ta.back_state().x3 - tb.back_state().x3) < 1e-7);
}

TEST_CASE("reverse then forward returns the initial state") {
  Case1 c1;
  SolverSettings set = c1.m.solver;
  set.rel_tol = 1e-10;
  set.abs_tol = 1e-12;
  set.sample_interval = 0.0;

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ur(0.0, 1.0), ut(0.1, 2.25);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    // ball of radius 1 around the equilibrium
    const double th = 2.0 * std::numbers::pi * ur(rng);
    const double rad = std::sqrt(ur(rng));
    const RomState x0{c1.eq.state.x1 + rad * std::cos(th),
                      c1.eq.state.x3 + rad * std::sin(th)};
    const double dur = ut(rng);
    const auto rev = integrate_reverse(x0, dur, c1.steady, c1.m.pll, set);
    bool stopped = false;
    const RomState back = integrate_autonomous_observed(
        rev.back_state(), dur, c1.steady, c1.m.pll, set,
        detail::NullObserver{}, stopped);
    worst = std::max(worst, std::max(std::abs(back.x1 - x0.x1),
                                     std::abs(back.x3 - x0.x3)));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("reverse: equilibrium is a fixed point") {
  Case1 c1;
  const auto traj =
      integrate_reverse(c1.eq.state, 1.0, c1.steady, c1.m.pll, c1.m.solver);
  CHECK(std::abs(traj.back_state().x1 - c1.eq.state.x1) < 1e-9);
  CHECK(std::abs(traj.back_state().x3 - c1.eq.state.x3) < 1e-9);
}

TEST_CASE("reverse: divergence trips the guard, not NaN") {
  Case1 c1;
  SolverSettings set = c1.m.solver;
  set.escape_radius = 100.0;
  set.sample_interval = 0.0;
  // far below the well: the reverse drift runs x3 off to -inf
  CHECK_THROWS_AS(
      integrate_reverse({c1.eq.state.x1, -50.0}, 20.0, c1.steady, c1.m.pll, set),
      DivergenceGuard);
}

TEST_CASE("integrations are deterministic") {
  Case1 c1;
  const ScenarioConfig cfg = load_case1();
  const auto built =
      build_schedule(c1.m.fault, 0.0, cfg.t_end_s, c1.m.loading, c1.m.grid);
  const auto t1 = integrate_forward(c1.eq.state, 0.0, cfg.t_end_s, built.events,
                                    built.injections, c1.m.pll, c1.m.grid,
                                    c1.m.solver);
  const auto t2 = integrate_forward(c1.eq.state, 0.0, cfg.t_end_s, built.events,
                                    built.injections, c1.m.pll, c1.m.grid,
                                    c1.m.solver);
  REQUIRE(t1.samples.size() == t2.samples.size());
  CHECK(std::memcmp(t1.samples.data(), t2.samples.data(),
                    t1.samples.size() * sizeof(Trajectory::Sample)) == 0);
}

TEST_CASE("build_schedule: fault window and bolted fault values") {
  Case1 c1;
  FaultSpec f = c1.m.fault;

  SUBCASE("zero-duration fault rejected") {
    f.t_clear = f.t_apply;
    CHECK_THROWS_AS(build_schedule(f, 0.0, 5.0, c1.m.loading, c1.m.grid),
                    InvalidFaultWindow);
  }
  SUBCASE("bolted fault segment carries zero voltage and limited current") {
    const auto built = build_schedule(f, 0.0, 5.0, c1.m.loading, c1.m.grid);
    const auto& fault_seg = built.injections.segments[1];
    CHECK(fault_seg.v_f0 == 0.0);
    CHECK(fault_seg.id0 == doctest::Approx(f.i_max).epsilon(1e-12));
    CHECK(fault_seg.iq0 == 0.0);
    // id_pre = i_max here, so no ramp event is emitted
    CHECK(built.events.events.size() == 2);
  }
  SUBCASE("coefficients jump only at events") {
    const auto built = build_schedule(f, 0.0, 5.0, c1.m.loading, c1.m.grid);
    const auto before = compute_coefficients(c1.m.pll, c1.m.grid,
                                             built.injections, f.t_apply - 1e-9);
    const auto after = compute_coefficients(c1.m.pll, c1.m.grid,
                                            built.injections, f.t_apply);
    CHECK(before.t_e_amp_ki != after.t_e_amp_ki);  // v_f collapsed
    const auto mid1 = compute_coefficients(c1.m.pll, c1.m.grid,
                                           built.injections, 0.3);
    const auto mid2 = compute_coefficients(c1.m.pll, c1.m.grid,
                                           built.injections, 0.9);
    CHECK(mid1.t_e_amp_ki == mid2.t_e_amp_ki);
  }
}

TEST_CASE("forward: cleared fault gives a bounded excursion that recovers") {
  Case1 c1;
  const ScenarioConfig cfg = load_case1();
  const auto built =
      build_schedule(c1.m.fault, 0.0, cfg.t_end_s, c1.m.loading, c1.m.grid);
  const auto traj = integrate_forward(c1.eq.state, 0.0, cfg.t_end_s,
                                      built.events, built.injections, c1.m.pll,
                                      c1.m.grid, c1.m.solver);
  double peak = 0.0;
  RomState at_clear{}, at_end = traj.back_state();
  for (const auto& s : traj.samples) {
    peak = std::max(peak, std::abs(s.state.x3));
    if (s.t == c1.m.fault.t_clear) at_clear = s.state;
  }
  // excursion stays far from loss of synchronism and decays after clearing
  CHECK(peak < 5.0);
  const auto dist = [&](const RomState& s) {
    return std::hypot(s.x1 - c1.eq.state.x1, s.x3 - c1.eq.state.x3);
  };
  CHECK(dist(at_clear) > 0.1);
  CHECK(dist(at_end) < 0.5 * dist(at_clear));
}

TEST_CASE("saturation bound holds along an eventful trajectory") {
  Case1 c1;
  const ScenarioConfig cfg = load_case1();
  const auto built =
      build_schedule(c1.m.fault, 0.0, cfg.t_end_s, c1.m.loading, c1.m.grid);
  const auto traj = integrate_forward(c1.eq.state, 0.0, cfg.t_end_s,
                                      built.events, built.injections, c1.m.pll,
                                      c1.m.grid, c1.m.solver);
  CHECK(traj.saturation_violations == 0);
  CHECK(tlroa::testing::max_x2_over_x2max(traj, c1.m.pll.x2_max) <= 1.0);
}

TEST_CASE("event schedule: clearing must follow an application") {
  EventSchedule ok;
  ok.events.push_back({1.0, EventKind::FaultApply, {}, 0.0});
  ok.events.push_back({1.5, EventKind::FaultClear, {}, 0.0});
  CHECK_NOTHROW(ok.validate());

  EventSchedule orphan_clear;
  orphan_clear.events.push_back({1.0, EventKind::FaultClear, {}, 0.0});
  CHECK_THROWS_AS(orphan_clear.validate(), ValidationError);

  EventSchedule nested;
  nested.events.push_back({1.0, EventKind::FaultApply, {}, 0.0});
  nested.events.push_back({1.2, EventKind::FaultApply, {}, 0.0});
  CHECK_THROWS_AS(nested.validate(), ValidationError);

  EventSchedule unordered;
  unordered.events.push_back({1.5, EventKind::FaultApply, {}, 0.0});
  unordered.events.push_back({1.0, EventKind::FaultClear, {}, 0.0});
  CHECK_THROWS_AS(unordered.validate(), ValidationError);
}

TEST_CASE("solver validation") {
  Case1 c1;
  SolverSettings bad = c1.m.solver;
  bad.rel_tol = 0.0;
  CHECK_THROWS_AS(integrate_reverse({0, 0}, 1.0, c1.steady, c1.m.pll, bad),
                  ValidationError);
  CHECK_THROWS_AS(
      integrate_reverse({0, 0}, -1.0, c1.steady, c1.m.pll, c1.m.solver),
      ValidationError);
}
