#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "tlroa/errors.hpp"
#include "tlroa/model.hpp"

namespace tlroa {

enum class SolverMethod { rk4, rkf45 };

struct SolverSettings {
  SolverMethod method{SolverMethod::rkf45};
  double rel_tol{1e-8};
  double abs_tol{1e-10};
  double fixed_step{1e-4};        ///< s, rk4 only
  double sample_interval{1e-3};   ///< s, dense-output spacing (0 = endpoints only)
  double escape_radius{1e3};      ///< inf-norm guard for reverse flows
  double min_step{1e-12};
  double max_step{0.0};           ///< adaptive step cap (0 = unlimited)

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0) || !(fixed_step > 0.0))
      throw ValidationError("SolverSettings: tolerances and steps must be > 0");
  }
};

enum class TrajectoryDirection { forward, reverse };

struct Trajectory {
  struct Sample {
    double t{0.0};
    RomState state;
  };
  std::vector<Sample> samples;
  TrajectoryDirection direction{TrajectoryDirection::forward};

  // solver metadata
  std::size_t steps_taken{0};
  std::size_t steps_rejected{0};
  double max_error_estimate{0.0};
  std::size_t saturation_violations{0};  ///< samples where |x2| > x2_max

  const RomState& back_state() const { return samples.back().state; }
};

enum class EventKind { FaultApply, FaultClear, RampEnd };

struct Event {
  double t{0.0};
  EventKind kind{EventKind::FaultApply};
  std::complex<double> fault_impedance{0.0, 0.0};  ///< FaultApply payload
  double ramp_rate{0.0};                           ///< RampEnd payload (pu/s)
};

struct EventSchedule {
  std::vector<Event> events;

  void validate() const {
    bool fault_on = false;
    for (std::size_t i = 0; i < events.size(); ++i) {
      if (i > 0 && !(events[i].t > events[i - 1].t))
        throw ValidationError(
            "EventSchedule: event times not strictly increasing");
      if (events[i].kind == EventKind::FaultApply) {
        if (fault_on)
          throw ValidationError("EventSchedule: nested fault application");
        fault_on = true;
      } else if (events[i].kind == EventKind::FaultClear) {
        if (!fault_on)
          throw ValidationError(
              "EventSchedule: FaultClear without a preceding FaultApply");
        fault_on = false;
      }
    }
  }
};

namespace detail {

inline void check_finite(const RomState& s, double t) {
  if (!std::isfinite(s.x1) || !std::isfinite(s.x3))
    throw NonFiniteState("state left the finite domain at t = " +
                         std::to_string(t));
}

template <class Rhs>
inline RomState rk4_step(const Rhs& f, double t, const RomState& y, double h) {
  const RomDeriv k1 = f(t, y);
  const RomDeriv k2 =
      f(t + 0.5 * h, {y.x1 + 0.5 * h * k1.dx1, y.x3 + 0.5 * h * k1.dx3});
  const RomDeriv k3 =
      f(t + 0.5 * h, {y.x1 + 0.5 * h * k2.dx1, y.x3 + 0.5 * h * k2.dx3});
  const RomDeriv k4 = f(t + h, {y.x1 + h * k3.dx1, y.x3 + h * k3.dx3});
  return {y.x1 + h / 6.0 * (k1.dx1 + 2.0 * k2.dx1 + 2.0 * k3.dx1 + k4.dx1),
          y.x3 + h / 6.0 * (k1.dx3 + 2.0 * k2.dx3 + 2.0 * k3.dx3 + k4.dx3)};
}

// Fehlberg 4(5) pair; returns 5th-order solution and a scaled error norm.
template <class Rhs>
inline std::pair<RomState, double> rkf45_step(const Rhs& f, double t,
                                              const RomState& y, double h,
                                              double rel, double abs) {
  const RomDeriv k1 = f(t, y);
  const RomDeriv k2 = f(t + h / 4.0, {y.x1 + h * (k1.dx1 / 4.0),
                                      y.x3 + h * (k1.dx3 / 4.0)});
  const RomDeriv k3 =
      f(t + 3.0 * h / 8.0,
        {y.x1 + h * (3.0 / 32.0 * k1.dx1 + 9.0 / 32.0 * k2.dx1),
         y.x3 + h * (3.0 / 32.0 * k1.dx3 + 9.0 / 32.0 * k2.dx3)});
  const RomDeriv k4 =
      f(t + 12.0 * h / 13.0,
        {y.x1 + h * (1932.0 / 2197.0 * k1.dx1 - 7200.0 / 2197.0 * k2.dx1 +
                     7296.0 / 2197.0 * k3.dx1),
         y.x3 + h * (1932.0 / 2197.0 * k1.dx3 - 7200.0 / 2197.0 * k2.dx3 +
                     7296.0 / 2197.0 * k3.dx3)});
  const RomDeriv k5 =
      f(t + h, {y.x1 + h * (439.0 / 216.0 * k1.dx1 - 8.0 * k2.dx1 +
                            3680.0 / 513.0 * k3.dx1 - 845.0 / 4104.0 * k4.dx1),
                y.x3 + h * (439.0 / 216.0 * k1.dx3 - 8.0 * k2.dx3 +
                            3680.0 / 513.0 * k3.dx3 - 845.0 / 4104.0 * k4.dx3)});
  const RomDeriv k6 =
      f(t + h / 2.0,
        {y.x1 + h * (-8.0 / 27.0 * k1.dx1 + 2.0 * k2.dx1 -
                     3544.0 / 2565.0 * k3.dx1 + 1859.0 / 4104.0 * k4.dx1 -
                     11.0 / 40.0 * k5.dx1),
         y.x3 + h * (-8.0 / 27.0 * k1.dx3 + 2.0 * k2.dx3 -
                     3544.0 / 2565.0 * k3.dx3 + 1859.0 / 4104.0 * k4.dx3 -
                     11.0 / 40.0 * k5.dx3)});

  const RomState y5 = {
      y.x1 + h * (16.0 / 135.0 * k1.dx1 + 6656.0 / 12825.0 * k3.dx1 +
                  28561.0 / 56430.0 * k4.dx1 - 9.0 / 50.0 * k5.dx1 +
                  2.0 / 55.0 * k6.dx1),
      y.x3 + h * (16.0 / 135.0 * k1.dx3 + 6656.0 / 12825.0 * k3.dx3 +
                  28561.0 / 56430.0 * k4.dx3 - 9.0 / 50.0 * k5.dx3 +
                  2.0 / 55.0 * k6.dx3)};
  const RomState y4 = {
      y.x1 + h * (25.0 / 216.0 * k1.dx1 + 1408.0 / 2565.0 * k3.dx1 +
                  2197.0 / 4104.0 * k4.dx1 - 1.0 / 5.0 * k5.dx1),
      y.x3 + h * (25.0 / 216.0 * k1.dx3 + 1408.0 / 2565.0 * k3.dx3 +
                  2197.0 / 4104.0 * k4.dx3 - 1.0 / 5.0 * k5.dx3)};

  const double e1 = std::abs(y5.x1 - y4.x1) /
                    (abs + rel * std::max(std::abs(y.x1), std::abs(y5.x1)));
  const double e3 = std::abs(y5.x3 - y4.x3) /
                    (abs + rel * std::max(std::abs(y.x3), std::abs(y5.x3)));
  return {y5, std::max(e1, e3)};
}

struct NullObserver {
  bool operator()(double, const RomState&) const { return false; }
};

// Advances from t_from to t_to with the configured stepper, recording nothing.
// The observer is called after every accepted step; returning true stops the
// integration early (the caller sees the partial end state).
template <class Rhs, class Obs>
inline RomState advance(const Rhs& f, RomState y, double t_from, double t_to,
                        const SolverSettings& set, Trajectory& meta,
                        bool guard_escape, Obs&& observer, bool& stopped) {
  double t = t_from;
  stopped = false;
  if (set.method == SolverMethod::rk4) {
    const double h0 = set.max_step > 0.0
                          ? std::min(set.fixed_step, set.max_step)
                          : set.fixed_step;
    while (t < t_to) {
      const double h = std::min(h0, t_to - t);
      y = rk4_step(f, t, y, h);
      t += h;
      ++meta.steps_taken;
      check_finite(y, t);
      if (guard_escape && set.escape_radius > 0.0 &&
          std::max(std::abs(y.x1), std::abs(y.x3)) > set.escape_radius)
        throw DivergenceGuard("state escaped radius " +
                              std::to_string(set.escape_radius) + " at t = " +
                              std::to_string(t));
      if (observer(t, y)) {
        stopped = true;
        return y;
      }
    }
    return y;
  }

  double h = std::min(set.sample_interval > 0.0 ? set.sample_interval : 1e-3,
                      t_to - t_from);
  if (set.max_step > 0.0) h = std::min(h, set.max_step);
  if (h <= 0.0) return y;
  while (t < t_to) {
    h = std::min(h, t_to - t);
    if (set.max_step > 0.0) h = std::min(h, set.max_step);
    const auto [y_new, err] = rkf45_step(f, t, y, h, set.rel_tol, set.abs_tol);
    if (err <= 1.0) {
      t += h;
      y = y_new;
      ++meta.steps_taken;
      meta.max_error_estimate = std::max(meta.max_error_estimate, err);
      check_finite(y, t);
      if (guard_escape && set.escape_radius > 0.0 &&
          std::max(std::abs(y.x1), std::abs(y.x3)) > set.escape_radius)
        throw DivergenceGuard("state escaped radius " +
                              std::to_string(set.escape_radius) + " at t = " +
                              std::to_string(t));
      if (observer(t, y)) {
        stopped = true;
        return y;
      }
    } else {
      ++meta.steps_rejected;
    }
    const double grow =
        0.9 * std::pow(1.0 / std::max(err, 1e-16), 0.2);
    h *= std::clamp(grow, 0.2, 5.0);
    if (h < set.min_step && t < t_to)
      throw StepFailure("adaptive controller stalled at t = " +
                        std::to_string(t));
  }
  return y;
}

inline void push_sample(Trajectory& traj, double t, const RomState& s,
                        double x2_max) {
  if (x2_max > 0.0 &&
      std::abs(saturate_rate(s.x3, x2_max)) > x2_max * (1.0 + 1e-12))
    ++traj.saturation_violations;
  traj.samples.push_back({t, s});
}

}  // namespace detail

/// Integrates the model forward under an event schedule. Events are exact
/// step boundaries: the stepper never straddles one, coefficients are
/// evaluated from the active segment on every right-hand-side call, and the
/// segment is pinned between breakpoints, so discontinuities only ever occur
/// at event times. Dense output lands on the uniform sample grid
/// t0 + k * sample_interval plus every event time.
inline Trajectory integrate_forward(const RomState& x0, double t0, double t_end,
                                    const EventSchedule& events,
                                    const InjectionSchedule& sched,
                                    const PllParams& pll,
                                    const GridEquivalent& grid,
                                    const SolverSettings& set) {
  if (!(t_end > t0))
    throw ValidationError("integrate_forward: t_end must exceed t0");
  set.validate();
  events.validate();
  sched.validate();

  // breakpoints: sorted union of event times and segment starts inside
  // (t0, t_end), plus t_end. Between two breakpoints exactly one segment is
  // active; pinning it keeps stage evaluations at a breakpoint on the left
  // limit, so discontinuities never leak into the preceding step.
  std::vector<double> cuts;
  for (const auto& e : events.events)
    if (e.t > t0 && e.t < t_end) cuts.push_back(e.t);
  for (const auto& seg : sched.segments)
    if (seg.t_start > t0 && seg.t_start < t_end) cuts.push_back(seg.t_start);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  cuts.push_back(t_end);

  Trajectory traj;
  traj.direction = TrajectoryDirection::forward;
  detail::check_finite(x0, t0);
  detail::push_sample(traj, t0, x0, pll.x2_max);

  RomState y = x0;
  double t = t0;
  std::size_t next_sample = 1;  // index k of the next t0 + k*ds target
  const double ds = set.sample_interval;
  bool stopped = false;
  for (double cut : cuts) {
    const InjectionSchedule::Segment& seg = sched.segment_at(t);
    const auto rhs = [&](double tt, const RomState& s) -> RomDeriv {
      return rom_rhs(s,
                     compute_segment_coefficients(pll, grid, seg,
                                                  sched.domega_g_dt, tt),
                     pll);
    };
    while (t < cut) {
      double target = cut;
      if (ds > 0.0) {
        const double ts = t0 + static_cast<double>(next_sample) * ds;
        if (ts < cut - 1e-15 * std::max(1.0, std::abs(cut))) target = std::min(target, ts);
      }
      y = detail::advance(rhs, y, t, target, set, traj, false,
                          detail::NullObserver{}, stopped);
      t = target;
      detail::push_sample(traj, t, y, pll.x2_max);
      if (ds > 0.0 && t >= t0 + static_cast<double>(next_sample) * ds -
                               1e-15 * std::max(1.0, std::abs(t)))
        ++next_sample;
    }
  }
  return traj;
}

/// Integrates the negated vector field for `duration` seconds from x0 under
/// frozen (autonomous) coefficients. Sample times are recorded as
/// 0, -ds, -2ds, ...: state(-tau) is the state tau seconds upstream of x0
/// along the forward flow. Escaping the configured radius raises
/// DivergenceGuard (reverse flows can blow up in finite time).
inline Trajectory integrate_reverse(const RomState& x0, double duration,
                                    const RomCoefficients& coeffs,
                                    const PllParams& pll,
                                    const SolverSettings& set) {
  if (!(duration > 0.0))
    throw ValidationError("integrate_reverse: duration must be > 0");
  set.validate();

  const auto rhs = [&](double, const RomState& s) -> RomDeriv {
    const RomDeriv d = rom_rhs(s, coeffs, pll);
    return {-d.dx1, -d.dx3};
  };

  Trajectory traj;
  traj.direction = TrajectoryDirection::reverse;
  detail::check_finite(x0, 0.0);
  detail::push_sample(traj, 0.0, x0, pll.x2_max);

  RomState y = x0;
  double tau = 0.0;
  const double ds = set.sample_interval;
  bool stopped = false;
  while (tau < duration) {
    double target = duration;
    if (ds > 0.0) target = std::min(target, tau + ds);
    y = detail::advance(rhs, y, tau, target, set, traj, true,
                        detail::NullObserver{}, stopped);
    tau = target;
    detail::push_sample(traj, -tau, y, pll.x2_max);
  }
  return traj;
}

/// Forward-integrates frozen-coefficient dynamics with a per-step observer;
/// returns the end (or early-stop) state. Used by convergence checks and grid
/// classification, where no dense trajectory is needed.
template <class Obs>
inline RomState integrate_autonomous_observed(const RomState& x0,
                                              double duration,
                                              const RomCoefficients& coeffs,
                                              const PllParams& pll,
                                              const SolverSettings& set,
                                              Obs&& observer, bool& stopped) {
  set.validate();
  const auto rhs = [&](double, const RomState& s) -> RomDeriv {
    return rom_rhs(s, coeffs, pll);
  };
  Trajectory meta;
  detail::check_finite(x0, 0.0);
  return detail::advance(rhs, x0, 0.0, duration, set, meta, true,
                         std::forward<Obs>(observer), stopped);
}

/// Fault event description in scenario time.
struct FaultSpec {
  double t_apply{0.0};
  double t_clear{0.0};
  std::complex<double> z_f{0.0, 0.0};  ///< pu
  double k_factor{0.0};
  double i_max{1.0};  ///< pu
  double ramp_rate{2.0};  ///< pu/s, post-fault active current recovery
};

struct OperatingPoint {
  double id_c{0.0};
  double iq_c{0.0};
};

struct BuiltSchedule {
  EventSchedule events;
  InjectionSchedule injections;
  FaultConditions fault;   ///< resolved fault-period values
  double v_pre{0.0};       ///< unfaulted terminal voltage magnitude (pu)
};

/// Expands a fault event into the piecewise-affine schedule: pre-fault
/// constants, fault-period values from the shunt-fault solve, then an active
/// current ramp back to the pre-fault point with the reactive current and
/// voltage restored at clearing.
inline BuiltSchedule build_schedule(const FaultSpec& fault, double t0,
                                    double t_end, const OperatingPoint& pre,
                                    const GridEquivalent& grid) {
  if (!(fault.t_clear > fault.t_apply))
    throw InvalidFaultWindow("build_schedule: clear time must exceed apply time");
  if (!(fault.t_apply > t0) || !(fault.t_clear < t_end))
    throw InvalidFaultWindow("build_schedule: fault not inside [t0, t_end]");
  if (!(fault.ramp_rate > 0.0))
    throw ValidationError("build_schedule: ramp_rate must be > 0");

  BuiltSchedule out;
  const std::complex<double> i_pre{pre.id_c, pre.iq_c};
  out.v_pre = terminal_voltage(grid, i_pre);
  out.fault = fault_conditions(grid, fault.z_f, {grid.v_g, 0.0}, i_pre,
                               fault.k_factor, fault.i_max);

  InjectionSchedule& sched = out.injections;
  sched.t_end = t_end;
  sched.segments.push_back(
      {t0, pre.id_c, 0.0, pre.iq_c, 0.0, out.v_pre, 0.0});
  sched.segments.push_back({fault.t_apply, out.fault.id_c, 0.0, out.fault.iq_c,
                            0.0, out.fault.v_f, 0.0});

  const double ramp_span = pre.id_c - out.fault.id_c;
  const double ramp_dur = std::abs(ramp_span) / fault.ramp_rate;
  const double slope = ramp_span >= 0.0 ? fault.ramp_rate : -fault.ramp_rate;

  out.events.events.push_back(
      {fault.t_apply, EventKind::FaultApply, fault.z_f, 0.0});
  out.events.events.push_back({fault.t_clear, EventKind::FaultClear, {}, 0.0});

  if (ramp_dur > 1e-12) {
    sched.segments.push_back({fault.t_clear, out.fault.id_c, slope, pre.iq_c,
                              0.0, out.v_pre, 0.0});
    if (fault.t_clear + ramp_dur < t_end) {
      sched.segments.push_back({fault.t_clear + ramp_dur, pre.id_c, 0.0,
                                pre.iq_c, 0.0, out.v_pre, 0.0});
      out.events.events.push_back({fault.t_clear + ramp_dur, EventKind::RampEnd,
                                   {}, fault.ramp_rate});
    }
  } else {
    sched.segments.push_back(
        {fault.t_clear, pre.id_c, 0.0, pre.iq_c, 0.0, out.v_pre, 0.0});
  }
  sched.validate();
  out.events.validate();
  return out;
}

}  // namespace tlroa
