#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include "tlroa/errors.hpp"

namespace tlroa {

/// Dynamic state of the reduced-order wind turbine model: the PLL angle and
/// the raw (pre-saturation) PLL frequency deviation. The saturated rate x2 is
/// algebraic and never stored.
struct RomState {
  double x1{0.0};  ///< PLL angle (rad)
  double x3{0.0};  ///< raw PLL frequency deviation (rad/s)
};

struct RomDeriv {
  double dx1{0.0};  ///< rad/s
  double dx3{0.0};  ///< rad/s^2
};

/// PLL loop parameters. Gains are effective values: applied to a per-unit
/// voltage they yield an angular rate in rad/s (any per-unit frequency-base
/// scaling is resolved at ingestion, see scenario.hpp).
struct PllParams {
  double kp{0.0};      ///< proportional gain (rad/s per pu)
  double ki{0.0};      ///< integral gain (rad/s^2 per pu)
  double x2_max{0.0};  ///< saturation bound on the frequency deviation (rad/s)

  void validate() const {
    if (!(kp > 0.0) || !(ki > 0.0) || !(x2_max > 0.0))
      throw ValidationError("PllParams: kp, ki and x2_max must be positive");
  }
};

/// Thevenin R-L source seen by the aggregated converter. In the dynamic core
/// all fields are per-unit on the converter base; l_g carries L/Z_base and is
/// therefore in seconds.
struct GridEquivalent {
  double r_lg{0.0};     ///< series resistance
  double l_g{0.0};      ///< series inductance
  double v_g{0.0};      ///< source voltage magnitude
  double omega0{0.0};   ///< nominal angular frequency (rad/s)
  double omega_g{0.0};  ///< grid angular frequency (rad/s)

  void validate() const {
    if (r_lg < 0.0 || !(l_g > 0.0) || !(v_g > 0.0) || !(omega0 > 0.0))
      throw ValidationError(
          "GridEquivalent: requires r_lg >= 0, l_g > 0, v_g > 0, omega0 > 0");
  }

  std::complex<double> series_impedance() const {
    return {r_lg, omega0 * l_g};
  }
};

/// Piecewise-affine converter setpoints and grid-side quantities driving the
/// coefficient computation. Each segment holds the value at its start time and
/// a constant slope, so first derivatives are the slopes and all second
/// derivatives vanish within a segment.
struct InjectionSchedule {
  struct Segment {
    double t_start{0.0};
    double id0{0.0}, did_dt{0.0};  ///< d-axis current (pu) and its ramp (pu/s)
    double iq0{0.0}, diq_dt{0.0};  ///< q-axis current (pu) and its ramp (pu/s)
    double v_f0{0.0}, dv_f_dt{0.0};  ///< effective source magnitude (pu, pu/s)

    double id_at(double t) const { return id0 + did_dt * (t - t_start); }
    double iq_at(double t) const { return iq0 + diq_dt * (t - t_start); }
    double v_f_at(double t) const { return v_f0 + dv_f_dt * (t - t_start); }
  };

  std::vector<Segment> segments;
  double t_end{0.0};
  double domega_g_dt{0.0};  ///< grid frequency slope (rad/s^2), shared

  void validate() const {
    if (segments.empty())
      throw ValidationError("InjectionSchedule: no segments");
    for (std::size_t i = 1; i < segments.size(); ++i)
      if (!(segments[i].t_start > segments[i - 1].t_start))
        throw ValidationError("InjectionSchedule: segments not ordered");
    if (!(t_end > segments.back().t_start))
      throw ValidationError("InjectionSchedule: window ends before last segment");
  }

  double t_begin() const { return segments.front().t_start; }

  const Segment& segment_at(double t) const {
    if (segments.empty() || t < t_begin() || t > t_end)
      throw OutOfWindow("InjectionSchedule: t outside schedule window");
    // last segment whose start is <= t
    std::size_t lo = 0;
    for (std::size_t i = segments.size(); i-- > 0;) {
      if (segments[i].t_start <= t) {
        lo = i;
        break;
      }
    }
    return segments[lo];
  }
};

/// Coefficients of the second-order PLL dynamics at one instant. The
/// x1-dependent terms are stored as amplitudes:
///   T_e(x1) = (t_e_amp_ki + t_e_amp_kp) * sin(x1) + t_e_const
///   D(x1)   = d_eq_cos_amp * cos(x1) + d_eq_const
struct RomCoefficients {
  double m_eq{1.0};
  double t_m_eq{0.0};
  double t_e_amp_ki{0.0};
  double t_e_amp_kp{0.0};
  double t_e_const{0.0};
  double d_eq_const{0.0};
  double d_eq_cos_amp{0.0};

  double torque_electrical(double x1) const {
    return (t_e_amp_ki + t_e_amp_kp) * std::sin(x1) + t_e_const;
  }
  double damping(double x1) const {
    return d_eq_cos_amp * std::cos(x1) + d_eq_const;
  }
};

inline constexpr double kSingularInertiaEps = 1e-9;

/// Coefficients from one schedule segment evaluated at time t. Keeping the
/// segment explicit lets integrators pin it across a step, so a stage landing
/// exactly on an event time still sees the left limit.
inline RomCoefficients compute_segment_coefficients(
    const PllParams& pll, const GridEquivalent& grid,
    const InjectionSchedule::Segment& seg, double domega_g_dt, double t) {
  const double id = seg.id_at(t);
  const double iq = seg.iq_at(t);
  const double v_f = seg.v_f_at(t);

  const double r = grid.r_lg;
  const double l = grid.l_g;

  RomCoefficients c;
  c.m_eq = 1.0 - pll.kp * l * id;
  if (std::abs(c.m_eq) < kSingularInertiaEps)
    throw SingularInertia("compute_coefficients: equivalent inertia ~ 0");

  // d/dt(r*iq) = r*diq ; d2/dt2(l*iq) = 0 ; d/dt(l*id) = l*did
  c.t_m_eq = pll.kp * (r * seg.diq_dt + l * seg.did_dt * grid.omega_g) +
             pll.ki * (r * iq + l * seg.diq_dt + l * id * grid.omega_g);
  c.t_e_amp_ki = pll.ki * v_f;
  c.t_e_amp_kp = pll.kp * seg.dv_f_dt;
  c.t_e_const = c.m_eq * domega_g_dt;
  c.d_eq_cos_amp = pll.kp * v_f;
  c.d_eq_const = -pll.kp * l * seg.did_dt - pll.ki * l * id;
  return c;
}

/// Evaluates the dynamic coefficients at time t from the schedule segment
/// slopes. Products of grid impedance and currents are differentiated by the
/// product rule; with R/L constant between events their derivatives reduce to
/// L * di/dt, and second derivatives of affine segments are zero.
inline RomCoefficients compute_coefficients(const PllParams& pll,
                                            const GridEquivalent& grid,
                                            const InjectionSchedule& sched,
                                            double t) {
  return compute_segment_coefficients(pll, grid, sched.segment_at(t),
                                      sched.domega_g_dt, t);
}

/// Smooth hard-limit on the frequency deviation.
inline double saturate_rate(double x3, double x2_max) {
  return x2_max * std::tanh(x3 / x2_max);
}

/// d(x2)/d(x3) = sech^2(x3/x2_max)
inline double saturate_rate_gain(double x3, double x2_max) {
  const double u = x3 / x2_max;
  if (std::abs(u) > 350.0) return 0.0;  // cosh overflow guard
  const double ch = std::cosh(u);
  return 1.0 / (ch * ch);
}

/// Right-hand side of the reduced-order model. Pure function.
inline RomDeriv rom_rhs(const RomState& s, const RomCoefficients& c,
                        const PllParams& pll) {
  const double x2 = saturate_rate(s.x3, pll.x2_max);
  RomDeriv d;
  d.dx1 = x2;
  d.dx3 = (c.t_m_eq - c.torque_electrical(s.x1) - c.damping(s.x1) * x2) / c.m_eq;
  return d;
}

/// Fault-period operating values at the converter terminal.
struct FaultConditions {
  double v_f{0.0};   ///< effective retained source magnitude (pu)
  double id_c{0.0};  ///< d-axis injection (pu)
  double iq_c{0.0};  ///< q-axis injection (pu)
};

/// Reactive-priority current limits during a voltage dip: iq tracks the
/// retained voltage through the K-factor, capped at 1 pu, and the active
/// current takes the remaining headroom.
inline std::pair<double, double> lvrt_currents(double v_pcc, double k_factor,
                                               double i_max) {
  double iq = std::min(k_factor * v_pcc, 1.0);
  iq = std::min(iq, i_max);
  const double id = std::sqrt(std::max(i_max * i_max - iq * iq, 0.0));
  return {id, iq};
}

/// Terminal voltage magnitude for an injection i_c against the grid source.
inline double terminal_voltage(const GridEquivalent& grid,
                               std::complex<double> i_c) {
  return std::abs(std::complex<double>(grid.v_g, 0.0) +
                  i_c * grid.series_impedance());
}

struct FaultSolveSettings {
  double tol{1e-10};
  int max_iterations{100};
  double damping{0.5};
};

/// Voltage and current injection during a shunt fault of impedance z_f at the
/// converter terminal. The retained voltage and the reactive injection are
/// mutually coupled; the pair is resolved by damped fixed-point iteration.
inline FaultConditions fault_conditions(const GridEquivalent& grid,
                                        std::complex<double> z_f,
                                        std::complex<double> vg_dq,
                                        std::complex<double> i_c,
                                        double k_factor, double i_max,
                                        const FaultSolveSettings& fs = {}) {
  if (!(i_max > 0.0)) throw ValidationError("fault_conditions: i_max <= 0");
  const std::complex<double> z_g = grid.series_impedance();
  if (std::abs(z_g + z_f) == 0.0)
    throw DegenerateNetwork("fault_conditions: Z_g + Z_f = 0");
  const double divider = std::abs(z_f / (z_g + z_f));

  double id = i_c.real();
  double iq = i_c.imag();
  double v_f = 0.0;
  for (int it = 0; it < fs.max_iterations; ++it) {
    v_f = divider * std::abs(vg_dq + std::complex<double>(id, iq) * z_g);
    const auto [id_new, iq_new] = lvrt_currents(v_f, k_factor, i_max);
    const double step = std::max(std::abs(id_new - id), std::abs(iq_new - iq));
    id += fs.damping * (id_new - id);
    iq += fs.damping * (iq_new - iq);
    if (step < fs.tol) {
      id = id_new;
      iq = iq_new;
      v_f = divider * std::abs(vg_dq + std::complex<double>(id, iq) * z_g);
      return {v_f, id, iq};
    }
  }
  throw NonConvergent("fault_conditions: fixed point did not converge");
}

}  // namespace tlroa
