#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "tlroa/errors.hpp"
#include "tlroa/model.hpp"

namespace tlroa {

/// Complex impedance of a network node versus frequency.
struct ImpedanceScan {
  struct Point {
    double f_hz{0.0};
    std::complex<double> z_ohm{0.0, 0.0};
  };
  std::vector<Point> points;
  std::string reference_node;

  void validate() const {
    if (points.empty()) throw ValidationError("ImpedanceScan: empty scan");
    double prev = 0.0;
    for (const auto& p : points) {
      if (!(p.f_hz > prev))
        throw ValidationError(
            "ImpedanceScan: frequencies must be strictly increasing and > 0");
      prev = p.f_hz;
    }
  }
};

/// Single-turbine quantities to scale to the plant level.
struct PlantAggregation {
  int n_turbines{1};
  double r_ls{0.0};  ///< WT transformer resistance
  double l_s{0.0};   ///< WT transformer inductance
  double id_c{0.0};  ///< single-WT d-axis current (pu)
  double iq_c{0.0};  ///< single-WT q-axis current (pu)

  void validate() const {
    if (n_turbines < 1 || r_ls < 0.0 || !(l_s > 0.0))
      throw ValidationError(
          "PlantAggregation: requires N >= 1, r_ls >= 0, l_s > 0");
  }
};

struct AggregatedPlant {
  double id_eq{0.0};
  double iq_eq{0.0};
  double r_ls_eq{0.0};
  double l_s_eq{0.0};
};

/// Scales N identical units to one equivalent: currents add, impedances
/// parallel.
inline AggregatedPlant aggregate(const PlantAggregation& p) {
  p.validate();
  const double n = static_cast<double>(p.n_turbines);
  return {n * p.id_c, n * p.iq_c, p.r_ls / n, p.l_s / n};
}

/// Series R-L fit of a scan window around the PLL nominal frequency.
struct FitResult {
  double r_lg{0.0};     ///< Ohm: Re{Z} interpolated at the corner frequency
  double l_g{0.0};      ///< H: slope / (2*pi)
  double f_corner{0.0}; ///< Hz: frequency-axis intercept of the slope line
  double slope_m{0.0};  ///< Ohm/Hz
  double window_lo{0.0}, window_hi{0.0};  ///< Hz
  double residual{0.0};  ///< rms reactance fit error over the window (Ohm)
  bool f_corner_clamped{false};  ///< corner fell outside the scan range
};

/// Least-squares line through the windowed reactance, Im{Z} = m*f + b.
/// The corner frequency is the f-axis intercept -b/m and the resistance is
/// Re{Z} linearly interpolated there (clamped to the scan range when the
/// intercept falls outside it).
inline FitResult fit_impedance(const ImpedanceScan& scan, double f_nominal,
                               double half_window = 5.0) {
  scan.validate();
  const double lo = f_nominal - half_window;
  const double hi = f_nominal + half_window;

  std::vector<const ImpedanceScan::Point*> win;
  for (const auto& p : scan.points)
    if (p.f_hz >= lo && p.f_hz <= hi) win.push_back(&p);
  if (win.size() < 3)
    throw InsufficientData("fit_impedance: fewer than 3 scan points in [" +
                           std::to_string(lo) + ", " + std::to_string(hi) +
                           "] Hz");

  // OLS on (f, Im Z)
  double sf = 0, sx = 0, sff = 0, sfx = 0;
  for (const auto* p : win) {
    sf += p->f_hz;
    sx += p->z_ohm.imag();
    sff += p->f_hz * p->f_hz;
    sfx += p->f_hz * p->z_ohm.imag();
  }
  const double n = static_cast<double>(win.size());
  const double denom = n * sff - sf * sf;
  if (denom == 0.0)
    throw InsufficientData("fit_impedance: degenerate frequency spread");
  const double m = (n * sfx - sf * sx) / denom;
  const double b = (sx - m * sf) / n;
  if (!(m > 0.0))
    throw NonPositiveSlope(
        "fit_impedance: non-inductive window (reactance slope <= 0)");

  FitResult fit;
  fit.slope_m = m;
  fit.l_g = m / (2.0 * std::numbers::pi);
  fit.f_corner = -b / m;
  fit.window_lo = lo;
  fit.window_hi = hi;

  double ss = 0.0;
  for (const auto* p : win) {
    const double e = p->z_ohm.imag() - (m * p->f_hz + b);
    ss += e * e;
  }
  fit.residual = std::sqrt(ss / n);

  // Re{Z} at the corner, linear in frequency between bracketing scan points.
  double fc = fit.f_corner;
  if (fc <= scan.points.front().f_hz) {
    fit.r_lg = scan.points.front().z_ohm.real();
    fit.f_corner_clamped = fc < scan.points.front().f_hz;
  } else if (fc >= scan.points.back().f_hz) {
    fit.r_lg = scan.points.back().z_ohm.real();
    fit.f_corner_clamped = fc > scan.points.back().f_hz;
  } else {
    std::size_t i = 1;
    while (scan.points[i].f_hz < fc) ++i;
    const auto& a = scan.points[i - 1];
    const auto& b2 = scan.points[i];
    const double w = (fc - a.f_hz) / (b2.f_hz - a.f_hz);
    fit.r_lg = (1.0 - w) * a.z_ohm.real() + w * b2.z_ohm.real();
  }
  return fit;
}

/// Refers a fit taken on the high-voltage side to the low-voltage side of the
/// WT transformer: impedances scale with 1/ratio^2, voltages with 1/ratio.
inline GridEquivalent referred_to_lv(const FitResult& fit, double turns_ratio,
                                     double v_source, double omega0,
                                     double omega_g) {
  if (!(turns_ratio > 0.0))
    throw ValidationError("referred_to_lv: turns_ratio <= 0");
  GridEquivalent g;
  g.r_lg = fit.r_lg / (turns_ratio * turns_ratio);
  g.l_g = fit.l_g / (turns_ratio * turns_ratio);
  g.v_g = v_source / turns_ratio;
  g.omega0 = omega0;
  g.omega_g = omega_g;
  return g;
}

inline constexpr const char* kScanCsvHeader = "f_hz, re_ohm, im_ohm";

namespace detail {
inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(trim(tok));
  return out;
}
}  // namespace detail

/// Reads a scan CSV (header `f_hz, re_ohm, im_ohm`). Parse errors carry the
/// 1-based line number.
inline ImpedanceScan read_scan_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scan file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError(path + ":1: empty scan file");
  {
    const auto cols = detail::split_csv(line);
    if (cols.size() != 3 || cols[0] != "f_hz" || cols[1] != "re_ohm" ||
        cols[2] != "im_ohm")
      throw ValidationError(path + ":1: expected header `" +
                            std::string(kScanCsvHeader) + "`, got `" +
                            detail::trim(line) + "`");
  }
  ImpedanceScan scan;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cols = detail::split_csv(line);
    if (cols.size() != 3)
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": expected 3 columns");
    try {
      const double f = std::stod(cols[0]);
      const double re = std::stod(cols[1]);
      const double im = std::stod(cols[2]);
      scan.points.push_back({f, {re, im}});
    } catch (const std::exception&) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": malformed number");
    }
  }
  scan.validate();
  return scan;
}

inline void write_scan_csv(const std::string& path, const ImpedanceScan& scan) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write scan file: " + path);
  out << kScanCsvHeader << "\n";
  char buf[128];
  for (const auto& p : scan.points) {
    std::snprintf(buf, sizeof(buf), "%.17g, %.17g, %.17g\n", p.f_hz,
                  p.z_ohm.real(), p.z_ohm.imag());
    out << buf;
  }
}

}  // namespace tlroa
