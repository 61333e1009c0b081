#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "tlroa/errors.hpp"
#include "tlroa/geometry.hpp"
#include "tlroa/integrate.hpp"
#include "tlroa/linalg.hpp"
#include "tlroa/model.hpp"

namespace tlroa {

enum class StabilityClass { stable, saddle, unstable, nonhyperbolic };

inline const char* to_string(StabilityClass c) {
  switch (c) {
    case StabilityClass::stable: return "stable";
    case StabilityClass::saddle: return "saddle";
    case StabilityClass::unstable: return "unstable";
    default: return "nonhyperbolic";
  }
}

struct Equilibrium {
  RomState state;
  double residual_norm{0.0};
  int branch_index{0};  ///< k labelling the 2*pi*k-shifted copy
  StabilityClass stability{StabilityClass::stable};
  Mat2 jacobian;
};

/// Analytic Jacobian of the 2-state right-hand side at `at`.
inline Mat2 jacobian(const RomState& at, const RomCoefficients& c,
                     const PllParams& pll) {
  const double x2 = saturate_rate(at.x3, pll.x2_max);
  const double g = saturate_rate_gain(at.x3, pll.x2_max);
  Mat2 j;
  j.a11 = 0.0;
  j.a12 = g;
  j.a21 = (-(c.t_e_amp_ki + c.t_e_amp_kp) * std::cos(at.x1) +
           c.d_eq_cos_amp * std::sin(at.x1) * x2) /
          c.m_eq;
  j.a22 = -c.damping(at.x1) * g / c.m_eq;
  return j;
}

inline StabilityClass classify(const Mat2& j) {
  const double tr = j.trace();
  const double det = j.det();
  if (det < 0.0) return StabilityClass::saddle;
  if (det == 0.0 || tr == 0.0) return StabilityClass::nonhyperbolic;
  return tr < 0.0 ? StabilityClass::stable : StabilityClass::unstable;
}

struct NewtonSettings {
  int max_iterations{100};
  double residual_tol{1e-12};
  int max_halvings{30};
};

/// Damped Newton iteration on f(x) = 0 for the autonomous model. Saddles are
/// returned with their classification, not rejected.
inline Equilibrium find_equilibrium(const RomCoefficients& coeffs,
                                    const PllParams& pll, const RomState& guess,
                                    const NewtonSettings& ns = {}) {
  const auto f = [&](const RomState& s) -> Vec2 {
    const RomDeriv d = rom_rhs(s, coeffs, pll);
    return {d.dx1, d.dx3};
  };

  RomState x = guess;
  Vec2 r = f(x);
  const double f_scale =
      std::max(1.0, std::abs(coeffs.t_m_eq) + std::abs(coeffs.t_e_amp_ki));
  const double tol = ns.residual_tol * f_scale;

  for (int it = 0; it < ns.max_iterations; ++it) {
    if (norm_inf(r) <= tol) break;
    const Mat2 j = jacobian(x, coeffs, pll);
    Vec2 step;
    const double det = j.det();
    if (std::abs(det) > 1e-14 * std::max(1.0, j.max_abs() * j.max_abs())) {
      step = inverse(j) * Vec2{-r.x, -r.y};
    } else {
      // near-singular Jacobian (e.g. torque-curve extremum): fall back to a
      // gradient-ish step so double roots still make progress
      step = {-r.x, -r.y / f_scale};
    }
    double lambda = 1.0;
    RomState x_new;
    Vec2 r_new;
    int h = 0;
    for (; h < ns.max_halvings; ++h) {
      x_new = {x.x1 + lambda * step.x, x.x3 + lambda * step.y};
      r_new = f(x_new);
      if (norm_inf(r_new) < norm_inf(r)) break;
      lambda *= 0.5;
    }
    if (h == ns.max_halvings)
      throw NoConvergence("find_equilibrium: line search stalled at residual " +
                          std::to_string(norm_inf(r)));
    x = x_new;
    r = r_new;
  }
  if (norm_inf(r) > tol * 10.0)
    throw NoConvergence("find_equilibrium: residual " +
                        std::to_string(norm_inf(r)) + " after max iterations");

  Equilibrium eq;
  eq.state = x;
  eq.residual_norm = norm_inf(r);
  eq.branch_index =
      static_cast<int>(std::lround(x.x1 / (2.0 * std::numbers::pi)));
  eq.jacobian = jacobian(x, coeffs, pll);
  eq.stability = classify(eq.jacobian);
  return eq;
}

/// Solves A^T P + P A = -Q for symmetric P via the closed-form 3x3 system on
/// (p11, p12, p22). A must be Hurwitz and Q symmetric positive definite.
inline Mat2 solve_lyapunov(const Mat2& a, const Mat2& q) {
  if (!is_hurwitz(a))
    throw NotHurwitz("solve_lyapunov: A is not Hurwitz (trace " +
                     std::to_string(a.trace()) + ", det " +
                     std::to_string(a.det()) + ")");
  // rows: d/d(p11), d/d(p12), d/d(p22) of the three independent entries
  std::array<std::array<double, 4>, 3> sys{{
      {2.0 * a.a11, 2.0 * a.a21, 0.0, -q.a11},
      {a.a12, a.a11 + a.a22, a.a21, -q.a12},
      {0.0, 2.0 * a.a12, 2.0 * a.a22, -q.a22},
  }};
  const auto p = solve3(sys);
  Mat2 P{p[0], p[1], p[1], p[2]};
  const auto eigs = sym_eigenvalues(P);
  if (!(eigs[0] > 0.0))
    throw ComputationError("solve_lyapunov: P not positive definite");
  return P;
}

inline double lyapunov_residual(const Mat2& a, const Mat2& p, const Mat2& q) {
  const Mat2 r = a.transpose() * p + p * a + q;
  return r.max_abs();
}

/// Quadratic level evaluated relative to an equilibrium.
inline double quadratic_level(const Mat2& p, const RomState& x,
                              const RomState& x0) {
  const Vec2 d{x.x1 - x0.x1, x.x3 - x0.x3};
  return dot(d, p * d);
}

struct LyapunovSeed {
  Mat2 p;
  Mat2 q;
  double level_c{0.0};
  std::vector<RomState> seed_points;  ///< ordered by whitened angle
  std::vector<double> angles;         ///< whitened-coordinate angles (rad)
  Equilibrium equilibrium;
  int halvings_used{0};
};

/// Point on the ellipse { x : (x-x0)^T P (x-x0) = c } at whitened angle theta.
inline RomState ellipse_point(const RomState& x0, const Chol2& chol, double c,
                              double theta) {
  const double rad = std::sqrt(c);
  const Vec2 u{rad * std::cos(theta), rad * std::sin(theta)};
  const Vec2 d = chol.solve_lt(u);
  return {x0.x1 + d.x, x0.x3 + d.y};
}

/// Distributes n_points on the P-ellipse at level c, uniform in the angle of
/// the whitened coordinates, and verifies each seed forward-converges to the
/// equilibrium through `attracted`. Throws SeedNotAttracted otherwise.
template <class AttractedFn>
inline LyapunovSeed seed_level_set(const Equilibrium& eq, const Mat2& p,
                                   const Mat2& q, double level_c,
                                   std::size_t n_points,
                                   AttractedFn&& attracted) {
  if (!(level_c > 0.0))
    throw ValidationError("seed_level_set: level_c must be > 0");
  if (n_points < 16)
    throw ValidationError("seed_level_set: need at least 16 points");

  const Chol2 chol = Chol2::factor(p);
  LyapunovSeed seed;
  seed.p = p;
  seed.q = q;
  seed.level_c = level_c;
  seed.equilibrium = eq;
  seed.seed_points.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double theta =
        2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n_points);
    const RomState s = ellipse_point(eq.state, chol, level_c, theta);
    if (!attracted(s))
      throw SeedNotAttracted("seed_level_set: seed at angle " +
                             std::to_string(theta) +
                             " does not converge; shrink the level");
    seed.seed_points.push_back(s);
    seed.angles.push_back(theta);
  }
  return seed;
}

struct SeedSettings {
  std::size_t n_points{256};
  double x1_extent{0.2};      ///< rad: initial ellipse extent along x1
  int max_halvings{10};
};

/// Level for which the ellipse spans x1_extent along x1: c = e^2 * det(P)/p22.
inline double level_for_x1_extent(const Mat2& p, double x1_extent) {
  return x1_extent * x1_extent * p.det() / p.a22;
}

/// Auto-shrink wrapper: starts from the x1-extent rule and halves the level
/// until every seed passes the forward-convergence check.
template <class AttractedFn>
inline LyapunovSeed choose_seed(const Equilibrium& eq, const Mat2& p,
                                const Mat2& q, const SeedSettings& ss,
                                AttractedFn&& attracted) {
  double c = level_for_x1_extent(p, ss.x1_extent);
  for (int h = 0; h <= ss.max_halvings; ++h) {
    try {
      LyapunovSeed seed =
          seed_level_set(eq, p, q, c, ss.n_points, attracted);
      seed.halvings_used = h;
      return seed;
    } catch (const SeedNotAttracted&) {
      c *= 0.5;
    }
  }
  throw SeedNotAttracted("choose_seed: no attracted level after " +
                         std::to_string(ss.max_halvings) + " halvings");
}

struct RefineSettings {
  double max_arc{0.05};     ///< max adjacent-vertex gap, scaled metric
  int depth_cap{8};         ///< max bisections per initial seed interval
  double x3_scale{0.0};     ///< metric scale for x3 (0 = use pll.x2_max)
  bool strict{true};        ///< throw when the cap leaves gaps unresolved
};

struct RefinementStats {
  std::size_t n_seeds{0};
  std::size_t n_vertices{0};
  std::size_t inserted{0};
  int max_depth_used{0};
  double max_gap{0.0};
  std::size_t unresolved_gaps{0};
};

struct TlroaBoundary {
  std::vector<RomState> vertices;  ///< ordered, closed implicitly
  double horizon_t{0.0};
  Equilibrium equilibrium;
  double level_c{0.0};
  Mat2 p;
  double x3_scale{1.0};
  RefinementStats stats;
  std::vector<Vec2> scaled;  ///< vertices in the (x1, x3/x3_scale) metric

  void rebuild_scaled() {
    scaled.clear();
    scaled.reserve(vertices.size());
    for (const auto& v : vertices) scaled.push_back({v.x1, v.x3 / x3_scale});
  }
};

class RefinementDepthExceeded : public ComputationError {
 public:
  RefinementDepthExceeded(const std::string& msg, TlroaBoundary partial)
      : ComputationError(msg), partial_boundary(std::move(partial)) {}
  TlroaBoundary partial_boundary;
};

/// Even-odd containment with the boundary band counting as inside. The edge
/// tolerance is measured in the boundary's scaled metric.
inline bool contains(const TlroaBoundary& b, const RomState& x,
                     double edge_tol = 1e-9) {
  return point_in_polygon({x.x1, x.x3 / b.x3_scale}, b.scaled, edge_tol);
}

/// Area of the boundary polygon in raw (x1, x3) units.
inline double boundary_area(const TlroaBoundary& b) {
  std::vector<Vec2> raw;
  raw.reserve(b.vertices.size());
  for (const auto& v : b.vertices) raw.push_back({v.x1, v.x3});
  return polygon_area(raw);
}

/// Propagates the seed ellipse backwards for horizon_t. Adjacent images
/// further apart than max_arc (in the scaled state metric) trigger bisection
/// of the seed interval on the ellipse, recursively up to depth_cap, so the
/// polyline stays resolved where the reverse flow stretches it.
inline TlroaBoundary compute_tlroa(const LyapunovSeed& seed, double horizon_t,
                                   const PllParams& pll,
                                   const RomCoefficients& coeffs,
                                   const SolverSettings& solver,
                                   const RefineSettings& refine) {
  if (horizon_t < 0.0)
    throw ValidationError("compute_tlroa: horizon must be >= 0");

  TlroaBoundary out;
  out.horizon_t = horizon_t;
  out.equilibrium = seed.equilibrium;
  out.level_c = seed.level_c;
  out.p = seed.p;
  // default metric scale: the seed ellipse aspect ratio, which whitens the
  // local anisotropy of the dynamics (x3 extent / x1 extent = sqrt(p11/p22))
  if (refine.x3_scale > 0.0)
    out.x3_scale = refine.x3_scale;
  else if (seed.p.a11 > 0.0 && seed.p.a22 > 0.0)
    out.x3_scale = std::sqrt(seed.p.a11 / seed.p.a22);
  else
    out.x3_scale = pll.x2_max;
  out.stats.n_seeds = seed.seed_points.size();

  SolverSettings rset = solver;
  rset.sample_interval = 0.0;  // endpoints only

  const Chol2 chol = Chol2::factor(seed.p);
  const auto propagate = [&](double theta) -> RomState {
    const RomState s0 =
        ellipse_point(seed.equilibrium.state, chol, seed.level_c, theta);
    if (horizon_t == 0.0) return s0;
    return integrate_reverse(s0, horizon_t, coeffs, pll, rset).back_state();
  };

  const auto metric = [&](const RomState& a, const RomState& b) {
    return std::hypot(a.x1 - b.x1, (a.x3 - b.x3) / out.x3_scale);
  };

  struct Node {
    double theta;
    RomState image;
  };
  std::vector<Node> nodes;
  nodes.reserve(seed.seed_points.size() + 1);
  for (std::size_t i = 0; i < seed.seed_points.size(); ++i) {
    const double theta = seed.angles[i];
    if (horizon_t == 0.0)
      nodes.push_back({theta, seed.seed_points[i]});
    else
      nodes.push_back({theta, propagate(theta)});
  }
  // wrap-around sentinel
  nodes.push_back({2.0 * std::numbers::pi, nodes.front().image});

  std::vector<Node> resolved;
  resolved.reserve(nodes.size() * 2);
  // depth-first refinement of each adjacent interval
  struct Frame {
    Node a, b;
    int depth;
  };
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    resolved.push_back(nodes[i]);
    std::vector<Frame> stack{{nodes[i], nodes[i + 1], 0}};
    std::vector<Node> interval_out;
    while (!stack.empty()) {
      Frame fr = stack.back();
      stack.pop_back();
      const double gap = metric(fr.a.image, fr.b.image);
      out.stats.max_depth_used = std::max(out.stats.max_depth_used, fr.depth);
      if (gap <= refine.max_arc) continue;
      if (fr.depth >= refine.depth_cap) {
        out.stats.unresolved_gaps++;
        out.stats.max_gap = std::max(out.stats.max_gap, gap);
        continue;
      }
      const double tm = 0.5 * (fr.a.theta + fr.b.theta);
      Node mid{tm, propagate(tm)};
      ++out.stats.inserted;
      // b-side first so the a-side pops first (keeps angle order on insert)
      stack.push_back({mid, fr.b, fr.depth + 1});
      stack.push_back({fr.a, mid, fr.depth + 1});
      interval_out.push_back(mid);
    }
    std::sort(interval_out.begin(), interval_out.end(),
              [](const Node& x, const Node& y) { return x.theta < y.theta; });
    for (auto& n : interval_out) resolved.push_back(n);
  }

  out.vertices.reserve(resolved.size());
  for (const auto& n : resolved) out.vertices.push_back(n.image);
  out.stats.n_vertices = out.vertices.size();
  out.rebuild_scaled();

  // final gap audit over the closed polyline
  for (std::size_t i = 0; i < out.vertices.size(); ++i) {
    const auto& a = out.vertices[i];
    const auto& b = out.vertices[(i + 1) % out.vertices.size()];
    out.stats.max_gap = std::max(out.stats.max_gap, metric(a, b));
  }

  if (refine.strict && out.stats.unresolved_gaps > 0)
    throw RefinementDepthExceeded(
        "compute_tlroa: " + std::to_string(out.stats.unresolved_gaps) +
            " gaps above " + std::to_string(refine.max_arc) +
            " after depth " + std::to_string(refine.depth_cap) +
            " (max gap " + std::to_string(out.stats.max_gap) + ")",
        out);

  if (!contains(out, seed.equilibrium.state, 0.0))
    throw ComputationError(
        "compute_tlroa: boundary does not enclose the equilibrium");
  return out;
}

struct ConvergenceCriterion {
  double ball_radius{1e-3};  ///< inf-norm radius around the equilibrium
  double dwell{0.1};         ///< s the state must stay inside
};

/// Observer-based convergence check: enters the ball and stays for `dwell`.
inline bool converges_to(const RomState& x0, const Equilibrium& eq,
                         double horizon, const RomCoefficients& coeffs,
                         const PllParams& pll, const SolverSettings& set,
                         const ConvergenceCriterion& crit = {}) {
  double entered = -1.0;
  bool converged = false;
  const auto observer = [&](double t, const RomState& s) -> bool {
    const double d = std::max(std::abs(s.x1 - eq.state.x1),
                              std::abs(s.x3 - eq.state.x3));
    if (d <= crit.ball_radius) {
      if (entered < 0.0) entered = t;
      if (t - entered >= crit.dwell) {
        converged = true;
        return true;  // stop early
      }
    } else {
      entered = -1.0;
    }
    return false;
  };
  bool stopped = false;
  SolverSettings s2 = set;
  s2.sample_interval = 0.0;
  // dwell detection needs observations no sparser than the dwell window
  s2.max_step = crit.dwell * 0.5;
  try {
    integrate_autonomous_observed(x0, horizon, coeffs, pll, s2, observer,
                                  stopped);
  } catch (const ComputationError&) {
    return false;  // diverged or stalled: not attracted
  }
  return converged;
}

/// Definitional forward-simulation oracle for a time-limited boundary: the
/// horizon-long forward flow must deliver the point into the certified seed
/// level set. Divergence along the way counts as not reaching it.
inline bool reaches_seed_within(const RomState& x0, const TlroaBoundary& b,
                                const RomCoefficients& coeffs,
                                const PllParams& pll,
                                const SolverSettings& set) {
  RomState xf = x0;
  if (b.horizon_t > 0.0) {
    SolverSettings s2 = set;
    s2.sample_interval = 0.0;
    bool stopped = false;
    try {
      xf = integrate_autonomous_observed(x0, b.horizon_t, coeffs, pll, s2,
                                         detail::NullObserver{}, stopped);
    } catch (const ComputationError&) {
      return false;
    }
  }
  return quadratic_level(b.p, xf, b.equilibrium.state) <= b.level_c;
}

struct CctSettings {
  double search_window{10.0};   ///< s past fault application
  double resolution{1e-3};      ///< s
  double edge_tol{1e-9};        ///< containment tolerance (scaled metric)
};

struct CctResult {
  double cct{std::numeric_limits<double>::infinity()};  ///< s after apply
  RomState exit_state;
  bool never_exits{true};
};

/// Integrates the fault-period dynamics from the pre-disturbance equilibrium
/// and locates the first boundary crossing by bisection to `resolution`.
inline CctResult critical_clearing_time(const RomState& pre_eq,
                                        const RomCoefficients& fault_coeffs,
                                        const PllParams& pll,
                                        const TlroaBoundary& boundary,
                                        const SolverSettings& solver,
                                        const CctSettings& cs = {}) {
  if (!contains(boundary, pre_eq, cs.edge_tol))
    throw ImmediateExit(
        "critical_clearing_time: initial state already outside the boundary");

  SolverSettings set = solver;
  set.sample_interval = 0.0;

  const auto state_after = [&](const RomState& from, double dt) -> RomState {
    if (dt <= 0.0) return from;
    bool stopped = false;
    return integrate_autonomous_observed(from, dt, fault_coeffs, pll, set,
                                         detail::NullObserver{}, stopped);
  };

  // march on the dense grid until the trajectory leaves the boundary
  const double dt = std::max(solver.sample_interval, cs.resolution);
  double t_in = 0.0;
  RomState x_in = pre_eq;
  double t_out = -1.0;
  RomState x_out;
  for (double t = dt; t <= cs.search_window + 0.5 * dt; t += dt) {
    const RomState x = state_after(x_in, t - t_in);
    if (!contains(boundary, x, cs.edge_tol)) {
      t_out = t;
      x_out = x;
      break;
    }
    t_in = t;
    x_in = x;
  }
  if (t_out < 0.0) return {};  // never exits: +inf sentinel

  // bisect [t_in, t_out] down to the requested resolution
  while (t_out - t_in > cs.resolution) {
    const double tm = 0.5 * (t_in + t_out);
    const RomState xm = state_after(x_in, tm - t_in);
    if (contains(boundary, xm, cs.edge_tol)) {
      t_in = tm;
      x_in = xm;
    } else {
      t_out = tm;
      x_out = xm;
    }
  }
  return {t_out, x_out, false};
}

struct StateBox {
  double x1_lo{0.0}, x1_hi{0.0};
  double x3_lo{0.0}, x3_hi{0.0};

  bool contains_point(const RomState& s) const {
    return s.x1 >= x1_lo && s.x1 <= x1_hi && s.x3 >= x3_lo && s.x3 <= x3_hi;
  }
  void validate() const {
    if (!(x1_hi > x1_lo) || !(x3_hi > x3_lo))
      throw ValidationError("StateBox: empty extent");
  }
};

struct RoaGrid {
  StateBox box;
  std::size_t nx{0}, ny{0};
  std::vector<RomState> points;   ///< row-major, x1 fastest
  std::vector<bool> converged;
  double horizon{0.0};
};

/// Brute-force forward-simulation classifier: integrates every grid point for
/// `horizon` and labels it converged when it settles into the equilibrium
/// ball. Divergent points are labelled not-converged, never an error.
inline RoaGrid brute_force_roa(const StateBox& box, std::size_t nx,
                               std::size_t ny, double horizon,
                               const Equilibrium& eq,
                               const RomCoefficients& coeffs,
                               const PllParams& pll,
                               const SolverSettings& solver,
                               const ConvergenceCriterion& crit = {}) {
  box.validate();
  if (nx < 2 || ny < 2)
    throw ValidationError("brute_force_roa: need at least a 2x2 grid");
  if (!box.contains_point(eq.state))
    throw ValidationError("brute_force_roa: box must contain the equilibrium");

  RoaGrid grid;
  grid.box = box;
  grid.nx = nx;
  grid.ny = ny;
  grid.horizon = horizon;
  grid.points.reserve(nx * ny);
  grid.converged.reserve(nx * ny);
  for (std::size_t j = 0; j < ny; ++j) {
    const double x3 =
        box.x3_lo + (box.x3_hi - box.x3_lo) * static_cast<double>(j) /
                        static_cast<double>(ny - 1);
    for (std::size_t i = 0; i < nx; ++i) {
      const double x1 =
          box.x1_lo + (box.x1_hi - box.x1_lo) * static_cast<double>(i) /
                          static_cast<double>(nx - 1);
      const RomState s{x1, x3};
      grid.points.push_back(s);
      grid.converged.push_back(
          converges_to(s, eq, horizon, coeffs, pll, solver, crit));
    }
  }
  return grid;
}

}  // namespace tlroa
