#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "tlroa/linalg.hpp"

namespace tlroa {

// Planar polygon utilities on an open vertex list (last->first edge implied).
// All routines are exact-arithmetic-free; callers supply tolerances where
// boundary behaviour matters.

inline double polygon_area(const std::vector<Vec2>& poly) {
  double s = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    s += a.x * b.y - b.x * a.y;
  }
  return 0.5 * std::abs(s);
}

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return norm2(p - a);
  double t = dot(p - a, ab) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return norm2(p - (a + t * ab));
}

inline double point_polygon_distance(Vec2 p, const std::vector<Vec2>& poly) {
  double d = std::numeric_limits<double>::infinity();
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i)
    d = std::min(d, point_segment_distance(p, poly[i], poly[(i + 1) % n]));
  return d;
}

/// Even-odd (ray casting) point-in-polygon test. Points within edge_tol of
/// any edge count as inside ("on boundary").
inline bool point_in_polygon(Vec2 p, const std::vector<Vec2>& poly,
                             double edge_tol = 0.0) {
  if (edge_tol > 0.0 && point_polygon_distance(p, poly) <= edge_tol) return true;
  bool in = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& vi = poly[i];
    const Vec2& vj = poly[j];
    if ((vi.y > p.y) != (vj.y > p.y) &&
        p.x < (vj.x - vi.x) * (p.y - vi.y) / (vj.y - vi.y) + vi.x)
      in = !in;
  }
  return in;
}

namespace detail {
inline double orient(Vec2 a, Vec2 b, Vec2 c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}
inline bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double o1 = orient(a, b, c);
  const double o2 = orient(a, b, d);
  const double o3 = orient(c, d, a);
  const double o4 = orient(c, d, b);
  return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0));
}
}  // namespace detail

/// True when no two non-adjacent edges cross (O(n^2); intended for tests and
/// post-construction validation, not hot paths).
inline bool polygon_is_simple(const std::vector<Vec2>& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // skip adjacent edges (shared vertex)
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      if (detail::segments_intersect(poly[i], poly[(i + 1) % n], poly[j],
                                     poly[(j + 1) % n]))
        return false;
    }
  }
  return true;
}

}  // namespace tlroa
