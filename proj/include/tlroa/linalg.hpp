#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "tlroa/errors.hpp"

namespace tlroa {

struct Vec2 {
  double x{0.0};
  double y{0.0};

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm_inf(Vec2 v) { return std::max(std::abs(v.x), std::abs(v.y)); }
inline double norm2(Vec2 v) { return std::hypot(v.x, v.y); }

/// Dense 2x2 matrix, row major.
struct Mat2 {
  double a11{0.0}, a12{0.0};
  double a21{0.0}, a22{0.0};

  static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }

  double trace() const { return a11 + a22; }
  double det() const { return a11 * a22 - a12 * a21; }

  Vec2 operator*(Vec2 v) const {
    return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y};
  }
  friend Mat2 operator*(Mat2 a, Mat2 b) {
    return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22,
            a.a21 * b.a11 + a.a22 * b.a21, a.a21 * b.a12 + a.a22 * b.a22};
  }
  friend Mat2 operator+(Mat2 a, Mat2 b) {
    return {a.a11 + b.a11, a.a12 + b.a12, a.a21 + b.a21, a.a22 + b.a22};
  }
  Mat2 transpose() const { return {a11, a21, a12, a22}; }

  double max_abs() const {
    return std::max(std::max(std::abs(a11), std::abs(a12)),
                    std::max(std::abs(a21), std::abs(a22)));
  }
};

inline Mat2 inverse(const Mat2& m) {
  const double d = m.det();
  if (d == 0.0) throw ComputationError("Mat2: singular matrix");
  return {m.a22 / d, -m.a12 / d, -m.a21 / d, m.a11 / d};
}

/// Both eigenvalues have strictly negative real part (2x2 criterion).
inline bool is_hurwitz(const Mat2& m) { return m.trace() < 0.0 && m.det() > 0.0; }

/// Eigenvalues of a symmetric 2x2 (a12 == a21 assumed).
inline std::array<double, 2> sym_eigenvalues(const Mat2& m) {
  const double mean = 0.5 * (m.a11 + m.a22);
  const double d = std::hypot(0.5 * (m.a11 - m.a22), m.a12);
  return {mean - d, mean + d};
}

/// Lower-triangular Cholesky factor of an SPD 2x2.
struct Chol2 {
  double l11, l21, l22;

  static Chol2 factor(const Mat2& p) {
    if (p.a11 <= 0.0) throw ComputationError("Chol2: matrix not SPD");
    const double l11 = std::sqrt(p.a11);
    const double l21 = p.a21 / l11;
    const double rest = p.a22 - l21 * l21;
    if (rest <= 0.0) throw ComputationError("Chol2: matrix not SPD");
    return {l11, l21, std::sqrt(rest)};
  }

  /// Solves L^T x = u (back substitution).
  Vec2 solve_lt(Vec2 u) const {
    const double x2 = u.y / l22;
    const double x1 = (u.x - l21 * x2) / l11;
    return {x1, x2};
  }
};

/// Solves a dense 3x3 system in place, partial pivoting. Used by the
/// closed-form Lyapunov solve.
inline std::array<double, 3> solve3(std::array<std::array<double, 4>, 3> m) {
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    if (m[piv][col] == 0.0) throw ComputationError("solve3: singular system");
    std::swap(m[col], m[piv]);
    for (int r = col + 1; r < 3; ++r) {
      const double f = m[r][col] / m[col][col];
      for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
    }
  }
  std::array<double, 3> x{};
  for (int r = 2; r >= 0; --r) {
    double s = m[r][3];
    for (int c = r + 1; c < 3; ++c) s -= m[r][c] * x[c];
    x[r] = s / m[r][r];
  }
  return x;
}

}  // namespace tlroa
