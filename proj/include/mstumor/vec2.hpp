#pragma once

#include <array>
#include <cmath>

namespace mstumor {

struct Vec2 {
  double p = 0.0;
  double d = 0.0;

  constexpr Vec2 &operator+=(const Vec2 &o) {
    p += o.p;
    d += o.d;
    return *this;
  }
  constexpr Vec2 &operator-=(const Vec2 &o) {
    p -= o.p;
    d -= o.d;
    return *this;
  }
  friend constexpr Vec2 operator+(Vec2 a, const Vec2 &b) { return a += b; }
  friend constexpr Vec2 operator-(Vec2 a, const Vec2 &b) { return a -= b; }
  friend constexpr Vec2 operator*(double s, const Vec2 &a) { return {s * a.p, s * a.d}; }
  friend constexpr Vec2 operator*(const Vec2 &a, double s) { return s * a; }
  friend constexpr Vec2 operator/(const Vec2 &a, double s) { return {a.p / s, a.d / s}; }
  friend constexpr bool operator==(const Vec2 &, const Vec2 &) = default;
};

constexpr double dot(const Vec2 &a, const Vec2 &b) { return a.p * b.p + a.d * b.d; }
inline double norm(const Vec2 &a) { return std::hypot(a.p, a.d); }

/// Row-major 2x2 matrix acting on (p, d) pairs.
struct Mat2 {
  double pp = 0.0, pd = 0.0;
  double dp = 0.0, dd = 0.0;

  static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static constexpr Mat2 scaled_identity(double s) { return {s, 0.0, 0.0, s}; }

  constexpr double det() const { return pp * dd - pd * dp; }
  friend constexpr bool operator==(const Mat2 &, const Mat2 &) = default;
};

constexpr Vec2 operator*(const Mat2 &m, const Vec2 &v) {
  return {m.pp * v.p + m.pd * v.d, m.dp * v.p + m.dd * v.d};
}
constexpr Mat2 operator*(const Mat2 &a, const Mat2 &b) {
  return {a.pp * b.pp + a.pd * b.dp, a.pp * b.pd + a.pd * b.dd,
          a.dp * b.pp + a.dd * b.dp, a.dp * b.pd + a.dd * b.dd};
}
constexpr Mat2 operator+(const Mat2 &a, const Mat2 &b) {
  return {a.pp + b.pp, a.pd + b.pd, a.dp + b.dp, a.dd + b.dd};
}
constexpr Mat2 operator*(double s, const Mat2 &a) {
  return {s * a.pp, s * a.pd, s * a.dp, s * a.dd};
}

}  // namespace mstumor
