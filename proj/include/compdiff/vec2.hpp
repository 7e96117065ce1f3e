#pragma once

#include <cmath>

namespace compdiff {

// The sample space is R^2 throughout.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double c) const { return {x * c, y * c}; }
  Vec2 operator/(double c) const { return {x / c, y / c}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  Vec2& operator*=(double c) {
    x *= c;
    y *= c;
    return *this;
  }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm2() const { return x * x + y * y; }
  double norm() const { return std::sqrt(norm2()); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline Vec2 operator*(double c, const Vec2& v) { return v * c; }

// Symmetric 2x2 matrix, enough linear algebra for GMM covariances.
struct Sym2 {
  double a = 1.0;  // xx
  double b = 0.0;  // xy
  double c = 1.0;  // yy

  Sym2() = default;
  Sym2(double a_, double b_, double c_) : a(a_), b(b_), c(c_) {}
  static Sym2 iso(double v) { return {v, 0.0, v}; }

  double det() const { return a * c - b * b; }
  Sym2 inverse() const {
    double d = det();
    return {c / d, -b / d, a / d};
  }
  Vec2 mul(const Vec2& v) const { return {a * v.x + b * v.y, b * v.x + c * v.y}; }
  Sym2 scaled(double s) const { return {a * s, b * s, c * s}; }
  Sym2 plus_iso(double v) const { return {a + v, b, c + v}; }
  // Eigenvalues (ascending). Used for covariance floors.
  void eigvals(double& lo, double& hi) const {
    double tr = a + c;
    double disc = std::sqrt(std::fmax(0.0, (a - c) * (a - c) + 4.0 * b * b));
    lo = 0.5 * (tr - disc);
    hi = 0.5 * (tr + disc);
  }
};

}  // namespace compdiff
