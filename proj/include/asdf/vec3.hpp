#pragma once

#include <array>
#include <cmath>

namespace asdf {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm2() const { return dot(*this); }
  double norm() const { return std::sqrt(norm2()); }
  Vec3 normalized() const { return *this / norm(); }
  Vec3 cwise_abs() const { return {std::fabs(x), std::fabs(y), std::fabs(z)}; }
  Vec3 cwise_max(const Vec3& o) const {
    return {std::fmax(x, o.x), std::fmax(y, o.y), std::fmax(z, o.z)};
  }
  Vec3 cwise_min(const Vec3& o) const {
    return {std::fmin(x, o.x), std::fmin(y, o.y), std::fmin(z, o.z)};
  }
  double max_component() const { return std::fmax(x, std::fmax(y, z)); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

struct Mat3 {
  // Row-major.
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return {}; }

  // Rotation about a unit axis by angle (radians), Rodrigues form.
  static Mat3 axis_angle(const Vec3& axis, double angle) {
    const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
    const double x = axis.x, y = axis.y, z = axis.z;
    Mat3 r;
    r.m = {t * x * x + c,     t * x * y - s * z, t * x * z + s * y,
           t * x * y + s * z, t * y * y + c,     t * y * z - s * x,
           t * x * z - s * y, t * y * z + s * x, t * z * z + c};
    return r;
  }

  double operator()(int r, int c) const { return m[static_cast<std::size_t>(r) * 3 + c]; }
  double& operator()(int r, int c) { return m[static_cast<std::size_t>(r) * 3 + c]; }

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double acc = 0;
        for (int k = 0; k < 3; ++k) acc += (*this)(i, k) * o(k, j);
        r(i, j) = acc;
      }
    return r;
  }

  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
  }

  double det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }
};

// y = R x + t
struct RigidTransform {
  Mat3 rot;
  Vec3 trans;

  static RigidTransform identity() { return {}; }

  // Rotation by angle about an axis through a pivot point.
  static RigidTransform about_pivot(const Vec3& pivot, const Vec3& axis, double angle) {
    RigidTransform t;
    t.rot = Mat3::axis_angle(axis, angle);
    t.trans = pivot - t.rot * pivot;
    return t;
  }

  Vec3 apply(const Vec3& p) const { return rot * p + trans; }

  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rot = rot.transposed();
    inv.trans = -(inv.rot * trans);
    return inv;
  }

  // (*this) ∘ other: applies other first.
  RigidTransform compose(const RigidTransform& other) const {
    RigidTransform r;
    r.rot = rot * other.rot;
    r.trans = rot * other.trans + trans;
    return r;
  }
};

struct Aabb {
  Vec3 lo{1e300, 1e300, 1e300};
  Vec3 hi{-1e300, -1e300, -1e300};

  void expand(const Vec3& p) {
    lo = lo.cwise_min(p);
    hi = hi.cwise_max(p);
  }
  void expand(const Aabb& b) {
    lo = lo.cwise_min(b.lo);
    hi = hi.cwise_max(b.hi);
  }
  Vec3 center() const { return (lo + hi) * 0.5; }
  Vec3 half() const { return (hi - lo) * 0.5; }
};

}  // namespace asdf
