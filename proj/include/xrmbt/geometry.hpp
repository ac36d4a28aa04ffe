// SPDX-License-Identifier: Apache-2.0
//
// Plain (non-differentiable) 3D math: vectors, rotation matrices, the 6D
// rotation encoding, and capsule geometry for surface sampling, occlusion
// and point-to-surface distances.
#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace xrmbt::geom {

template <typename T>
struct Vec3 {
  T x = 0, y = 0, z = 0;

  Vec3() = default;
  Vec3(T x_, T y_, T z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(T s) const { return {x * s, y * s, z * s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  T dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  T sqnorm() const { return dot(*this); }
  T norm() const { return std::sqrt(sqnorm()); }
  Vec3 normalized() const {
    const T n = norm();
    if (n <= T(0)) throw std::domain_error("normalizing zero-length vector");
    return {x / n, y / n, z / n};
  }
};

template <typename T>
inline Vec3<T> operator*(T s, const Vec3<T>& v) {
  return v * s;
}

/// Row-major 3x3 matrix.
template <typename T>
struct Mat3 {
  std::array<T, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return Mat3{}; }

  T& operator()(int r, int c) { return m[3 * r + c]; }
  T operator()(int r, int c) const { return m[3 * r + c]; }

  Vec3<T> operator*(const Vec3<T>& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        r.m[3 * i + j] =
            m[3 * i] * o.m[j] + m[3 * i + 1] * o.m[3 + j] + m[3 * i + 2] * o.m[6 + j];
    return r;
  }

  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[3 * i + j] = m[3 * j + i];
    return r;
  }

  Vec3<T> col(int c) const { return {m[c], m[3 + c], m[6 + c]}; }

  /// Rotation about +X by `a` radians (right-handed).
  static Mat3 rot_x(T a) {
    const T c = std::cos(a), s = std::sin(a);
    Mat3 r;
    r.m = {1, 0, 0, 0, c, -s, 0, s, c};
    return r;
  }
  static Mat3 rot_y(T a) {
    const T c = std::cos(a), s = std::sin(a);
    Mat3 r;
    r.m = {c, 0, s, 0, 1, 0, -s, 0, c};
    return r;
  }
  static Mat3 rot_z(T a) {
    const T c = std::cos(a), s = std::sin(a);
    Mat3 r;
    r.m = {c, -s, 0, s, c, 0, 0, 0, 1};
    return r;
  }
  /// Axis-angle (Rodrigues). Axis must be unit length.
  static Mat3 axis_angle(const Vec3<T>& u, T a) {
    const T c = std::cos(a), s = std::sin(a), t = 1 - c;
    Mat3 r;
    r.m = {t * u.x * u.x + c,       t * u.x * u.y - s * u.z, t * u.x * u.z + s * u.y,
           t * u.x * u.y + s * u.z, t * u.y * u.y + c,       t * u.y * u.z - s * u.x,
           t * u.x * u.z - s * u.y, t * u.y * u.z + s * u.x, t * u.z * u.z + c};
    return r;
  }
};

/// First two columns of a rotation matrix, stored (col0, col1).
template <typename T>
struct Rot6 {
  std::array<T, 6> v{1, 0, 0, 0, 1, 0};

  static Rot6 identity() { return Rot6{}; }
  bool operator==(const Rot6&) const = default;

  template <typename U>
  Rot6<U> cast() const {
    Rot6<U> o;
    for (int i = 0; i < 6; ++i) o.v[i] = static_cast<U>(v[i]);
    return o;
  }
};

template <typename T>
inline Rot6<T> matrix_to_rot6d(const Mat3<T>& M) {
  Rot6<T> r;
  r.v = {M(0, 0), M(1, 0), M(2, 0), M(0, 1), M(1, 1), M(2, 1)};
  return r;
}

/// Gram-Schmidt reconstruction. Throws on degenerate input (zero-length or
/// near-parallel columns) rather than guessing a frame.
template <typename T>
inline Mat3<T> rot6d_to_matrix(const Rot6<T>& r) {
  const Vec3<T> a1{r.v[0], r.v[1], r.v[2]};
  const Vec3<T> a2{r.v[3], r.v[4], r.v[5]};
  constexpr T kDegenerate = T(1e-8);
  if (a1.sqnorm() < kDegenerate) throw std::domain_error("rot6d: first column near zero");
  const Vec3<T> b1 = a1.normalized();
  const Vec3<T> u2 = a2 - b1 * b1.dot(a2);
  if (u2.sqnorm() < kDegenerate)
    throw std::domain_error("rot6d: columns near parallel, frame undefined");
  const Vec3<T> b2 = u2.normalized();
  const Vec3<T> b3 = b1.cross(b2);
  Mat3<T> M;
  M.m = {b1.x, b2.x, b3.x, b1.y, b2.y, b3.y, b1.z, b2.z, b3.z};
  return M;
}

/// Geodesic angle between two rotation matrices, in radians. The atan2 form
/// is exact for identical inputs and stays accurate at both ends of [0, pi],
/// where acos of the clamped trace loses digits.
template <typename T>
inline T rotation_angle_between(const Mat3<T>& A, const Mat3<T>& B) {
  const Mat3<T> R = A.transposed() * B;
  const T sx = (R(2, 1) - R(1, 2)) / T(2);
  const T sy = (R(0, 2) - R(2, 0)) / T(2);
  const T sz = (R(1, 0) - R(0, 1)) / T(2);
  const T s = std::sqrt(sx * sx + sy * sy + sz * sz);
  const T c = (R(0, 0) + R(1, 1) + R(2, 2) - T(1)) / T(2);
  return std::atan2(s, c);
}

/// Segment from a to b; returns the clamped projection parameter t of p onto
/// the segment (t in [0,1]). Degenerate segments (a == b) give t = 0.
template <typename T>
inline T segment_param(const Vec3<T>& p, const Vec3<T>& a, const Vec3<T>& b) {
  const Vec3<T> ab = b - a;
  const T len2 = ab.sqnorm();
  if (len2 <= T(0)) return T(0);
  const T t = (p - a).dot(ab) / len2;
  return std::clamp(t, T(0), T(1));
}

template <typename T>
inline T point_segment_distance(const Vec3<T>& p, const Vec3<T>& a, const Vec3<T>& b) {
  const T t = segment_param(p, a, b);
  return (p - (a + (b - a) * t)).norm();
}

/// Distance from p to the capsule surface; 0 if p is on or inside.
template <typename T>
inline T capsule_surface_distance(const Vec3<T>& p, const Vec3<T>& a, const Vec3<T>& b,
                                  T radius) {
  const T d = point_segment_distance(p, a, b) - radius;
  return d > T(0) ? d : T(0);
}

/// First intersection of ray o + t*d (d unit) with the capsule, as the
/// smallest t >= 0, or a negative value on a miss. Closed form: quadratic
/// against the cylindrical body plus the two sphere caps. An origin on or
/// inside the capsule returns 0.
template <typename T>
inline T ray_capsule_hit(const Vec3<T>& o, const Vec3<T>& d, const Vec3<T>& a, const Vec3<T>& b,
                         T radius) {
  if (point_segment_distance(o, a, b) <= radius) return T(0);
  T best = T(-1);
  const auto consider = [&best](T t) {
    if (t >= T(0) && (best < T(0) || t < best)) best = t;
  };

  const Vec3<T> ba = b - a;
  const Vec3<T> oa = o - a;
  const T baba = ba.dot(ba);
  if (baba > T(0)) {
    const T bard = ba.dot(d);
    const T baoa = ba.dot(oa);
    const T A = baba - bard * bard;
    const T B = baba * d.dot(oa) - baoa * bard;
    const T C = baba * oa.dot(oa) - baoa * baoa - radius * radius * baba;
    if (A > T(1e-12)) {
      const T h = B * B - A * C;
      if (h >= T(0)) {
        const T t = (-B - std::sqrt(h)) / A;
        const T y = baoa + t * bard;  // axial coordinate, scaled by |ba|^2
        if (y >= T(0) && y <= baba) consider(t);
      }
    }
  }
  for (const Vec3<T>& c : {a, b}) {
    const Vec3<T> oc = o - c;
    const T B = d.dot(oc);
    const T C = oc.dot(oc) - radius * radius;
    const T h = B * B - C;
    if (h >= T(0)) consider(-B - std::sqrt(h));
  }
  return best;
}

}  // namespace xrmbt::geom
