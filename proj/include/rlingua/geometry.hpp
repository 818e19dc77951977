#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace rlingua::geometry {

using Vec3 = std::array<double, 3>;
using Rot3 = std::array<double, 9>;  // row-major

inline double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

inline double distance(const Vec3& a, const Vec3& b) {
  return norm({a[0] - b[0], a[1] - b[1], a[2] - b[2]});
}

inline double planar_distance(const Vec3& a, const Vec3& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

/// Wraps into (-period/2, period/2]. Values within 1e-12 of the open end
/// are treated as lying on it, so 3*pi maps to pi rather than -pi.
inline double wrap_periodic(double angle, double period) {
  double r = std::remainder(angle, period);
  if (r <= -0.5 * period + 1e-12) r += period;
  return r;
}

inline double wrap_angle(double angle) { return wrap_periodic(angle, 2.0 * std::numbers::pi); }

/// Rotation for extrinsic x-y-z Euler angles: R = Rz(c) * Ry(b) * Rx(a).
inline Rot3 rotation_from_euler(const Vec3& e) {
  const double ca = std::cos(e[0]), sa = std::sin(e[0]);
  const double cb = std::cos(e[1]), sb = std::sin(e[1]);
  const double cc = std::cos(e[2]), sc = std::sin(e[2]);
  return {cb * cc, sa * sb * cc - ca * sc, ca * sb * cc + sa * sc,
          cb * sc, sa * sb * sc + ca * cc, ca * sb * sc - sa * cc,
          -sb,     sa * cb,                ca * cb};
}

inline Vec3 euler_from_rotation(const Rot3& r) {
  const double sb = std::clamp(-r[6], -1.0, 1.0);
  const double b = std::asin(sb);
  if (std::abs(sb) > 1.0 - 1e-12) {
    // Gimbal lock: fold the whole yaw into roll.
    return {std::atan2(-r[5], r[4]), b, 0.0};
  }
  return {std::atan2(r[7], r[8]), b, std::atan2(r[3], r[0])};
}

inline Rot3 multiply(const Rot3& a, const Rot3& b) {
  Rot3 out{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a[i * 3 + k] * b[k * 3 + j];
      out[i * 3 + j] = s;
    }
  }
  return out;
}

inline Rot3 transpose(const Rot3& a) {
  return {a[0], a[3], a[6], a[1], a[4], a[7], a[2], a[5], a[8]};
}

}  // namespace rlingua::geometry
