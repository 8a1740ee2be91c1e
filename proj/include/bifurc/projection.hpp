// Lifts 2D pixel detections into timestamped 3D world points using the
// time-synchronized probe pose log.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "bifurc/geometry.hpp"
#include "bifurc/mask.hpp"

namespace bifurc {

struct Quat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  Quat normalized() const {
    const double n = norm();
    if (n == 0.0) throw std::invalid_argument("zero quaternion");
    return {w / n, x / n, y / n, z / n};
  }

  Vec3 rotate(const Vec3& v) const {
    // q v q*, expanded via the double-cross identity.
    const Vec3 qv{x, y, z};
    const Vec3 t = cross(qv, v) * 2.0;
    return v + t * w + cross(qv, t);
  }
};

/// Shortest-arc spherical interpolation; falls back to normalized lerp when
/// the rotations are nearly aligned.
inline Quat slerp(const Quat& a, Quat b, double u) {
  double d = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
  if (d < 0.0) {
    b = {-b.w, -b.x, -b.y, -b.z};
    d = -d;
  }
  if (d > 1.0 - 1e-10) {
    Quat out{a.w + (b.w - a.w) * u, a.x + (b.x - a.x) * u, a.y + (b.y - a.y) * u,
             a.z + (b.z - a.z) * u};
    return out.normalized();
  }
  const double theta = std::acos(std::clamp(d, -1.0, 1.0));
  const double s = std::sin(theta);
  const double ka = std::sin((1.0 - u) * theta) / s;
  const double kb = std::sin(u * theta) / s;
  return {ka * a.w + kb * b.w, ka * a.x + kb * b.x, ka * a.y + kb * b.y, ka * a.z + kb * b.z};
}

struct Pose {
  double t = 0.0;        // seconds
  Vec3 translation;      // millimeters
  Quat rotation;         // unit quaternion (w, x, y, z)
};

/// Image-to-probe transform. Pixel (0,0) sits at origin_u/origin_v along the
/// two image axes; the axes fix the convention u = lateral, v = axial depth.
struct Calibration {
  double pixel_spacing = 50.0 / 256.0;  // mm per pixel, isotropic
  double origin_u = 0.0;                // mm, probe-frame offset of pixel (0,0)
  double origin_v = 0.0;
  Vec3 u_axis{1.0, 0.0, 0.0};
  Vec3 v_axis{0.0, 1.0, 0.0};

  Vec3 image_to_probe(const Point2& px) const {
    return u_axis * (px.x * pixel_spacing + origin_u) +
           v_axis * (px.y * pixel_spacing + origin_v);
  }
};

/// Pose at time t: linear translation / spherical rotation interpolation
/// between the bracketing log entries, clamped at the ends, exact on stamps.
inline Pose pose_at(std::span<const Pose> log, double t) {
  if (log.empty()) throw std::invalid_argument("empty pose log");
  if (t <= log.front().t) return log.front();
  if (t >= log.back().t) return log.back();

  const auto upper = std::lower_bound(
      log.begin(), log.end(), t, [](const Pose& p, double v) { return p.t < v; });
  if (upper->t == t) return *upper;
  const Pose& b = *upper;
  const Pose& a = *(upper - 1);
  const double u = (t - a.t) / (b.t - a.t);

  Pose out;
  out.t = t;
  out.translation = a.translation + (b.translation - a.translation) * u;
  out.rotation = slerp(a.rotation, b.rotation, u);
  return out;
}

inline Point3 project(const Detection& d, const Calibration& cal, std::span<const Pose> log) {
  const Pose pose = pose_at(log, d.t);
  const Vec3 probe = cal.image_to_probe(d.center);
  const Vec3 world = pose.rotation.rotate(probe) + pose.translation;
  return {world.x, world.y, world.z, d.t};
}

}  // namespace bifurc
