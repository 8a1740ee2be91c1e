// Geometric primitives shared by the reconstruction pipeline: minimum
// enclosing circles in the image plane, least-squares 3D lines, and the
// closed-form closest-point solve between two lines.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace bifurc {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Point2& a, const Point2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
};

inline double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalized(const Vec3& v) {
  const double n = norm(v);
  if (n == 0.0) throw std::invalid_argument("cannot normalize zero vector");
  return v / n;
}

/// A timestamped sample along a vessel centerline, in world millimeters.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double t = 0.0;  // seconds

  Vec3 pos() const { return {x, y, z}; }
};

struct Circle2 {
  Point2 center;
  double radius = 0.0;

  bool contains(const Point2& p, double tol = 1e-10) const {
    return distance(center, p) <= radius + tol;
  }
};

/// Infinite line anchor + unit direction; anchor is the mean of the fitted
/// points so it doubles as the track centroid.
struct Line3 {
  Vec3 anchor;
  Vec3 dir;  // unit length

  Vec3 at(double s) const { return anchor + dir * s; }
};

/// Result of the two-line closest-point solve. When `parallel` is set the
/// parameters and points are meaningless and must not be read.
struct ClosestPoints {
  double t1 = 0.0;
  double t2 = 0.0;
  Vec3 p1;
  Vec3 p2;
  double distance = 0.0;
  bool parallel = false;

  Vec3 midpoint() const { return (p1 + p2) * 0.5; }
};

namespace detail {

inline Circle2 circle_two(const Point2& a, const Point2& b) {
  Circle2 c;
  c.center = {(a.x + b.x) * 0.5, (a.y + b.y) * 0.5};
  c.radius = distance(a, b) * 0.5;
  return c;
}

// Circumcircle; falls back to the widest diameter circle when the points
// are (near-)collinear.
inline Circle2 circle_three(const Point2& a, const Point2& b, const Point2& c) {
  const double bx = b.x - a.x, by = b.y - a.y;
  const double cx = c.x - a.x, cy = c.y - a.y;
  const double d = 2.0 * (bx * cy - by * cx);
  const double scale = std::max({std::abs(bx), std::abs(by), std::abs(cx), std::abs(cy), 1.0});
  if (std::abs(d) <= 1e-12 * scale * scale) {
    Circle2 best = circle_two(a, b);
    for (const Circle2& cand : {circle_two(a, c), circle_two(b, c)})
      if (cand.radius > best.radius) best = cand;
    return best;
  }
  const double b2 = bx * bx + by * by;
  const double c2 = cx * cx + cy * cy;
  Circle2 out;
  out.center = {a.x + (cy * b2 - by * c2) / d, a.y + (bx * c2 - cx * b2) / d};
  out.radius = distance(out.center, a);
  return out;
}

}  // namespace detail

/// Smallest circle covering all points. Randomized incremental construction
/// with a fixed shuffle seed, so results are deterministic for a given input.
inline Circle2 min_enclosing_circle(std::span<const Point2> points) {
  if (points.empty()) throw std::invalid_argument("no points");

  std::vector<Point2> pts(points.begin(), points.end());
  std::mt19937 rng(0x9e3779b9u);
  std::shuffle(pts.begin(), pts.end(), rng);

  Circle2 c{pts[0], 0.0};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (c.contains(pts[i])) continue;
    c = Circle2{pts[i], 0.0};
    for (std::size_t j = 0; j < i; ++j) {
      if (c.contains(pts[j])) continue;
      c = detail::circle_two(pts[i], pts[j]);
      for (std::size_t k = 0; k < j; ++k) {
        if (c.contains(pts[k])) continue;
        c = detail::circle_three(pts[i], pts[j], pts[k]);
      }
    }
  }
  return c;
}

/// Convex hull (monotone chain), used to bound MEC cost on large pixel sets.
inline std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  if (pts.size() < 3) return pts;
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  auto turn = [](const Point2& o, const Point2& a, const Point2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && turn(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && turn(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

namespace detail {

// Cyclic Jacobi on a symmetric 3x3; returns the eigenvector of the largest
// eigenvalue. Small fixed-size problem, converges in a handful of sweeps.
inline Vec3 dominant_eigenvector(std::array<std::array<double, 3>, 3> m) {
  std::array<std::array<double, 3>, 3> v{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = std::abs(m[0][1]) + std::abs(m[0][2]) + std::abs(m[1][2]);
    double diag = std::abs(m[0][0]) + std::abs(m[1][1]) + std::abs(m[2][2]);
    if (off <= 1e-15 * std::max(diag, 1e-300)) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (m[p][q] == 0.0) continue;
        const double theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int i = 0; i < 3; ++i) {
          const double mip = m[i][p], miq = m[i][q];
          m[i][p] = c * mip - s * miq;
          m[i][q] = s * mip + c * miq;
        }
        for (int i = 0; i < 3; ++i) {
          const double mpi = m[p][i], mqi = m[q][i];
          m[p][i] = c * mpi - s * mqi;
          m[q][i] = s * mpi + c * mqi;
        }
        for (int i = 0; i < 3; ++i) {
          const double vip = v[i][p], viq = v[i][q];
          v[i][p] = c * vip - s * viq;
          v[i][q] = s * vip + c * viq;
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i < 3; ++i)
    if (m[i][i] > m[best][best]) best = i;
  return {v[0][best], v[1][best], v[2][best]};
}

inline Vec3 sign_normalized(Vec3 v) {
  int idx = 0;
  double mag = std::abs(v.x);
  if (std::abs(v.y) > mag) {
    idx = 1;
    mag = std::abs(v.y);
  }
  if (std::abs(v.z) > mag) idx = 2;
  if (v[idx] < 0.0) v = v * -1.0;
  return v;
}

}  // namespace detail

/// Least-squares 3D line: anchor = mean, direction = dominant eigenvector of
/// the centered scatter matrix, sign-normalized so the largest-magnitude
/// component is positive.
inline Line3 fit_line3_positions(std::span<const Vec3> pos) {
  if (pos.size() < 2) throw std::invalid_argument("degenerate point set");
  Vec3 mean;
  for (const Vec3& p : pos) mean += p;
  mean = mean / static_cast<double>(pos.size());

  std::array<std::array<double, 3>, 3> scatter{};
  double spread = 0.0;
  for (const Vec3& p : pos) {
    const Vec3 d = p - mean;
    spread = std::max({spread, std::abs(d.x), std::abs(d.y), std::abs(d.z)});
    const double dv[3] = {d.x, d.y, d.z};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) scatter[i][j] += dv[i] * dv[j];
  }
  if (spread == 0.0) throw std::invalid_argument("degenerate point set");

  Line3 line;
  line.anchor = mean;
  line.dir = detail::sign_normalized(normalized(detail::dominant_eigenvector(scatter)));
  return line;
}

inline Line3 fit_line3(std::span<const Point3> points) {
  std::vector<Vec3> pos;
  pos.reserve(points.size());
  for (const Point3& p : points) pos.push_back(p.pos());
  return fit_line3_positions(pos);
}

/// Closest points between two lines via the 2x2 normal-equation solve
///
///   [t1*]          1            [-|V2|^2   V1.V2 ] [(S2-S1).V1]
///   [t2*] = ----------------- * [-V1.V2    |V1|^2] [(S2-S1).V2]
///           (V1.V2)^2-|V1|^2|V2|^2
///
/// The lines are treated as parallel when the denominator magnitude is at
/// most eps_i; the perpendicular separation is still reported as distance.
inline ClosestPoints closest_points(const Line3& a, const Line3& b, double eps_i = 1e-9) {
  const Vec3 d = b.anchor - a.anchor;
  const double v11 = dot(a.dir, a.dir);
  const double v22 = dot(b.dir, b.dir);
  const double v12 = dot(a.dir, b.dir);
  const double den = v12 * v12 - v11 * v22;

  ClosestPoints out;
  if (std::abs(den) <= eps_i) {
    out.parallel = true;
    const Vec3 rej = d - a.dir * (dot(d, a.dir) / v11);
    out.distance = norm(rej);
    return out;
  }
  const double dv1 = dot(d, a.dir);
  const double dv2 = dot(d, b.dir);
  out.t1 = (-v22 * dv1 + v12 * dv2) / den;
  out.t2 = (-v12 * dv1 + v11 * dv2) / den;
  out.p1 = a.at(out.t1);
  out.p2 = b.at(out.t2);
  out.distance = norm(out.p1 - out.p2);
  return out;
}

/// Acute angle between line directions, in degrees within [0, 90].
inline double acute_angle_deg(const Line3& a, const Line3& b) {
  const double c = std::abs(dot(a.dir, b.dir)) / (norm(a.dir) * norm(b.dir));
  return std::acos(std::clamp(c, 0.0, 1.0)) * 180.0 / std::numbers::pi;
}

}  // namespace bifurc
