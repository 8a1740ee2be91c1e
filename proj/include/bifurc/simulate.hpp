// Synthetic scan generator: sweeps a virtual linear probe along a vessel
// tree, renders per-frame cross-sections as filled ellipses, corrupts masks
// and poses with a configurable noise model, and emits ground truth.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "bifurc/geometry.hpp"
#include "bifurc/mask.hpp"
#include "bifurc/projection.hpp"

namespace bifurc {

/// One vessel branch: a 3D polyline centerline with a radius per vertex.
struct Branch {
  std::vector<Vec3> centerline;  // mm, world frame
  std::vector<double> radii;     // mm, same length as centerline
};

struct NoiseModel {
  double flip_prob = 0.0;         // per-pixel Bernoulli flip probability
  double speckle_rate = 0.0;      // expected speckle blobs per frame (Poisson)
  double speckle_radius_px_min = 1.0;
  double speckle_radius_px_max = 6.0;
  double pose_jitter_sigma = 0.0;  // mm, per-axis Gaussian on logged poses
};

struct PhantomSpec {
  std::vector<Branch> branches;
  std::vector<Vec3> bifurcations;  // ground-truth junction positions
  NoiseModel noise;
};

struct ScanParams {
  double velocity_mm_s = 50.0;   // probe sweep speed
  double frame_rate_hz = 30.0;
  int image_px = 256;            // square image
  double depth_mm = 50.0;        // imaging depth; fixes the pixel spacing
};

struct Frame {
  Mask mask;
  int index = 0;
  double t = 0.0;
};

struct GroundTruthBifurcation {
  Vec3 position;
  double t = 0.0;  // when the scan plane crosses the junction
};

struct GroundTruth {
  std::vector<GroundTruthBifurcation> bifurcations;
};

struct ScanDataset {
  std::vector<Frame> frames;
  std::vector<Pose> poses;
  Calibration calibration;
  std::vector<Mask> truth_masks;        // noiseless copies, for IoU pass-through
  std::optional<GroundTruth> truth;
};

namespace detail {

struct PlaneCut {
  double cx, cy;   // world mm, in-plane center
  double a, b;     // semi-axes: a along e1 (projected branch direction), b = radius
  double e1x, e1y; // unit in-plane direction of the branch projection
};

// Intersection of one branch segment with the plane z = plane_z, as the
// ellipse a tilted cylinder cuts. Perpendicular branches give circles.
inline std::optional<PlaneCut> cut_segment(const Vec3& p0, const Vec3& p1, double r0, double r1,
                                           double plane_z) {
  const double dz = p1.z - p0.z;
  if (dz == 0.0) return std::nullopt;  // in-plane segment, no transversal cut
  const double s = (plane_z - p0.z) / dz;
  if (s < 0.0 || s > 1.0) return std::nullopt;

  const Vec3 c = p0 + (p1 - p0) * s;
  const double r = r0 + (r1 - r0) * s;
  const Vec3 dir = normalized(p1 - p0);
  const double cos_theta = std::max(std::abs(dir.z), 0.05);  // cap near-in-plane streaks

  PlaneCut cut;
  cut.cx = c.x;
  cut.cy = c.y;
  cut.a = r / cos_theta;
  cut.b = r;
  const double pn = std::hypot(dir.x, dir.y);
  if (pn < 1e-12) {
    cut.e1x = 1.0;
    cut.e1y = 0.0;
    cut.a = r;  // perpendicular branch: plain circle
  } else {
    cut.e1x = dir.x / pn;
    cut.e1y = dir.y / pn;
  }
  return cut;
}

inline void fill_ellipse(Mask& m, const Calibration& cal, const PlaneCut& cut) {
  const double sp = cal.pixel_spacing;
  const double reach = std::max(cut.a, cut.b);
  const int u0 = std::max(0, static_cast<int>(std::floor((cut.cx - reach - cal.origin_u) / sp)));
  const int u1 = std::min(m.width - 1,
                          static_cast<int>(std::ceil((cut.cx + reach - cal.origin_u) / sp)));
  const int v0 = std::max(0, static_cast<int>(std::floor((cut.cy - reach - cal.origin_v) / sp)));
  const int v1 = std::min(m.height - 1,
                          static_cast<int>(std::ceil((cut.cy + reach - cal.origin_v) / sp)));
  for (int v = v0; v <= v1; ++v) {
    const double y = v * sp + cal.origin_v;
    for (int u = u0; u <= u1; ++u) {
      const double x = u * sp + cal.origin_u;
      const double dx = x - cut.cx;
      const double dy = y - cut.cy;
      const double xi = dx * cut.e1x + dy * cut.e1y;
      const double eta = -dx * cut.e1y + dy * cut.e1x;
      if ((xi * xi) / (cut.a * cut.a) + (eta * eta) / (cut.b * cut.b) <= 1.0) m.set(u, v, 1);
    }
  }
}

inline void fill_disk_px(Mask& m, double cu, double cv, double r_px) {
  const int u0 = std::max(0, static_cast<int>(std::floor(cu - r_px)));
  const int u1 = std::min(m.width - 1, static_cast<int>(std::ceil(cu + r_px)));
  const int v0 = std::max(0, static_cast<int>(std::floor(cv - r_px)));
  const int v1 = std::min(m.height - 1, static_cast<int>(std::ceil(cv + r_px)));
  for (int v = v0; v <= v1; ++v)
    for (int u = u0; u <= u1; ++u)
      if ((u - cu) * (u - cu) + (v - cv) * (v - cv) <= r_px * r_px) m.set(u, v, 1);
}

// Bernoulli process over the pixel grid via geometric skips, so the cost
// scales with the number of flips rather than the number of pixels.
inline void flip_pixels(Mask& m, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double log1mp = std::log1p(-p);
  const std::int64_t n = static_cast<std::int64_t>(m.bits.size());
  std::int64_t i = -1;
  for (;;) {
    const double u = std::max(uni(rng), 1e-300);
    i += 1 + static_cast<std::int64_t>(std::floor(std::log(u) / log1mp));
    if (i >= n) break;
    m.bits[static_cast<std::size_t>(i)] ^= 1;
  }
}

}  // namespace detail

/// Renders the full sweep. The probe advances velocity/frame_rate along +z
/// per frame, covering the vessel tree's z extent; frame masks are the
/// union of all branch cross-sections. Deterministic for a fixed seed.
inline ScanDataset simulate(const PhantomSpec& spec, const ScanParams& sp, std::uint64_t seed) {
  if (spec.branches.empty()) throw std::invalid_argument("empty scan");
  for (const Branch& br : spec.branches) {
    if (br.centerline.size() < 2 || br.centerline.size() != br.radii.size())
      throw std::invalid_argument("branch needs matching centerline and radius samples");
    for (double r : br.radii)
      if (r <= 0.0) throw std::invalid_argument("branch radii must be positive");
  }
  if (sp.velocity_mm_s <= 0 || sp.frame_rate_hz <= 0 || sp.image_px <= 0 || sp.depth_mm <= 0)
    throw std::invalid_argument("scan parameters must be positive");

  double z_min = std::numeric_limits<double>::infinity();
  double z_max = -std::numeric_limits<double>::infinity();
  for (const Branch& br : spec.branches)
    for (const Vec3& p : br.centerline) {
      z_min = std::min(z_min, p.z);
      z_max = std::max(z_max, p.z);
    }
  if (!(z_max > z_min)) throw std::runtime_error("empty scan");

  ScanDataset ds;
  ds.calibration.pixel_spacing = sp.depth_mm / sp.image_px;
  ds.calibration.origin_u = -sp.depth_mm / 2.0;  // image centered laterally
  ds.calibration.origin_v = 0.0;                 // depth measured from the probe face

  const double step = sp.velocity_mm_s / sp.frame_rate_hz;
  const int n_frames = static_cast<int>(std::floor((z_max - z_min) / step)) + 1;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, spec.noise.pose_jitter_sigma);
  std::poisson_distribution<int> speckle_count(spec.noise.speckle_rate);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  std::size_t clean_pixels = 0;
  for (int k = 0; k < n_frames; ++k) {
    const double t = k / sp.frame_rate_hz;
    const double plane_z = z_min + sp.velocity_mm_s * t;

    Mask clean(sp.image_px, sp.image_px);
    for (const Branch& br : spec.branches) {
      for (std::size_t s = 0; s + 1 < br.centerline.size(); ++s) {
        const auto cut = detail::cut_segment(br.centerline[s], br.centerline[s + 1],
                                             br.radii[s], br.radii[s + 1], plane_z);
        if (cut) detail::fill_ellipse(clean, ds.calibration, *cut);
      }
    }
    clean_pixels += clean.popcount();

    Mask noisy = clean;
    if (spec.noise.speckle_rate > 0.0) {
      const int blobs = speckle_count(rng);
      for (int bi = 0; bi < blobs; ++bi) {
        const double cu = uni(rng) * sp.image_px;
        const double cv = uni(rng) * sp.image_px;
        const double r = spec.noise.speckle_radius_px_min +
                         uni(rng) * (spec.noise.speckle_radius_px_max -
                                     spec.noise.speckle_radius_px_min);
        detail::fill_disk_px(noisy, cu, cv, r);
      }
    }
    detail::flip_pixels(noisy, spec.noise.flip_prob, rng);

    ds.frames.push_back({std::move(noisy), k, t});
    ds.truth_masks.push_back(std::move(clean));
  }
  if (clean_pixels == 0) throw std::runtime_error("empty scan");

  // Pose log at twice the frame rate; logged translations carry the jitter,
  // the rendered geometry above does not.
  const int n_poses = 2 * (n_frames - 1) + 1;
  for (int j = 0; j < std::max(n_poses, 1); ++j) {
    const double t = j / (2.0 * sp.frame_rate_hz);
    Pose pose;
    pose.t = t;
    pose.translation = {0.0, 0.0, z_min + sp.velocity_mm_s * t};
    if (spec.noise.pose_jitter_sigma > 0.0)
      pose.translation += Vec3{jitter(rng), jitter(rng), jitter(rng)};
    ds.poses.push_back(pose);
  }

  GroundTruth truth;
  for (const Vec3& b : spec.bifurcations)
    truth.bifurcations.push_back({b, (b.z - z_min) / sp.velocity_mm_s});
  ds.truth = std::move(truth);
  return ds;
}

/// Trunk along +z splitting at a known junction into two branches that each
/// diverge by branch_angle_deg laterally. Geometry is sized for a zoomed-in
/// 16 mm field of view so the two branch cross-sections separate within a
/// couple of frames of the junction.
inline PhantomSpec make_y_phantom(double junction_z_mm = 98.4, double extent_z_mm = 198.4,
                                  double branch_angle_deg = 25.0, double depth_mm = 16.0,
                                  double trunk_radius_mm = 0.75, double branch_radius_mm = 0.52) {
  const double mid_depth = depth_mm / 2.0;
  const double rad = branch_angle_deg * std::numbers::pi / 180.0;
  const double len = (extent_z_mm - junction_z_mm) / std::cos(rad);

  PhantomSpec spec;
  Branch trunk;
  trunk.centerline = {{0.0, mid_depth, 0.0}, {0.0, mid_depth, junction_z_mm}};
  trunk.radii = {trunk_radius_mm, trunk_radius_mm};
  spec.branches.push_back(trunk);

  for (double side : {1.0, -1.0}) {
    Branch br;
    br.centerline = {{0.0, mid_depth, junction_z_mm},
                     {side * std::sin(rad) * len, mid_depth, junction_z_mm + std::cos(rad) * len}};
    br.radii = {branch_radius_mm, branch_radius_mm};
    spec.branches.push_back(br);
  }
  spec.bifurcations = {{0.0, mid_depth, junction_z_mm}};
  return spec;
}

/// Two straight vessels parallel to the sweep axis, separation_mm apart:
/// the negative control for the merge angle condition.
inline PhantomSpec make_parallel_phantom(double separation_mm = 8.0, double extent_z_mm = 198.4,
                                         double depth_mm = 16.0, double radius_mm = 0.625) {
  const double mid_depth = depth_mm / 2.0;
  PhantomSpec spec;
  for (double side : {1.0, -1.0}) {
    Branch br;
    br.centerline = {{side * separation_mm / 2.0, mid_depth, 0.0},
                     {side * separation_mm / 2.0, mid_depth, extent_z_mm}};
    br.radii = {radius_mm, radius_mm};
    spec.branches.push_back(br);
  }
  return spec;
}

}  // namespace bifurc
