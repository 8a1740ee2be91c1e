// Turns finalized tracks into a vessel skeleton: gap interpolation, the
// three merge heuristics over fitted lines, connected-component merging,
// bifurcation identification, and the needle insertion site.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bifurc/geometry.hpp"
#include "bifurc/tracking.hpp"

namespace bifurc {

struct Aabb {
  Vec3 min{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity()};
  Vec3 max{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity()};

  void extend(const Vec3& p) {
    min = {std::min(min.x, p.x), std::min(min.y, p.y), std::min(min.z, p.z)};
    max = {std::max(max.x, p.x), std::max(max.y, p.y), std::max(max.z, p.z)};
  }

  bool contains(const Vec3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
           p.z <= max.z;
  }
};

inline Aabb bounding_box(std::span<const Track> tracks) {
  Aabb box;
  for (const Track& tr : tracks)
    for (const TrackPoint& tp : tr.points) box.extend(tp.point.pos());
  return box;
}

/// Union of tracks joined by the merge heuristics, with a refitted line.
struct MergedTrack {
  std::vector<int> member_ids;       // sorted original track ids
  std::vector<TrackPoint> points;    // time-ordered, origin ids preserved
  Line3 line;
};

struct Bifurcation {
  Vec3 position;
  double t = 0.0;
  std::pair<int, int> origin_pair{0, 0};
  int supporting_pairs = 0;
};

struct NeedleSite {
  Vec3 position;
  double t = 0.0;
  double distance_to_bifurcation = 0.0;
};

/// Inserts linearly interpolated points at frame times strictly inside the
/// track's span that have no sample, flagged interpolated and carrying the
/// track's own id. No extrapolation beyond the first/last point.
inline Track interpolate_track(const Track& tr, std::span<const double> frame_times) {
  if (tr.points.size() < 2) return tr;
  Track out = tr;
  constexpr double kTimeEps = 1e-9;
  const double t_first = tr.points.front().point.t;
  const double t_last = tr.points.back().point.t;

  std::size_t seg = 0;  // bracketing segment [seg, seg+1] in the original points
  for (double ft : frame_times) {
    if (ft <= t_first + kTimeEps || ft >= t_last - kTimeEps) continue;
    while (seg + 2 < tr.points.size() && tr.points[seg + 1].point.t < ft - kTimeEps) ++seg;
    const Point3& a = tr.points[seg].point;
    const Point3& b = tr.points[seg + 1].point;
    if (std::abs(a.t - ft) <= kTimeEps || std::abs(b.t - ft) <= kTimeEps) continue;
    const double u = (ft - a.t) / (b.t - a.t);
    const Vec3 p = a.pos() + (b.pos() - a.pos()) * u;
    out.points.push_back({{p.x, p.y, p.z, ft}, tr.id, true});
  }
  std::sort(out.points.begin(), out.points.end(),
            [](const TrackPoint& a, const TrackPoint& b) { return a.point.t < b.point.t; });
  return out;
}

/// Outcome of the pairwise merge test, with one flag per condition so the
/// failing ones can be reported.
struct MergeDecision {
  bool mergeable = false;
  bool height_ok = false;
  bool angle_ok = false;
  bool not_parallel = false;
  bool in_bbox = false;
  bool close_enough = false;

  std::vector<std::string> reasons() const {
    std::vector<std::string> out;
    if (!height_ok) out.push_back("height");
    if (!angle_ok) out.push_back("angle");
    if (!not_parallel) out.push_back("parallel");
    if (!in_bbox) out.push_back("bbox");
    if (!close_enough) out.push_back("distance");
    return out;
  }
};

/// The three merge heuristics over fitted lines (anchors are track means):
/// near-equal depth, a minimum angle so parallel-but-distinct vessels stay
/// apart, and an intersection inside the observed bounding box with a small
/// line-to-line distance.
inline MergeDecision can_merge(const Line3& a, const Line3& b, const HyperParams& hp,
                               const Aabb& frame_bbox) {
  MergeDecision d;
  d.height_ok = std::abs(a.anchor[hp.height_axis] - b.anchor[hp.height_axis]) < hp.delta_h;
  d.angle_ok = acute_angle_deg(a, b) >= hp.delta_theta;

  const ClosestPoints cp = closest_points(a, b, hp.eps_i);
  d.not_parallel = !cp.parallel;
  if (d.not_parallel) {
    d.in_bbox = frame_bbox.contains(cp.midpoint());
    d.close_enough = cp.distance < hp.delta_sd;
  }
  d.mergeable = d.height_ok && d.angle_ok && d.not_parallel && d.in_bbox && d.close_enough;
  return d;
}

namespace detail {

// Line fit that tolerates degenerate tracks; returns false when all points
// coincide, in which case the track cannot take part in merging.
inline bool try_fit_line(const std::vector<TrackPoint>& points, Line3& out) {
  std::vector<Vec3> pos;
  pos.reserve(points.size());
  for (const TrackPoint& tp : points) pos.push_back(tp.point.pos());
  try {
    out = fit_line3_positions(pos);
    return true;
  } catch (const std::invalid_argument&) {
    Vec3 mean;
    for (const Vec3& p : pos) mean += p;
    out.anchor = pos.empty() ? Vec3{} : mean / static_cast<double>(pos.size());
    out.dir = {1.0, 0.0, 0.0};
    return false;
  }
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace detail

/// Builds the merge graph (edge = all conditions hold), merges each connected
/// component by point-set union sorted by time (origin id breaks ties), and
/// refits one line per merged track.
inline std::vector<MergedTrack> merge_all(std::span<const Track> tracks, const HyperParams& hp) {
  const int n = static_cast<int>(tracks.size());
  std::vector<Line3> lines(n);
  std::vector<char> fit_ok(n, 0);
  for (int i = 0; i < n; ++i) fit_ok[i] = detail::try_fit_line(tracks[i].points, lines[i]);

  const Aabb bbox = bounding_box(tracks);
  detail::UnionFind uf(n);
  for (int i = 0; i < n; ++i) {
    if (!fit_ok[i]) continue;
    for (int j = i + 1; j < n; ++j) {
      if (!fit_ok[j]) continue;
      if (can_merge(lines[i], lines[j], hp, bbox).mergeable) uf.unite(i, j);
    }
  }

  std::vector<std::vector<int>> groups(n);
  for (int i = 0; i < n; ++i) groups[uf.find(i)].push_back(i);

  std::vector<MergedTrack> out;
  for (const std::vector<int>& group : groups) {
    if (group.empty()) continue;
    MergedTrack mt;
    for (int idx : group) {
      mt.member_ids.push_back(tracks[idx].id);
      mt.points.insert(mt.points.end(), tracks[idx].points.begin(), tracks[idx].points.end());
    }
    std::sort(mt.member_ids.begin(), mt.member_ids.end());
    std::stable_sort(mt.points.begin(), mt.points.end(),
                     [](const TrackPoint& a, const TrackPoint& b) {
                       if (a.point.t != b.point.t) return a.point.t < b.point.t;
                       return a.origin_id < b.origin_id;
                     });
    detail::try_fit_line(mt.points, mt.line);
    out.push_back(std::move(mt));
  }
  return out;
}

/// Scans time-ordered point pairs of one merged track. A pair qualifies when
/// the points are temporally closer than delta_t, spatially closer than
/// delta_bd, and come from different origin tracks. Qualifying pairs whose
/// midpoints fall within delta_bd of an already-reported bifurcation join it;
/// each cluster reports the midpoint of its earliest pair.
inline std::vector<Bifurcation> find_bifurcations(const MergedTrack& mt, const HyperParams& hp) {
  std::vector<Bifurcation> out;
  const auto& pts = mt.points;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double dt = pts[j].point.t - pts[i].point.t;
      if (dt >= hp.delta_t) break;  // points are time-ordered
      if (pts[i].origin_id == pts[j].origin_id) continue;
      const Vec3 diff = pts[j].point.pos() - pts[i].point.pos();
      if (norm(diff) >= hp.delta_bd) continue;

      const Vec3 mid = (pts[i].point.pos() + pts[j].point.pos()) * 0.5;
      const double mid_t = (pts[i].point.t + pts[j].point.t) * 0.5;
      bool joined = false;
      for (Bifurcation& b : out) {
        if (norm(mid - b.position) < hp.delta_bd) {
          b.supporting_pairs += 1;
          joined = true;
          break;
        }
      }
      if (!joined) {
        Bifurcation b;
        b.position = mid;
        b.t = mid_t;
        b.origin_pair = {std::min(pts[i].origin_id, pts[j].origin_id),
                         std::max(pts[i].origin_id, pts[j].origin_id)};
        b.supporting_pairs = 1;
        out.push_back(b);
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Bifurcation& a, const Bifurcation& b) { return a.t < b.t; });
  return out;
}

/// The insertion site: among points scanned before the bifurcation (the
/// cranial side under proximal-to-distal sweeps), the one whose distance to
/// the bifurcation is closest to the configured 20 mm target. Earliest time
/// breaks ties.
inline NeedleSite needle_site(const MergedTrack& mt, const Bifurcation& b,
                              const HyperParams& hp) {
  const TrackPoint* best = nullptr;
  double best_score = std::numeric_limits<double>::infinity();
  for (const TrackPoint& tp : mt.points) {
    if (tp.point.t >= b.t) continue;
    const double dist = norm(tp.point.pos() - b.position);
    const double score = std::abs(dist - hp.needle_target_mm);
    if (score < best_score) {  // strict: earliest qualifying point wins ties
      best_score = score;
      best = &tp;
    }
  }
  if (best == nullptr) throw std::runtime_error("bifurcation at scan start");
  NeedleSite site;
  site.position = best->point.pos();
  site.t = best->point.t;
  site.distance_to_bifurcation = norm(best->point.pos() - b.position);
  return site;
}

}  // namespace bifurc
