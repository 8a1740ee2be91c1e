// Frame-to-frame grouping of projected vessel centers into tracks: optimal
// assignment per frame, a five-miss termination rule, and DBSCAN denoising
// at the end of the sweep.
#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "bifurc/geometry.hpp"

namespace bifurc {

/// Empirical thresholds steering detection, tracking, merging and
/// bifurcation identification. pigs()/phantom() carry the two published
/// profiles; individual fields may be overridden per run.
struct HyperParams {
  double delta_n = 8.0;     // px, minimum detection radius
  double delta_s = 23.0;    // px, erosion stopping radius
  double delta_td = 100.0;  // mm, assignment gate per frame
  double delta_h = 200.0;   // mm, max mean-depth difference for merging
  double delta_theta = 10.0;  // deg, min angle between merged lines
  double delta_sd = 10.0;   // mm, max line-to-line distance for merging
  double delta_t = 0.01;    // s, max time gap of a bifurcation pair
  double delta_bd = 40.0;   // mm, max distance of a bifurcation pair
  double eps_i = 1e-9;      // parallelism tolerance on unit directions
  double dbscan_eps = 10.0;     // mm
  int dbscan_min_pts = 3;
  double needle_target_mm = 20.0;  // cranial offset of the insertion site
  int height_axis = 1;             // world component used as depth
  int max_erosion_iters = 64;

  static HyperParams pigs() {
    HyperParams hp;
    hp.delta_n = 3.0;
    hp.delta_s = 6.0;
    hp.delta_bd = 10.0;
    return hp;
  }

  static HyperParams phantom() { return HyperParams{}; }
};

struct TrackPoint {
  Point3 point;
  int origin_id = 0;
  bool interpolated = false;
};

/// A temporally ordered chain of 3D centers hypothesized to be one vessel.
struct Track {
  int id = 0;
  std::vector<TrackPoint> points;
  int misses = 0;
  bool active = true;

  const Point3& last_point() const { return points.back().point; }

  std::vector<Vec3> positions() const {
    std::vector<Vec3> out;
    out.reserve(points.size());
    for (const TrackPoint& tp : points) out.push_back(tp.point.pos());
    return out;
  }
};

struct Assignment {
  std::vector<int> row_to_col;  // -1 where a row is left unmatched
  double cost = 0.0;            // over real (unpadded) pairs only
};

/// Minimum-cost one-to-one assignment (potentials form, O(n^3)). Rectangular
/// inputs are padded square with a sentinel column/row cost; rows are
/// processed in index order, so ties resolve to the lowest row first.
inline Assignment hungarian(const std::vector<std::vector<double>>& cost, double pad_cost = -1.0) {
  const int rows = static_cast<int>(cost.size());
  const int cols = rows == 0 ? 0 : static_cast<int>(cost[0].size());
  Assignment out;
  out.row_to_col.assign(rows, -1);
  if (rows == 0 || cols == 0) return out;

  double max_entry = 0.0;
  for (const auto& row : cost) {
    if (static_cast<int>(row.size()) != cols)
      throw std::invalid_argument("cost matrix is not rectangular");
    for (double c : row) max_entry = std::max(max_entry, c);
  }
  const double pad = pad_cost >= 0.0 ? pad_cost : max_entry + 1.0;

  const int n = std::max(rows, cols);
  auto at = [&](int i, int j) { return (i < rows && j < cols) ? cost[i][j] : pad; };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);  // match[j] = row on column j, 1-based
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }

  for (int j = 1; j <= n; ++j) {
    const int i = match[j] - 1;
    if (i < rows && j - 1 < cols) {
      out.row_to_col[i] = j - 1;
      out.cost += cost[i][j - 1];
    }
  }
  return out;
}

/// Advances all tracks by one frame. Active tracks bid for the frame's
/// detections by distance to their last point; matches farther than delta_td
/// are voided. Unmatched tracks accumulate misses and deactivate at five;
/// unclaimed detections each open a new track.
inline void track_step(std::vector<Track>& tracks, double frame_t,
                       std::span<const Point3> detections, const HyperParams& hp,
                       int& next_track_id) {
  std::vector<int> active;
  for (int i = 0; i < static_cast<int>(tracks.size()); ++i) {
    if (!tracks[i].active) continue;
    if (tracks[i].last_point().t >= frame_t) throw std::invalid_argument("non-monotonic frame");
    active.push_back(i);
  }

  std::vector<char> det_claimed(detections.size(), 0);
  if (!active.empty() && !detections.empty()) {
    std::vector<std::vector<double>> cost(active.size(),
                                          std::vector<double>(detections.size(), 0.0));
    for (std::size_t r = 0; r < active.size(); ++r)
      for (std::size_t c = 0; c < detections.size(); ++c)
        cost[r][c] = norm(detections[c].pos() - tracks[active[r]].last_point().pos());

    const Assignment asg = hungarian(cost, 10.0 * hp.delta_td);
    for (std::size_t r = 0; r < active.size(); ++r) {
      const int c = asg.row_to_col[r];
      if (c >= 0 && cost[r][c] <= hp.delta_td) {
        Track& tr = tracks[active[r]];
        tr.points.push_back({detections[c], tr.id, false});
        tr.misses = 0;
        det_claimed[c] = 1;
      }
    }
  }

  for (int idx : active) {
    Track& tr = tracks[idx];
    if (!tr.points.empty() && tr.points.back().point.t == frame_t) continue;  // matched
    tr.misses += 1;
    if (tr.misses >= 5) {
      tr.misses = 5;
      tr.active = false;
    }
  }

  for (std::size_t c = 0; c < detections.size(); ++c) {
    if (det_claimed[c]) continue;
    Track tr;
    tr.id = next_track_id++;
    tr.points.push_back({detections[c], tr.id, false});
    tracks.push_back(std::move(tr));
  }
}

/// Owns the evolving track set across a sweep.
class Tracker {
 public:
  void step(double frame_t, std::span<const Point3> detections, const HyperParams& hp) {
    track_step(tracks_, frame_t, detections, hp, next_id_);
  }

  const std::vector<Track>& tracks() const { return tracks_; }
  std::vector<Track> take() { return std::move(tracks_); }

 private:
  std::vector<Track> tracks_;
  int next_id_ = 0;
};

/// Standard DBSCAN over 3D positions. Returns one label per point, -1 for
/// noise; cluster ids follow discovery order, so output is deterministic for
/// a given input order. Neighborhoods are closed balls including the point.
inline std::vector<int> dbscan(std::span<const Vec3> points, double eps, int min_pts) {
  if (eps <= 0.0) throw std::invalid_argument("eps must be positive");
  if (min_pts < 1) throw std::invalid_argument("min_pts must be at least 1");

  const int n = static_cast<int>(points.size());
  constexpr int kUnvisited = -2;
  std::vector<int> labels(n, kUnvisited);
  const double eps2 = eps * eps;

  auto neighbors = [&](int i) {
    std::vector<int> out;
    for (int j = 0; j < n; ++j) {
      const Vec3 d = points[j] - points[i];
      if (dot(d, d) <= eps2) out.push_back(j);
    }
    return out;
  };

  int next_cluster = 0;
  for (int i = 0; i < n; ++i) {
    if (labels[i] != kUnvisited) continue;
    std::vector<int> seed = neighbors(i);
    if (static_cast<int>(seed.size()) < min_pts) {
      labels[i] = -1;
      continue;
    }
    const int cid = next_cluster++;
    labels[i] = cid;
    for (std::size_t k = 0; k < seed.size(); ++k) {
      const int q = seed[k];
      if (labels[q] == -1) labels[q] = cid;  // border point
      if (labels[q] != kUnvisited) continue;
      labels[q] = cid;
      std::vector<int> nb = neighbors(q);
      if (static_cast<int>(nb.size()) >= min_pts)
        seed.insert(seed.end(), nb.begin(), nb.end());
    }
  }
  return labels;
}

/// Post-sweep cleanup: tracks shorter than five points are discarded, each
/// survivor is DBSCAN-denoised, and tracks that fall under five points after
/// denoising are discarded as well.
inline std::vector<Track> finalize(const std::vector<Track>& tracks, const HyperParams& hp) {
  std::vector<Track> out;
  for (const Track& tr : tracks) {
    if (tr.points.size() < 5) continue;
    const std::vector<int> labels = dbscan(tr.positions(), hp.dbscan_eps, hp.dbscan_min_pts);
    Track kept = tr;
    kept.points.clear();
    for (std::size_t i = 0; i < tr.points.size(); ++i)
      if (labels[i] != -1) kept.points.push_back(tr.points[i]);
    if (kept.points.size() >= 5) out.push_back(std::move(kept));
  }
  return out;
}

}  // namespace bifurc
