// End-to-end runner: erode -> detect -> project -> track -> finalize ->
// interpolate -> merge -> bifurcate -> needle, with per-stage wall times.
#pragma once

#include <algorithm>
#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "bifurc/mask.hpp"
#include "bifurc/projection.hpp"
#include "bifurc/simulate.hpp"
#include "bifurc/skeleton.hpp"
#include "bifurc/tracking.hpp"

namespace bifurc {

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct PipelineResult {
  std::vector<MergedTrack> merged_tracks;
  std::vector<Bifurcation> bifurcations;                // sorted by time
  std::vector<std::optional<NeedleSite>> needle_sites;  // aligned with bifurcations
  int primary_bifurcation = -1;                         // earliest-time entry, -1 if none
  std::vector<StageTiming> timings;
  double identification_time_s = 0.0;  // post-ingest compute, excludes dataset loading
  std::vector<std::string> warnings;
};

namespace detail {

class StageClock {
 public:
  explicit StageClock(PipelineResult& result) : result_(result) {}

  template <typename F>
  auto stage(const std::string& name, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(body())>) {
        body();
        record(name, start);
      } else {
        auto value = body();
        record(name, start);
        return value;
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("stage " + name + ": " + e.what());
    }
  }

 private:
  void record(const std::string& name, std::chrono::steady_clock::time_point start) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result_.timings.push_back({name, secs});
    result_.identification_time_s += secs;
  }

  PipelineResult& result_;
};

}  // namespace detail

inline PipelineResult run(const ScanDataset& ds, const HyperParams& hp, const Calibration& cal) {
  if (ds.frames.empty()) throw std::runtime_error("no frames");

  PipelineResult result;
  detail::StageClock clock(result);

  auto segments = clock.stage("mask", [&] {
    std::vector<std::vector<Segment>> per_frame;
    per_frame.reserve(ds.frames.size());
    int stalled = 0;
    for (const Frame& f : ds.frames) {
      ErosionResult er = erode_until_stable(f.mask, hp.delta_s, hp.max_erosion_iters);
      if (!er.converged) ++stalled;
      per_frame.push_back(std::move(er.segments));
    }
    if (stalled > 0)
      result.warnings.push_back("erosion hit the iteration cap on " + std::to_string(stalled) +
                                " frame(s)");
    return per_frame;
  });

  auto detections = clock.stage("detect", [&] {
    std::vector<std::vector<Detection>> per_frame;
    per_frame.reserve(segments.size());
    for (std::size_t i = 0; i < segments.size(); ++i)
      per_frame.push_back(detect(segments[i], hp.delta_n, ds.frames[i].index, ds.frames[i].t));
    return per_frame;
  });

  auto points = clock.stage("project", [&] {
    std::vector<std::vector<Point3>> per_frame;
    per_frame.reserve(detections.size());
    for (const auto& frame_dets : detections) {
      std::vector<Point3> pts;
      pts.reserve(frame_dets.size());
      for (const Detection& d : frame_dets) pts.push_back(project(d, cal, ds.poses));
      per_frame.push_back(std::move(pts));
    }
    return per_frame;
  });

  auto raw_tracks = clock.stage("track", [&] {
    Tracker tracker;
    for (std::size_t i = 0; i < points.size(); ++i)
      tracker.step(ds.frames[i].t, points[i], hp);
    return tracker.take();
  });

  auto kept = clock.stage("finalize", [&] { return finalize(raw_tracks, hp); });

  auto interpolated = clock.stage("interpolate", [&] {
    std::vector<double> frame_times;
    frame_times.reserve(ds.frames.size());
    for (const Frame& f : ds.frames) frame_times.push_back(f.t);
    std::vector<Track> out;
    out.reserve(kept.size());
    for (const Track& tr : kept) out.push_back(interpolate_track(tr, frame_times));
    return out;
  });

  result.merged_tracks = clock.stage("merge", [&] { return merge_all(interpolated, hp); });

  std::vector<int> bif_track;  // merged-track index per bifurcation
  clock.stage("bifurcate", [&] {
    std::vector<std::pair<Bifurcation, int>> all;
    for (std::size_t m = 0; m < result.merged_tracks.size(); ++m)
      for (const Bifurcation& b : find_bifurcations(result.merged_tracks[m], hp))
        all.emplace_back(b, static_cast<int>(m));
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first.t < b.first.t; });
    for (auto& [b, m] : all) {
      result.bifurcations.push_back(b);
      bif_track.push_back(m);
    }
    if (!result.bifurcations.empty()) result.primary_bifurcation = 0;
  });

  clock.stage("needle", [&] {
    for (std::size_t i = 0; i < result.bifurcations.size(); ++i) {
      try {
        result.needle_sites.push_back(
            needle_site(result.merged_tracks[bif_track[i]], result.bifurcations[i], hp));
      } catch (const std::exception& e) {
        result.needle_sites.push_back(std::nullopt);
        result.warnings.push_back("needle site " + std::to_string(i) + ": " + e.what());
      }
    }
  });

  return result;
}

}  // namespace bifurc
