// Per-frame binary mask processing: majority-kernel erosion, 8-connected
// component labeling, and radius-filtered vessel detection.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bifurc/geometry.hpp"

namespace bifurc {

struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // row-major, values 0/1

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
  void set(int x, int y, std::uint8_t v) { bits[static_cast<std::size_t>(y) * width + x] = v; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  std::size_t popcount() const {
    std::size_t n = 0;
    for (std::uint8_t b : bits) n += b;
    return n;
  }
  bool operator==(const Mask& o) const = default;
};

/// One 8-connected blob of on-pixels together with its minimum enclosing
/// circle over pixel centers.
struct Segment {
  std::vector<Point2> pixels;
  Circle2 mec;
};

struct Detection {
  Point2 center;
  double radius = 0.0;
  int frame_index = 0;
  double t = 0.0;
};

namespace detail {

inline Circle2 segment_mec(const std::vector<Point2>& pixels) {
  // Hull first on large blobs; the hull carries the same MEC exactly.
  if (pixels.size() > 512) {
    const std::vector<Point2> hull = convex_hull(pixels);
    return min_enclosing_circle(hull);
  }
  return min_enclosing_circle(pixels);
}

}  // namespace detail

/// Partition of on-pixels into 8-connected components, ordered by the
/// row-major position of each component's first pixel.
inline std::vector<Segment> connected_components(const Mask& m) {
  std::vector<Segment> out;
  if (m.width == 0 || m.height == 0) return out;
  std::vector<std::uint8_t> seen(m.bits.size(), 0);
  std::vector<int> stack;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * m.width + x;
      if (!m.bits[idx] || seen[idx]) continue;
      Segment seg;
      seen[idx] = 1;
      stack.push_back(static_cast<int>(idx));
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        const int cx = cur % m.width;
        const int cy = cur / m.width;
        seg.pixels.push_back({static_cast<double>(cx), static_cast<double>(cy)});
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int nx = cx + dx, ny = cy + dy;
            if (!m.in_bounds(nx, ny)) continue;
            const std::size_t nidx = static_cast<std::size_t>(ny) * m.width + nx;
            if (m.bits[nidx] && !seen[nidx]) {
              seen[nidx] = 1;
              stack.push_back(static_cast<int>(nidx));
            }
          }
        }
      }
      seg.mec = detail::segment_mec(seg.pixels);
      out.push_back(std::move(seg));
    }
  }
  return out;
}

/// One erosion pass: 3x3 all-ones convolution, zero-padded, rescaled to
/// [0,1] and thresholded at 0.5 — i.e. a pixel survives iff its 3x3
/// neighborhood holds at least 5 on-pixels. Note this is a majority filter:
/// it can also fill an off-pixel with 5+ on-neighbors.
inline Mask erode_step(const Mask& m) {
  Mask out(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      int sum = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (m.in_bounds(x + dx, y + dy)) sum += m.at(x + dx, y + dy);
      if (sum >= 5) out.set(x, y, 1);
    }
  }
  return out;
}

namespace detail {

// Strict boundary peel: a pixel survives only with a full 3x3 on-neighborhood.
// Used solely to break majority-filter fixpoints inside erode_until_stable.
inline Mask strict_erode_step(const Mask& m) {
  Mask out(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(x, y)) continue;
      int sum = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (m.in_bounds(x + dx, y + dy)) sum += m.at(x + dx, y + dy);
      if (sum == 9) out.set(x, y, 1);
    }
  }
  return out;
}

}  // namespace detail

struct ErosionResult {
  std::vector<Segment> segments;
  bool converged = true;  // false when max_iters ran out with radii >= delta_s
  int iterations = 0;
};

/// Erodes until every component's MEC radius drops below delta_s (or the
/// mask empties). The majority kernel reaches a fixpoint on smooth blobs well
/// above delta_s; when that happens a strict boundary peel is substituted for
/// that pass so the radius keeps shrinking. Components eroded away are
/// dropped; running out of iterations flags the result instead of failing.
inline ErosionResult erode_until_stable(const Mask& m, double delta_s, int max_iters = 64) {
  if (delta_s <= 0.0) throw std::invalid_argument("delta_s must be positive");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");

  ErosionResult res;
  Mask cur = m;
  for (;;) {
    res.segments = connected_components(cur);
    bool all_below = true;
    for (const Segment& s : res.segments)
      if (s.mec.radius >= delta_s) all_below = false;
    if (res.segments.empty() || all_below) return res;
    if (res.iterations >= max_iters) {
      res.converged = false;
      return res;
    }
    Mask next = erode_step(cur);
    if (next == cur) next = detail::strict_erode_step(cur);
    if (next == cur) {  // all-on interior cannot occur with zero padding
      res.converged = false;
      return res;
    }
    cur = std::move(next);
    ++res.iterations;
  }
}

/// Keeps one detection per segment whose MEC radius is at least delta_n;
/// smaller segments are treated as noise, per the strict less-than removal.
inline std::vector<Detection> detect(const std::vector<Segment>& segments, double delta_n,
                                     int frame_index, double t) {
  if (delta_n <= 0.0) throw std::invalid_argument("delta_n must be positive");
  std::vector<Detection> out;
  for (const Segment& s : segments) {
    if (s.mec.radius < delta_n) continue;
    out.push_back({s.mec.center, s.mec.radius, frame_index, t});
  }
  return out;
}

/// Reads an 8-bit binary PGM (P5); any value >= 128 maps to an on-pixel.
inline Mask read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open PGM file: " + path.string());

  auto next_token = [&in, &path]() {
    std::string tok;
    for (;;) {
      int c = in.get();
      if (c == EOF) throw std::runtime_error("truncated PGM header: " + path.string());
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(c)) {
        if (!tok.empty()) return tok;
        continue;
      }
      tok.push_back(static_cast<char>(c));
    }
  };

  if (next_token() != "P5") throw std::runtime_error("not a binary PGM (P5): " + path.string());
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    throw std::runtime_error("unsupported PGM geometry: " + path.string());

  std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    throw std::runtime_error("truncated PGM payload: " + path.string());

  Mask m(w, h);
  for (std::size_t i = 0; i < raw.size(); ++i) m.bits[i] = raw[i] >= 128 ? 1 : 0;
  return m;
}

inline void write_pgm(const Mask& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write PGM file: " + path.string());
  out << "P5\n" << m.width << " " << m.height << "\n255\n";
  std::vector<std::uint8_t> raw(m.bits.size());
  for (std::size_t i = 0; i < m.bits.size(); ++i) raw[i] = m.bits[i] ? 255 : 0;
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw std::runtime_error("failed writing PGM payload: " + path.string());
}

}  // namespace bifurc
