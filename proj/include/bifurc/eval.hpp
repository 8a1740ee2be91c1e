// Scoring a pipeline result against simulator ground truth: injective
// nearest-match gating for bifurcations, the 2-5 cm needle range check, and
// an optional mask IoU pass-through.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "bifurc/pipeline.hpp"
#include "bifurc/simulate.hpp"

namespace bifurc {

struct EvalReport {
  std::vector<std::optional<double>> bifurcation_error_mm;  // per truth junction
  int false_positives = 0;
  int false_negatives = 0;
  std::vector<std::optional<bool>> needle_in_range;  // per predicted bifurcation
  double identification_time_s = 0.0;
  std::optional<double> iou;
};

/// Each truth junction is matched to the nearest unclaimed prediction within
/// gate_mm (closest pairs first, so the matching is injective). Unmatched
/// truth counts as a false negative, unmatched predictions as false
/// positives. A needle site is in range when it lies 20-50 mm from the truth
/// junction its bifurcation matched.
inline EvalReport evaluate(const PipelineResult& result, const GroundTruth& truth,
                           double gate_mm = 30.0) {
  EvalReport report;
  report.identification_time_s = result.identification_time_s;

  const std::size_t nt = truth.bifurcations.size();
  const std::size_t np = result.bifurcations.size();
  report.bifurcation_error_mm.assign(nt, std::nullopt);
  report.needle_in_range.assign(np, std::nullopt);

  struct Cand {
    double dist;
    std::size_t ti, pi;
  };
  std::vector<Cand> cands;
  for (std::size_t ti = 0; ti < nt; ++ti)
    for (std::size_t pi = 0; pi < np; ++pi) {
      const double d = norm(result.bifurcations[pi].position - truth.bifurcations[ti].position);
      if (d <= gate_mm) cands.push_back({d, ti, pi});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    return a.ti != b.ti ? a.ti < b.ti : a.pi < b.pi;
  });

  std::vector<char> truth_used(nt, 0), pred_used(np, 0);
  for (const Cand& c : cands) {
    if (truth_used[c.ti] || pred_used[c.pi]) continue;
    truth_used[c.ti] = 1;
    pred_used[c.pi] = 1;
    report.bifurcation_error_mm[c.ti] = c.dist;
    if (c.pi < result.needle_sites.size() && result.needle_sites[c.pi].has_value()) {
      const double nd =
          norm(result.needle_sites[c.pi]->position - truth.bifurcations[c.ti].position);
      report.needle_in_range[c.pi] = nd >= 20.0 && nd <= 50.0;
    }
  }
  for (std::size_t ti = 0; ti < nt; ++ti)
    if (!truth_used[ti]) ++report.false_negatives;
  for (std::size_t pi = 0; pi < np; ++pi)
    if (!pred_used[pi]) ++report.false_positives;
  return report;
}

/// Mean per-frame intersection-over-union between two mask sequences.
/// Frames where both masks are empty count as perfect agreement.
inline double mean_iou(const std::vector<Mask>& a, const std::vector<Mask>& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("mask sequences must be non-empty and aligned");
  double total = 0.0;
  for (std::size_t f = 0; f < a.size(); ++f) {
    if (a[f].bits.size() != b[f].bits.size())
      throw std::invalid_argument("mask geometry mismatch");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a[f].bits.size(); ++i) {
      inter += a[f].bits[i] & b[f].bits[i];
      uni += a[f].bits[i] | b[f].bits[i];
    }
    total += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  }
  return total / static_cast<double>(a.size());
}

}  // namespace bifurc
