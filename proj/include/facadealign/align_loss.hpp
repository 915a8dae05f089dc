#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "facadealign/geometry.hpp"

namespace facadealign {

struct AlignConfig {
  double threshold = 9.0;     // T, pixels; edge differences must be strictly below it
  double weight = 0.5;        // W
  double eps_overlap = 1e-9;  // largest IoU still counted as "not overlapping"
};

/// Throws kConfigInvalid unless T > 0, W >= 0 and 0 <= eps_overlap < 1.
void check_config(const AlignConfig& cfg);

/// First failed condition of the candidate-pair predicate, in check order.
enum class PairReject { kClass, kOverlap, kFirstEdge, kSecondEdge };

std::string_view reject_name(PairReject reason);

/// Empty optional means the pair is a candidate on `axis`.
std::optional<PairReject> candidate_reject(const BBox& a, const BBox& b, Axis axis,
                                           const AlignConfig& cfg);

inline bool is_candidate_pair(const BBox& a, const BBox& b, Axis axis, const AlignConfig& cfg) {
  return !candidate_reject(a, b, axis, cfg).has_value();
}

/// |first_a - first_b| + |second_a - second_b| along the axis. Ungated.
double pair_loss(const BBox& a, const BBox& b, Axis axis);

struct LossBreakdown {
  double sum_x = 0.0;
  double sum_y = 0.0;
  std::size_t n_x = 0;
  std::size_t n_y = 0;
  double total = 0.0;
};

struct CandidatePair {
  std::size_t i = 0;  // i < j
  std::size_t j = 0;
  Axis axis = Axis::kX;
};

/// Every candidate pair of the set, grouped by class, then by (i, j).
std::vector<CandidatePair> candidate_pairs(const DetectionSet& set, const AlignConfig& cfg);

/// Normalized alignment loss over every unordered candidate pair. A pair
/// may count toward both axes.
LossBreakdown alignment_loss(const DetectionSet& set, const AlignConfig& cfg);

/// Partial derivatives of LossBreakdown::total with respect to
/// (x1, y1, x2, y2) of one box.
using BoxGradient = std::array<double, 4>;

/// Subgradient of the normalized total. The pair-acceptance indicator is
/// held constant and sign(0) = 0, so perfect grids are stationary.
std::vector<BoxGradient> alignment_subgradient(const DetectionSet& set, const AlignConfig& cfg);

inline double weighted_loss(const LossBreakdown& breakdown, const AlignConfig& cfg) {
  return cfg.weight * breakdown.total;
}

}  // namespace facadealign
