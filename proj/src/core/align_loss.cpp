#include "facadealign/align_loss.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "facadealign/error.hpp"

namespace facadealign {

namespace {

int sign(double v) { return (v > 0.0) - (v < 0.0); }

// Compensated sum of the values in ascending order. The result depends only
// on the multiset of values, so box order cannot change it.
double stable_sum(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  return sum + carry;
}

// Indices grouped by class, each group in ascending index order.
std::vector<std::vector<std::size_t>> class_buckets(const DetectionSet& set) {
  std::vector<std::pair<std::int32_t, std::size_t>> keyed;
  keyed.reserve(set.boxes.size());
  for (std::size_t i = 0; i < set.boxes.size(); ++i) keyed.emplace_back(set.boxes[i].class_id, i);
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    if (i == 0 || keyed[i].first != keyed[i - 1].first) buckets.emplace_back();
    buckets.back().push_back(keyed[i].second);
  }
  return buckets;
}

template <typename Visit>
void for_each_candidate(const DetectionSet& set, const AlignConfig& cfg, Visit&& visit) {
  for (const auto& bucket : class_buckets(set)) {
    for (std::size_t p = 0; p < bucket.size(); ++p) {
      for (std::size_t q = p + 1; q < bucket.size(); ++q) {
        const std::size_t i = bucket[p];
        const std::size_t j = bucket[q];
        const BBox& a = set.boxes[i];
        const BBox& b = set.boxes[j];
        if (iou(a, b) > cfg.eps_overlap) continue;
        for (Axis axis : {Axis::kX, Axis::kY}) {
          if (is_candidate_pair(a, b, axis, cfg)) visit(i, j, axis);
        }
      }
    }
  }
}

}  // namespace

void check_config(const AlignConfig& cfg) {
  if (!(cfg.threshold > 0.0) || !std::isfinite(cfg.threshold) || !(cfg.weight >= 0.0) ||
      !std::isfinite(cfg.weight) || !(cfg.eps_overlap >= 0.0) || !(cfg.eps_overlap < 1.0)) {
    std::ostringstream msg;
    msg << "invalid alignment config (T=" << cfg.threshold << ", W=" << cfg.weight
        << ", eps_overlap=" << cfg.eps_overlap << ")";
    throw Error(ErrorCode::kConfigInvalid, msg.str());
  }
}

std::string_view reject_name(PairReject reason) {
  switch (reason) {
    case PairReject::kClass: return "class";
    case PairReject::kOverlap: return "overlap";
    case PairReject::kFirstEdge: return "edge1";
    case PairReject::kSecondEdge: return "edge2";
  }
  return "unknown";
}

std::optional<PairReject> candidate_reject(const BBox& a, const BBox& b, Axis axis,
                                           const AlignConfig& cfg) {
  if (a.class_id != b.class_id) return PairReject::kClass;
  if (iou(a, b) > cfg.eps_overlap) return PairReject::kOverlap;
  if (!(std::abs(first_edge(a, axis) - first_edge(b, axis)) < cfg.threshold)) {
    return PairReject::kFirstEdge;
  }
  if (!(std::abs(second_edge(a, axis) - second_edge(b, axis)) < cfg.threshold)) {
    return PairReject::kSecondEdge;
  }
  return std::nullopt;
}

double pair_loss(const BBox& a, const BBox& b, Axis axis) {
  return std::abs(first_edge(a, axis) - first_edge(b, axis)) +
         std::abs(second_edge(a, axis) - second_edge(b, axis));
}

std::vector<CandidatePair> candidate_pairs(const DetectionSet& set, const AlignConfig& cfg) {
  check_config(cfg);
  std::vector<CandidatePair> pairs;
  for_each_candidate(set, cfg, [&](std::size_t i, std::size_t j, Axis axis) {
    pairs.push_back({std::min(i, j), std::max(i, j), axis});
  });
  return pairs;
}

LossBreakdown alignment_loss(const DetectionSet& set, const AlignConfig& cfg) {
  check_config(cfg);
  std::vector<double> terms_x;
  std::vector<double> terms_y;
  for_each_candidate(set, cfg, [&](std::size_t i, std::size_t j, Axis axis) {
    const double l = pair_loss(set.boxes[i], set.boxes[j], axis);
    (axis == Axis::kX ? terms_x : terms_y).push_back(l);
  });
  LossBreakdown out;
  out.n_x = terms_x.size();
  out.n_y = terms_y.size();
  out.sum_x = stable_sum(terms_x);
  out.sum_y = stable_sum(terms_y);
  out.total = out.sum_x / static_cast<double>(std::max<std::size_t>(out.n_x, 1)) +
              out.sum_y / static_cast<double>(std::max<std::size_t>(out.n_y, 1));
  return out;
}

std::vector<BoxGradient> alignment_subgradient(const DetectionSet& set, const AlignConfig& cfg) {
  check_config(cfg);
  // Integer sign tallies per coordinate, divided by the pair count at the end.
  std::vector<std::array<long, 4>> tally(set.boxes.size(), {0, 0, 0, 0});
  std::size_t n_x = 0;
  std::size_t n_y = 0;
  for_each_candidate(set, cfg, [&](std::size_t i, std::size_t j, Axis axis) {
    const BBox& a = set.boxes[i];
    const BBox& b = set.boxes[j];
    const std::size_t lo = axis == Axis::kX ? 0 : 1;
    const std::size_t hi = lo + 2;
    const int s1 = sign(first_edge(a, axis) - first_edge(b, axis));
    const int s2 = sign(second_edge(a, axis) - second_edge(b, axis));
    tally[i][lo] += s1;
    tally[j][lo] -= s1;
    tally[i][hi] += s2;
    tally[j][hi] -= s2;
    ++(axis == Axis::kX ? n_x : n_y);
  });
  const double norm_x = static_cast<double>(std::max<std::size_t>(n_x, 1));
  const double norm_y = static_cast<double>(std::max<std::size_t>(n_y, 1));
  std::vector<BoxGradient> grad(set.boxes.size());
  for (std::size_t i = 0; i < tally.size(); ++i) {
    grad[i] = {static_cast<double>(tally[i][0]) / norm_x, static_cast<double>(tally[i][1]) / norm_y,
               static_cast<double>(tally[i][2]) / norm_x, static_cast<double>(tally[i][3]) / norm_y};
  }
  return grad;
}

}  // namespace facadealign
