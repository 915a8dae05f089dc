// Shared helpers for the test binaries: seeded generators and oracles that
// re-derive library results without calling the code under test.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "facadealign/align_loss.hpp"
#include "facadealign/geometry.hpp"

namespace fa_test {

using facadealign::BBox;
using facadealign::AlignConfig;
using facadealign::BoxGradient;
using facadealign::DetectionSet;

inline BBox box(double x1, double y1, double x2, double y2, std::int32_t cls = 0,
                double conf = 1.0) {
  return BBox{cls, x1, y1, x2, y2, conf};
}

inline DetectionSet make_set(std::vector<BBox> boxes, double w = 1000.0, double h = 1000.0,
                             const char* id = "img") {
  return DetectionSet{id, w, h, std::move(boxes)};
}

// Random boxes on a canvas; `classes` distinct labels.
inline DetectionSet random_set(std::mt19937_64& rng, std::size_t n, int classes,
                               double canvas = 200.0) {
  std::uniform_real_distribution<double> pos(0.0, canvas - 40.0);
  std::uniform_real_distribution<double> ext(2.0, 40.0);
  std::uniform_int_distribution<int> cls(0, classes - 1);
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  DetectionSet s{"rand", canvas, canvas, {}};
  for (std::size_t i = 0; i < n; ++i) {
    const double x = pos(rng);
    const double y = pos(rng);
    s.boxes.push_back(box(x, y, x + ext(rng), y + ext(rng), cls(rng), conf(rng)));
  }
  return s;
}

// Jittered lattice: many candidate pairs, useful for loss/gradient checks.
inline DetectionSet jittered_lattice(std::mt19937_64& rng, int rows, int cols, double jitter,
                                     int classes = 1) {
  std::uniform_real_distribution<double> j(-jitter, jitter);
  std::uniform_int_distribution<int> cls(0, classes - 1);
  DetectionSet s{"lattice", 40.0 * cols + 40.0, 50.0 * rows + 40.0, {}};
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double x = 20.0 + 40.0 * c;
      const double y = 20.0 + 50.0 * r;
      s.boxes.push_back(box(x + j(rng), y + j(rng), x + 20.0 + j(rng), y + 30.0 + j(rng), cls(rng)));
    }
  }
  return s;
}

// ---- loss oracle --------------------------------------------------------

inline double oracle_iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return inter / uni;
}

struct OracleLoss {
  long double sum_x = 0.0L;
  long double sum_y = 0.0L;
  std::size_t n_x = 0;
  std::size_t n_y = 0;
  double total() const {
    return static_cast<double>(sum_x / static_cast<long double>(std::max<std::size_t>(n_x, 1)) +
                               sum_y / static_cast<long double>(std::max<std::size_t>(n_y, 1)));
  }
};

// Re-enumerates every unordered pair and checks each condition on its own.
inline OracleLoss brute_force_loss(const DetectionSet& s, double T, double eps = 1e-9) {
  OracleLoss out;
  const auto& b = s.boxes;
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (std::size_t j = i + 1; j < b.size(); ++j) {
      const bool same_class = b[i].class_id == b[j].class_id;
      const bool apart = oracle_iou(b[i], b[j]) <= eps;
      const double dx1 = std::fabs(b[i].x1 - b[j].x1);
      const double dx2 = std::fabs(b[i].x2 - b[j].x2);
      const double dy1 = std::fabs(b[i].y1 - b[j].y1);
      const double dy2 = std::fabs(b[i].y2 - b[j].y2);
      if (same_class && apart && dx1 < T && dx2 < T) {
        out.sum_x += static_cast<long double>(dx1) + dx2;
        ++out.n_x;
      }
      if (same_class && apart && dy1 < T && dy2 < T) {
        out.sum_y += static_cast<long double>(dy1) + dy2;
        ++out.n_y;
      }
    }
  }
  return out;
}

// Smallest distance of any pair quantity to a place where the loss is not
// differentiable: an edge difference near 0 or T, or a touching/near-overlap.
inline double kink_margin(const DetectionSet& s, double T) {
  double m = INFINITY;
  const auto& b = s.boxes;
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (std::size_t j = i + 1; j < b.size(); ++j) {
      if (b[i].class_id != b[j].class_id) continue;
      const double gap_x = std::max(b[i].x1, b[j].x1) - std::min(b[i].x2, b[j].x2);
      const double gap_y = std::max(b[i].y1, b[j].y1) - std::min(b[i].y2, b[j].y2);
      // Disjoint boxes must close the larger gap to overlap; overlapping ones
      // must open the smaller one to separate.
      const bool apart = gap_x >= 0.0 || gap_y >= 0.0;
      m = std::min(m, apart ? std::max(gap_x, gap_y) : std::min(-gap_x, -gap_y));
      // Edge kinks only matter on axes where the pair can be a candidate.
      for (auto [d1, d2] : {std::pair{b[i].x1 - b[j].x1, b[i].x2 - b[j].x2},
                            std::pair{b[i].y1 - b[j].y1, b[i].y2 - b[j].y2}}) {
        if (std::fabs(d1) >= T + 1.0 || std::fabs(d2) >= T + 1.0) continue;
        for (double d : {d1, d2}) m = std::min({m, std::fabs(d), std::fabs(std::fabs(d) - T)});
      }
    }
  }
  return m;
}

// Central differences of the loss total, one coordinate at a time.
inline std::vector<BoxGradient> finite_difference(const DetectionSet& s, const AlignConfig& c,
                                                  double h) {
  std::vector<BoxGradient> g(s.boxes.size());
  for (std::size_t i = 0; i < s.boxes.size(); ++i) {
    for (int k = 0; k < 4; ++k) {
      auto coord = [&](DetectionSet& t) -> double& {
        BBox& b = t.boxes[i];
        return k == 0 ? b.x1 : k == 1 ? b.y1 : k == 2 ? b.x2 : b.y2;
      };
      DetectionSet plus = s, minus = s;
      coord(plus) += h;
      coord(minus) -= h;
      const double up = facadealign::alignment_loss(plus, c).total;
      const double down = facadealign::alignment_loss(minus, c).total;
      g[i][k] = (up - down) / (2 * h);
    }
  }
  return g;
}

// ---- mAP oracle -----------------------------------------------------------

struct OracleImage {
  std::vector<BBox> preds;
  std::vector<BBox> gts;
};

// Greedy matching of one image restricted to predictions with conf >= cutoff.
inline std::pair<std::size_t, std::size_t> oracle_counts(const OracleImage& im, int cls,
                                                         double cutoff, double iou_thr) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < im.preds.size(); ++i) {
    if (im.preds[i].confidence >= cutoff) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return im.preds[a].confidence > im.preds[b].confidence;
  });
  std::vector<bool> taken(im.gts.size(), false);
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t pi : order) {
    const BBox& p = im.preds[pi];
    long best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < im.gts.size(); ++g) {
      if (taken[g] || im.gts[g].class_id != p.class_id) continue;
      const double v = oracle_iou(p, im.gts[g]);
      if (v > best_iou) {
        best_iou = v;
        best = static_cast<long>(g);
      }
    }
    const bool hit = best >= 0 && best_iou >= iou_thr;
    if (hit) taken[static_cast<std::size_t>(best)] = true;
    if (p.class_id != cls) continue;
    (hit ? tp : fp) += 1;
  }
  return {tp, fp};
}

// AP by trying every distinct confidence cutoff, then integrating the
// upper envelope of precision over recall.
inline double oracle_ap(const std::vector<OracleImage>& images, int cls, double iou_thr = 0.5) {
  std::size_t n_gt = 0;
  std::set<double, std::greater<>> cutoffs;
  for (const auto& im : images) {
    for (const auto& g : im.gts) n_gt += g.class_id == cls;
    for (const auto& p : im.preds) {
      if (p.class_id == cls) cutoffs.insert(p.confidence);
    }
  }
  std::vector<std::pair<double, double>> pr;  // (recall, precision)
  for (double c : cutoffs) {
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (const auto& im : images) {
      const auto [t, f] = oracle_counts(im, cls, c, iou_thr);
      tp += t;
      fp += f;
    }
    if (tp + fp == 0) continue;
    pr.emplace_back(static_cast<double>(tp) / n_gt, static_cast<double>(tp) / (tp + fp));
  }
  std::sort(pr.begin(), pr.end());
  double area = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < pr.size(); ++i) {
    double env = 0.0;
    for (std::size_t j = i; j < pr.size(); ++j) env = std::max(env, pr[j].second);
    area += (pr[i].first - prev_recall) * env;
    prev_recall = pr[i].first;
  }
  return area;
}

struct ToyCase {
  std::vector<DetectionSet> preds;
  std::vector<DetectionSet> gts;
  std::vector<OracleImage> oracle;
};

// Up to 3 images, 5 boxes, 2 classes; predictions are perturbed copies of
// ground truth or strays, confidences from a coarse set to create ties.
inline ToyCase toy_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_img(1, 3), n_box(0, 5), cls(0, 1), coin(0, 3);
  std::uniform_real_distribution<double> pos(0, 60), ext(5, 25), shift(-6, 6);
  const double confs[] = {0.2, 0.4, 0.4, 0.6, 0.8, 0.9};
  std::uniform_int_distribution<int> conf_pick(0, 5);
  ToyCase t;
  const int images = n_img(rng);
  for (int im = 0; im < images; ++im) {
    DetectionSet g{"im" + std::to_string(im), 100, 100, {}};
    DetectionSet p{g.image_id, 100, 100, {}};
    const int ng = n_box(rng);
    for (int k = 0; k < ng; ++k) {
      const double x = pos(rng), y = pos(rng);
      g.boxes.push_back(box(x, y, x + ext(rng), y + ext(rng), cls(rng)));
    }
    const int np = n_box(rng);
    for (int k = 0; k < np; ++k) {
      BBox b;
      if (!g.boxes.empty() && coin(rng) != 0) {
        b = g.boxes[static_cast<std::size_t>(k) % g.boxes.size()];
        b.x1 += shift(rng);
        b.x2 += shift(rng);
        if (b.x2 - b.x1 < 1) b.x2 = b.x1 + 1;
        if (coin(rng) == 0) b.class_id = 1 - b.class_id;
      } else {
        const double x = pos(rng), y = pos(rng);
        b = box(x, y, x + ext(rng), y + ext(rng), cls(rng));
      }
      b.confidence = confs[conf_pick(rng)];
      p.boxes.push_back(b);
    }
    t.oracle.push_back({p.boxes, g.boxes});
    t.gts.push_back(std::move(g));
    t.preds.push_back(std::move(p));
  }
  return t;
}

}  // namespace fa_test
