#include "facadealign/detect_eval.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include "facadealign/error.hpp"

namespace facadealign {

namespace {

void check_ratio(double v, bool allow_zero, const char* what) {
  const bool ok = allow_zero ? (v >= 0.0 && v <= 1.0) : (v > 0.0 && v <= 1.0);
  if (!ok) throw Error(ErrorCode::kInvalidArgument, std::string(what) + " outside its valid range");
}

std::vector<std::size_t> by_confidence(const std::vector<BBox>& boxes) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return boxes[a].confidence > boxes[b].confidence;
  });
  return order;
}

}  // namespace

DetectionSet confidence_filter(const DetectionSet& set, double threshold) {
  check_ratio(threshold, true, "confidence threshold");
  DetectionSet out{set.image_id, set.canvas_w, set.canvas_h, {}};
  std::copy_if(set.boxes.begin(), set.boxes.end(), std::back_inserter(out.boxes),
               [&](const BBox& b) { return b.confidence >= threshold; });
  return out;
}

DetectionSet nms(const DetectionSet& set, double iou_threshold) {
  check_ratio(iou_threshold, false, "NMS IoU threshold");
  DetectionSet out{set.image_id, set.canvas_w, set.canvas_h, {}};
  for (std::size_t i : by_confidence(set.boxes)) {
    const BBox& cand = set.boxes[i];
    const bool suppressed = std::any_of(out.boxes.begin(), out.boxes.end(), [&](const BBox& kept) {
      return kept.class_id == cand.class_id && iou(kept, cand) > iou_threshold;
    });
    if (!suppressed) out.boxes.push_back(cand);
  }
  return out;
}

std::size_t MatchReport::true_positives() const {
  return static_cast<std::size_t>(std::count_if(predictions.begin(), predictions.end(),
                                                [](const PredictionMatch& p) { return p.true_positive; }));
}

std::size_t MatchReport::false_positives() const { return predictions.size() - true_positives(); }

std::size_t MatchReport::false_negatives() const {
  return static_cast<std::size_t>(
      std::count(gt_matched_by.begin(), gt_matched_by.end(), std::nullopt));
}

MatchReport match_detections(const DetectionSet& preds, const DetectionSet& gt,
                             double iou_threshold) {
  check_ratio(iou_threshold, false, "match IoU threshold");
  MatchReport report;
  report.iou_threshold = iou_threshold;
  report.gt_matched_by.assign(gt.boxes.size(), std::nullopt);
  for (const BBox& g : gt.boxes) report.gt_classes.push_back(g.class_id);

  for (std::size_t pi : by_confidence(preds.boxes)) {
    const BBox& p = preds.boxes[pi];
    PredictionMatch m{pi, p.class_id, p.confidence, false, std::nullopt};
    double best = -1.0;
    for (std::size_t gi = 0; gi < gt.boxes.size(); ++gi) {
      if (report.gt_matched_by[gi] || gt.boxes[gi].class_id != p.class_id) continue;
      const double v = iou(p, gt.boxes[gi]);
      if (v > best) {
        best = v;
        m.gt_index = gi;
      }
    }
    if (m.gt_index && best >= iou_threshold) {
      m.true_positive = true;
      report.gt_matched_by[*m.gt_index] = pi;
    } else {
      m.gt_index.reset();
    }
    report.predictions.push_back(m);
  }
  return report;
}

std::vector<PrPoint> precision_recall(std::span<const MatchReport> reports, std::int32_t class_id) {
  std::size_t n_gt = 0;
  std::vector<std::pair<double, bool>> pooled;
  for (const MatchReport& r : reports) {
    n_gt += static_cast<std::size_t>(std::count(r.gt_classes.begin(), r.gt_classes.end(), class_id));
    for (const PredictionMatch& p : r.predictions) {
      if (p.class_id == class_id) pooled.emplace_back(p.confidence, p.true_positive);
    }
  }
  if (n_gt == 0) throw Error(ErrorCode::kNoGroundTruth, "class has no ground-truth boxes");
  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  std::vector<PrPoint> curve;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    tp += pooled[i].second ? 1 : 0;
    if (i + 1 < pooled.size() && pooled[i + 1].first == pooled[i].first) continue;
    const double recall = static_cast<double>(tp) / static_cast<double>(n_gt);
    const double precision = static_cast<double>(tp) / static_cast<double>(i + 1);
    curve.push_back({pooled[i].first, recall, precision, precision});
  }
  for (std::size_t i = curve.size(); i-- > 1;) {
    curve[i - 1].interpolated = std::max(curve[i - 1].interpolated, curve[i].interpolated);
  }
  return curve;
}

double average_precision(std::span<const MatchReport> reports, std::int32_t class_id) {
  double ap = 0.0;
  double prev_recall = 0.0;
  for (const PrPoint& p : precision_recall(reports, class_id)) {
    ap += (p.recall - prev_recall) * p.interpolated;
    prev_recall = p.recall;
  }
  return ap;
}

EvalReport map50(std::span<const DetectionSet> preds, std::span<const DetectionSet> gts,
                 double iou_threshold) {
  std::map<std::string, const DetectionSet*> pred_by_id;
  for (const DetectionSet& p : preds) {
    if (!pred_by_id.emplace(p.image_id, &p).second) {
      throw Error(ErrorCode::kImageIdMismatch, "duplicate prediction image '" + p.image_id + "'");
    }
  }
  std::set<std::string> gt_ids;
  for (const DetectionSet& g : gts) {
    if (!gt_ids.insert(g.image_id).second) {
      throw Error(ErrorCode::kImageIdMismatch, "duplicate ground-truth image '" + g.image_id + "'");
    }
  }
  for (const auto& [id, set] : pred_by_id) {
    if (!gt_ids.count(id)) {
      throw Error(ErrorCode::kImageIdMismatch, "prediction image '" + id + "' has no ground truth");
    }
  }

  std::vector<MatchReport> reports;
  reports.reserve(gts.size());
  std::set<std::int32_t> gt_classes;
  std::set<std::int32_t> pred_classes;
  for (const DetectionSet& g : gts) {
    const auto it = pred_by_id.find(g.image_id);
    const DetectionSet empty{g.image_id, g.canvas_w, g.canvas_h, {}};
    reports.push_back(match_detections(it == pred_by_id.end() ? empty : *it->second, g, iou_threshold));
    for (const BBox& b : g.boxes) gt_classes.insert(b.class_id);
    if (it != pred_by_id.end()) {
      for (const BBox& b : it->second->boxes) pred_classes.insert(b.class_id);
    }
  }

  std::set<std::int32_t> all_classes = gt_classes;
  all_classes.insert(pred_classes.begin(), pred_classes.end());

  EvalReport report;
  double ap_sum = 0.0;
  for (std::int32_t c : all_classes) {
    ClassResult cr;
    cr.class_id = c;
    for (const MatchReport& r : reports) {
      for (const PredictionMatch& p : r.predictions) {
        if (p.class_id != c) continue;
        (p.true_positive ? cr.tp : cr.fp) += 1;
      }
      for (std::size_t gi = 0; gi < r.gt_classes.size(); ++gi) {
        if (r.gt_classes[gi] != c) continue;
        ++cr.ground_truth;
        if (!r.gt_matched_by[gi]) ++cr.fn;
      }
    }
    if (gt_classes.count(c)) {
      cr.ap = average_precision(reports, c);
      ap_sum += *cr.ap;
    } else {
      report.classes_without_gt.push_back(c);
    }
    report.tp += cr.tp;
    report.fp += cr.fp;
    report.fn += cr.fn;
    report.classes.push_back(cr);
  }
  if (!gt_classes.empty()) report.map = ap_sum / static_cast<double>(gt_classes.size());
  return report;
}

void write_eval_csv(std::ostream& out, const EvalReport& report) {
  out << "class,AP,TP,FP,FN\n";
  char buf[128];
  for (const ClassResult& c : report.classes) {
    if (c.ap) {
      std::snprintf(buf, sizeof buf, "%d,%.10f,%zu,%zu,%zu\n", c.class_id, *c.ap, c.tp, c.fp, c.fn);
    } else {
      std::snprintf(buf, sizeof buf, "%d,,%zu,%zu,%zu\n", c.class_id, c.tp, c.fp, c.fn);
    }
    out << buf;
  }
}

std::string eval_summary(const EvalReport& report) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "mAP@0.5=%.6f classes=%zu TP=%zu FP=%zu FN=%zu", report.map,
                report.classes.size() - report.classes_without_gt.size(), report.tp, report.fp,
                report.fn);
  return buf;
}

}  // namespace facadealign
