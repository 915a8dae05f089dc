#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "facadealign/geometry.hpp"

namespace facadealign {

/// Usual inference confidence floor.
inline constexpr double kDefaultConfidence = 0.25;
inline constexpr double kDefaultNmsIou = 0.7;
inline constexpr double kDefaultMatchIou = 0.5;

/// Keeps boxes with confidence >= threshold, order preserved.
DetectionSet confidence_filter(const DetectionSet& set, double threshold);

/// Per-class greedy NMS: a box is suppressed when its IoU with an already
/// kept box of the same class exceeds iou_threshold. Confidence ties go to
/// the earlier box. Output is sorted by descending confidence.
DetectionSet nms(const DetectionSet& set, double iou_threshold = kDefaultNmsIou);

struct PredictionMatch {
  std::size_t index = 0;  // position in the prediction set
  std::int32_t class_id = 0;
  double confidence = 0.0;
  bool true_positive = false;
  std::optional<std::size_t> gt_index;
};

struct MatchReport {
  std::vector<PredictionMatch> predictions;  // descending confidence
  std::vector<std::optional<std::size_t>> gt_matched_by;  // prediction index per GT box
  std::vector<std::int32_t> gt_classes;
  double iou_threshold = kDefaultMatchIou;

  std::size_t true_positives() const;
  std::size_t false_positives() const;
  std::size_t false_negatives() const;
};

/// Greedy matching in descending confidence: each prediction takes the
/// unmatched same-class GT box of highest IoU (earliest on ties) when that
/// IoU reaches iou_threshold.
MatchReport match_detections(const DetectionSet& preds, const DetectionSet& gt,
                             double iou_threshold = kDefaultMatchIou);

struct PrPoint {
  double confidence;  // cutoff: predictions with confidence >= this are counted
  double recall;
  double precision;
  double interpolated;  // max precision at this or any higher recall
};

/// Precision/recall after each distinct confidence cutoff, pooled across
/// images. Predictions that share a confidence enter together.
std::vector<PrPoint> precision_recall(std::span<const MatchReport> reports, std::int32_t class_id);

/// Exact area under the interpolated PR step curve. Throws kNoGroundTruth
/// when the class has no ground-truth box in any report.
double average_precision(std::span<const MatchReport> reports, std::int32_t class_id);

struct ClassResult {
  std::int32_t class_id = 0;
  std::optional<double> ap;  // empty for classes without ground truth
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t ground_truth = 0;
};

struct EvalReport {
  std::vector<ClassResult> classes;  // ascending class id
  double map = 0.0;                  // mean AP over classes with ground truth
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::vector<std::int32_t> classes_without_gt;
};

/// mAP at one IoU threshold over images paired by image_id. A GT image
/// missing from `preds` counts as having no detections; a prediction image
/// unknown to `gts` throws kImageIdMismatch.
EvalReport map50(std::span<const DetectionSet> preds, std::span<const DetectionSet> gts,
                 double iou_threshold = kDefaultMatchIou);

/// CSV with header `class,AP,TP,FP,FN`; AP is blank for classes without GT.
void write_eval_csv(std::ostream& out, const EvalReport& report);

/// `mAP@0.5=<v> classes=<n> TP=<tp> FP=<fp> FN=<fn>`
std::string eval_summary(const EvalReport& report);

}  // namespace facadealign
