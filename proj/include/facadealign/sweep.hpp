#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "facadealign/detect_eval.hpp"
#include "facadealign/geometry.hpp"
#include "facadealign/refine.hpp"
#include "facadealign/regularity.hpp"

namespace facadealign {

struct SweepConfig {
  std::vector<double> weights;     // W values; 0 is added when missing
  std::vector<double> thresholds;  // T values, pixels
  RefineConfig refine;             // template; align.threshold/weight set per cell
  std::vector<DetectionSet> detections;
  std::vector<DetectionSet> ground_truth;
  std::int32_t class_id = 0;  // class scored by the regularity metric
  std::size_t mask_w = kDefaultMaskSide;
  std::size_t mask_h = kDefaultMaskSide;
  std::size_t k_max = kDefaultMaxRank;
  double confidence = kDefaultConfidence;
  double nms_iou = kDefaultNmsIou;
  double match_iou = kDefaultMatchIou;
  std::filesystem::path output_dir;  // empty: no report files
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct SweepRow {
  double weight = 0.0;
  double threshold = 0.0;
  double relative_regularity = 0.0;  // percent of the W = 0 baseline
  double map50 = 0.0;
  double align_before = 0.0;  // mean alignment total per image, at this T
  double align_after = 0.0;
  double seconds = 0.0;
  std::size_t images = 0;     // images that made it through the cell
  std::string status = "ok";  // otherwise lists quarantined images / errors
};

/// Filters and suppresses the detections once, then for every (W, T)
/// refines each image, scores its class mask and evaluates mAP against the
/// ground truth. Rows come out W-major in the configured order. A failure
/// in one image quarantines that image for the cell and is noted in the
/// row status. Throws kConfigInvalid or kInputMissing for unusable input.
std::vector<SweepRow> run_sweep(const SweepConfig& cfg);

/// Deterministic CSV (no timings):
/// `W,T,relative_regularity,mAP50,align_before,align_after,images,status`.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// `W,T,seconds`.
void write_sweep_timing_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Writes sweep.csv, sweep_timing.csv, sweep_tradeoff.svg (regularity vs
/// mAP, one point per row) and sweep_regularity.svg (regularity vs W, one
/// line per T) into `dir`, creating it if needed.
void write_sweep_reports(const std::filesystem::path& dir, const std::vector<SweepRow>& rows);

}  // namespace facadealign
