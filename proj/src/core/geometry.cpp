#include "facadealign/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "facadealign/error.hpp"

namespace facadealign {

double area(const BBox& box) { return box.width() * box.height(); }

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (area(a) + area(b) - inter);
}

BBox validate_box(double x1, double y1, double x2, double y2, std::int32_t class_id,
                  double confidence) {
  if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) || !std::isfinite(y2) ||
      !std::isfinite(confidence)) {
    throw Error(ErrorCode::kNonFinite, "box has a non-finite coordinate or confidence");
  }
  if (!(x1 < x2) || !(y1 < y2)) {
    std::ostringstream msg;
    msg << "degenerate box (" << x1 << ", " << y1 << ", " << x2 << ", " << y2 << ")";
    throw Error(ErrorCode::kDegenerateBox, msg.str());
  }
  if (confidence < 0.0 || confidence > 1.0) {
    std::ostringstream msg;
    msg << "confidence " << confidence << " outside [0, 1]";
    throw Error(ErrorCode::kConfidenceOutOfRange, msg.str());
  }
  if (class_id < 0) {
    throw Error(ErrorCode::kInvalidArgument, "class id must be non-negative");
  }
  return BBox{class_id, x1, y1, x2, y2, confidence};
}

std::vector<std::string> clamp_to_canvas(DetectionSet& set) {
  if (set.image_id.empty()) throw Error(ErrorCode::kInvalidArgument, "empty image id");
  if (!(set.canvas_w > 0.0) || !(set.canvas_h > 0.0) || !std::isfinite(set.canvas_w) ||
      !std::isfinite(set.canvas_h)) {
    throw Error(ErrorCode::kInvalidArgument, "canvas of image '" + set.image_id + "' must be positive");
  }
  std::vector<std::string> warnings;
  for (std::size_t i = 0; i < set.boxes.size(); ++i) {
    BBox& b = set.boxes[i];
    const BBox before = b;
    b.x1 = std::clamp(b.x1, 0.0, set.canvas_w);
    b.x2 = std::clamp(b.x2, 0.0, set.canvas_w);
    b.y1 = std::clamp(b.y1, 0.0, set.canvas_h);
    b.y2 = std::clamp(b.y2, 0.0, set.canvas_h);
    if (b == before) continue;
    if (!(b.x1 < b.x2) || !(b.y1 < b.y2)) {
      std::ostringstream msg;
      msg << "box " << i << " of image '" << set.image_id << "' lies outside the canvas";
      throw Error(ErrorCode::kDegenerateBox, msg.str());
    }
    std::ostringstream msg;
    msg << "image '" << set.image_id << "' box " << i << " clamped to canvas";
    warnings.push_back(msg.str());
  }
  return warnings;
}

}  // namespace facadealign
