#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace facadealign {

/// Axis-aligned box in continuous pixel coordinates (origin top-left).
///
/// Construct through validate_box() when the values come from outside the
/// program; the struct itself does not enforce x1 < x2, y1 < y2.
struct BBox {
  std::int32_t class_id = 0;
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
  double confidence = 1.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

enum class Axis { kX, kY };

/// Leading and trailing edge of a box along an axis (x1/x2 or y1/y2).
inline double first_edge(const BBox& b, Axis axis) { return axis == Axis::kX ? b.x1 : b.y1; }
inline double second_edge(const BBox& b, Axis axis) { return axis == Axis::kX ? b.x2 : b.y2; }

double area(const BBox& box);

/// Intersection over union. Disjoint or edge-touching boxes give 0.
double iou(const BBox& a, const BBox& b);

/// Checks the box invariants and returns the box, or throws Error with
/// kNonFinite, kDegenerateBox or kConfidenceOutOfRange.
BBox validate_box(double x1, double y1, double x2, double y2, std::int32_t class_id,
                  double confidence);

/// All boxes of one facade image plus the canvas they live on.
struct DetectionSet {
  std::string image_id;
  double canvas_w = 0.0;
  double canvas_h = 0.0;
  std::vector<BBox> boxes;

  friend bool operator==(const DetectionSet&, const DetectionSet&) = default;
};

/// Clamps every box into [0, canvas_w] x [0, canvas_h]. Returns a message
/// per clamped box (empty when nothing changed). Throws kDegenerateBox if
/// clamping leaves a box with zero extent, kInvalidArgument for a bad
/// canvas or an empty image id.
std::vector<std::string> clamp_to_canvas(DetectionSet& set);

}  // namespace facadealign
