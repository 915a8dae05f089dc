#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "facadealign/align_loss.hpp"
#include "facadealign/error.hpp"
#include "facadealign/geometry.hpp"

namespace facadealign {

struct RefineConfig {
  AlignConfig align;
  double lambda_fid = 0.1;
  double step_size = 0.5;  // largest coordinate move per iteration, pixels
  std::size_t max_iters = 500;
  double tol = 1e-3;  // pixels
};

/// Throws kConfigInvalid when any field is out of range.
void check_config(const RefineConfig& cfg);

/// Smallest width/height a box may shrink to while being refined.
inline constexpr double kMinExtent = 0.5;

struct RefineStep {
  std::size_t iteration = 0;
  double objective = 0.0;
  double alignment = 0.0;
  double max_update = 0.0;  // applied coordinate change; 0 for a rejected step
  bool accepted = false;
};

struct RefineTrace {
  std::vector<RefineStep> steps;
  std::size_t iterations = 0;
  bool converged = false;
  /// Set to kDegenerateInput when the input had no boxes to refine.
  std::optional<ErrorCode> status;
};

/// lambda_fid * sum |current - anchor| / max(n, 1) + W * alignment total.
/// Throws kSetMismatch when the two sets differ in count, class or order.
double refinement_objective(const DetectionSet& current, const DetectionSet& anchors,
                            const RefineConfig& cfg);

struct RefineResult {
  DetectionSet refined;
  RefineTrace trace;
};

/// Projected subgradient descent on refinement_objective, anchored at the
/// input. The subgradient is scaled so the largest coordinate moves by the
/// working step. A step is accepted only when it lowers the objective and
/// then lets the working step grow back toward step_size; a rejected step
/// halves it. Coordinates of one edge type that are tied (or about to meet)
/// across a candidate pair move as one group. Stops once the working step
/// falls below tol or after max_iters proposals.
RefineResult refine_detections(const DetectionSet& input, const RefineConfig& cfg);

/// CSV with header `iteration,objective,alignment,max_update,accepted`.
void write_trace_csv(std::ostream& out, const RefineTrace& trace);

}  // namespace facadealign
