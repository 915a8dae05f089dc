#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "facadealign/geometry.hpp"

namespace facadealign {

/// Perfect lattice of identical windows.
struct GridSpec {
  std::uint32_t rows = 5;
  std::uint32_t cols = 8;
  double window_w = 20.0;
  double window_h = 30.0;
  double spacing_x = 20.0;  // gap between neighboring columns
  double spacing_y = 20.0;  // gap between neighboring rows
  double margin = 20.0;
  std::int32_t class_id = 0;
  std::string image_id = "grid";

  double canvas_w() const;
  double canvas_h() const;
};

/// Canvas sides beyond this throw kSpecOverflow.
inline constexpr double kMaxSynthCanvas = 16384.0;

/// Boxes in row-major order. Throws kConfigInvalid for a malformed spec and
/// kSpecOverflow when the derived canvas exceeds kMaxSynthCanvas.
DetectionSet generate_grid(const GridSpec& spec);

struct NoiseSpec {
  double jitter = 0.0;      // half-width of the uniform per-edge shift, pixels
  double shear = 0.0;       // horizontal shift per row index, pixels
  double dropout = 0.0;     // probability of removing a box
  double size_noise = 0.0;  // half-width of the uniform width/height change, pixels
  std::uint64_t seed = 0;
};

/// What happened to one input box.
struct CorruptionEntry {
  std::size_t original = 0;
  std::optional<std::size_t> corrupted;  // index in the output set, empty if dropped
  std::size_t row = 0;
  BBox before;
  BBox after;  // equals `before` for dropped boxes
};

struct CorruptionRecord {
  std::vector<CorruptionEntry> entries;  // one per input box, in input order
  std::vector<std::size_t> dropped;
};

struct CorruptResult {
  DetectionSet set;
  CorruptionRecord record;
};

/// Row index of every box: rank of its top edge among the distinct top edges
/// of the set. Exact for generate_grid output.
std::vector<std::size_t> row_indices(const DetectionSet& set);

/// Applies jitter, shear, size noise and dropout. Each box consumes a fixed
/// number of draws from a generator seeded by noise.seed, so the result
/// depends only on (set, noise). Boxes are clamped to the canvas and keep
/// at least a 0.5 px extent.
CorruptResult corrupt(const DetectionSet& set, const NoiseSpec& noise);

/// Text form: one `box` line per input entry, then a `dropped` line.
void write_corruption_record(std::ostream& out, const std::string& image_id,
                             const CorruptionRecord& record);

/// Ground truth plus corrupted detections for `count` seeded images. The
/// corrupted detections get confidences drawn uniformly from [0.3, 1.0].
struct SyntheticDataset {
  std::vector<DetectionSet> ground_truth;
  std::vector<DetectionSet> detections;
  std::vector<CorruptionRecord> records;
};

SyntheticDataset make_synthetic_dataset(const GridSpec& grid, const NoiseSpec& noise,
                                        std::size_t count);

}  // namespace facadealign
