#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "facadealign/geometry.hpp"

namespace facadealign {

/// Dense binary occupancy grid, row-major, entries 0 or 1.
class MaskCanvas {
 public:
  MaskCanvas(std::size_t width, std::size_t height);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }

  std::uint8_t at(std::size_t x, std::size_t y) const { return values_[y * width_ + x]; }
  void set(std::size_t x, std::size_t y, bool on) { values_[y * width_ + x] = on ? 1 : 0; }

  std::span<const std::uint8_t> values() const { return values_; }
  std::size_t count_ones() const;

  MaskCanvas transposed() const;

  friend bool operator==(const MaskCanvas&, const MaskCanvas&) = default;

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<std::uint8_t> values_;
};

inline constexpr std::size_t kDefaultMaskSide = 256;
inline constexpr std::size_t kDefaultMaxRank = 25;

/// Scales the set's canvas uniformly (aspect preserved, anchored top-left,
/// zero padding) onto a width x height mask. A pixel is 1 iff its center
/// lies inside at least one box of class_id (half-open on the far edges).
MaskCanvas rasterize_class_mask(const DetectionSet& set, std::int32_t class_id,
                                std::size_t width = kDefaultMaskSide,
                                std::size_t height = kDefaultMaskSide);

/// Singular values of the mask, descending, and the per-k reconstruction
/// error. Built once and queried for any k.
class MaskSpectrum {
 public:
  explicit MaskSpectrum(const MaskCanvas& mask);

  std::size_t max_rank() const { return max_rank_; }
  std::span<const double> singular_values() const { return sigma_; }

  /// Mean squared error between the mask and its rank-k reconstruction.
  /// Throws kRankOutOfRange unless 1 <= k <= min(width, height).
  double rank_k_mse(std::size_t k) const;

 private:
  std::size_t max_rank_;
  std::vector<double> sigma_;
  std::vector<double> mse_;  // mse_[k] for k = 0 .. number of singular triplets
};

double rank_k_mse(const MaskCanvas& mask, std::size_t k);

struct RegularityCurve {
  std::vector<double> mse;  // mse[k - 1] for k = 1 .. k_used
  double score = 0.0;
  std::size_t k_max = kDefaultMaxRank;
  std::size_t k_used = 0;  // < k_max when the mask is smaller than k_max
};

RegularityCurve regularity_score(const MaskCanvas& mask, std::size_t k_max = kDefaultMaxRank);

/// 100 * sum(method) / sum(baseline). Throws kZeroBaseline when the
/// baseline sum is not positive, kInvalidArgument on length mismatch.
double relative_regularity(std::span<const double> method, std::span<const double> baseline);

/// CSV with header `k,mse`.
void write_curve_csv(std::ostream& out, const RegularityCurve& curve);

/// Binary PGM (P5, maxval 255); ones are written as 255.
void write_pgm(std::ostream& out, const MaskCanvas& mask);

/// Reads a P5 PGM; any nonzero sample becomes 1. Throws kParseError.
MaskCanvas read_pgm(std::istream& in);

}  // namespace facadealign
