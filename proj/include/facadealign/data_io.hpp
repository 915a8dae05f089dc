#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "facadealign/geometry.hpp"

namespace facadealign {

using ClassNames = std::map<std::int32_t, std::string>;

struct DetectionFile {
  std::vector<DetectionSet> sets;  // order of first appearance
  ClassNames class_names;
  std::vector<std::string> warnings;  // clamped boxes, inferred canvases
};

/// Line-delimited detection interchange:
///
///   # comment
///   @canvas <image_id> <width> <height>
///   <image_id> <class_id> <class_name|-> <x1> <y1> <x2> <y2> <confidence>
///
/// Images without a @canvas line get the smallest canvas holding their
/// boxes. Boxes are validated and clamped into the canvas. Throws
/// kParseError (with line number) or the validation error of a bad box.
DetectionFile parse_detections(std::istream& in);

/// Inverse of parse_detections. Coordinates use the shortest decimal form
/// that round-trips exactly.
void write_detections(std::ostream& out, std::span<const DetectionSet> sets,
                      const ClassNames& names = {});

DetectionFile read_detection_file(const std::filesystem::path& path);
void write_detection_file(const std::filesystem::path& path, std::span<const DetectionSet> sets,
                          const ClassNames& names = {});

/// Element names of the per-image CMP annotation XML. The defaults match
/// the dataset's published layout:
///   <object><points><x/><x/><y/><y/></points><label/></object>
struct CmpLayout {
  std::string object_tag = "object";
  std::string points_tag = "points";
  std::string x_tag = "x";
  std::string y_tag = "y";
  std::string label_tag = "label";
};

/// `<id> <name>` per line, `#` comments allowed.
ClassNames parse_label_table(std::istream& in);

/// Relative corner coordinates scaled by (image_w, image_h) into pixel
/// boxes with confidence 1. Throws kParseError or kUnknownLabel.
DetectionSet parse_cmp_annotation(std::istream& xml, const std::string& image_id, double image_w,
                                  double image_h, const ClassNames& labels,
                                  const CmpLayout& layout = {});

struct ImageSize {
  double width = 0.0;
  double height = 0.0;
};

/// `<image_id> <width> <height>` per line.
std::map<std::string, ImageSize> parse_size_table(std::istream& in);

/// Converts every `*.xml` under `dir` (sorted by name; image id = file stem).
/// Throws kInputMissing when a size entry or the directory is missing.
DetectionFile load_cmp_directory(const std::filesystem::path& dir,
                                 const std::map<std::string, ImageSize>& sizes,
                                 const ClassNames& labels, const CmpLayout& layout = {});

struct CropRect {
  double x = 0.0;
  double y = 0.0;
  double width = 0.0;
  double height = 0.0;
};

struct FacadeSample {
  std::string sample_id;
  std::string source_image_id;
  CropRect crop;
  DetectionSet annotations;           // crop frame; image_id == sample_id
  std::vector<std::size_t> clipped;   // indices into annotations.boxes
  std::size_t dropped = 0;
};

/// Translates boxes into the crop frame, drops boxes with no area inside
/// it and clips (and flags) boxes straddling its border. Throws kEmptyCrop
/// for a zero-area rectangle, kInvalidArgument if it leaves the canvas.
FacadeSample crop_to_facade(const DetectionSet& annotations, const CropRect& crop,
                            const std::string& sample_id);

/// `<image_id> <x> <y> <width> <height>` per line; the k-th crop of an
/// image becomes sample `<image_id>_<k>`.
std::vector<FacadeSample> crop_dataset(std::span<const DetectionSet> images, std::istream& crops);

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
};

/// Sorts the ids, applies a seeded Fisher-Yates shuffle, then takes
/// floor(n * train) ids for train, floor(n * val) for val and the rest for
/// test. A non-empty dataset with a positive train ratio always gets at
/// least one training id. Throws kBadRatios or kInvalidArgument (duplicate id).
DatasetSplit split_dataset(std::vector<std::string> ids,
                           const std::array<double, 3>& ratios = {0.8, 0.1, 0.1},
                           std::uint64_t seed = 0);

/// `<split> <sample_id>` per line, train then val then test.
void write_split(std::ostream& out, const DatasetSplit& split);

}  // namespace facadealign
