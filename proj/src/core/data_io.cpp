#include "facadealign/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "facadealign/error.hpp"
#include "random.hpp"

namespace facadealign {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
  throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": " + what);
}

double to_double(std::string_view s, std::size_t line_no, const char* field) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const char* begin = s.data();
  if (!s.empty() && s.front() == '+') ++begin;
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    parse_fail(line_no, std::string("bad ") + field + " '" + std::string(s) + "'");
  }
  return v;
}

std::int32_t to_int(std::string_view s, std::size_t line_no, const char* field) {
  std::int32_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    parse_fail(line_no, std::string("bad ") + field + " '" + std::string(s) + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

DetectionFile parse_detections(std::istream& in) {
  DetectionFile file;
  std::map<std::string, std::size_t> index;
  std::set<std::string> declared;
  auto set_for = [&](const std::string& id) -> DetectionSet& {
    const auto [it, inserted] = index.emplace(id, file.sets.size());
    if (inserted) file.sets.push_back(DetectionSet{id, 0.0, 0.0, {}});
    return file.sets[it->second];
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto f = split_fields(body);
    if (f.front() == "@canvas") {
      if (f.size() != 4) parse_fail(line_no, "@canvas needs <image_id> <width> <height>");
      const std::string id(f[1]);
      if (!declared.insert(id).second) parse_fail(line_no, "canvas of '" + id + "' declared twice");
      DetectionSet& set = set_for(id);
      set.canvas_w = to_double(f[2], line_no, "canvas width");
      set.canvas_h = to_double(f[3], line_no, "canvas height");
      if (!(set.canvas_w > 0.0) || !(set.canvas_h > 0.0) || !std::isfinite(set.canvas_w) ||
          !std::isfinite(set.canvas_h)) {
        parse_fail(line_no, "canvas dimensions must be positive and finite");
      }
      continue;
    }
    if (f.size() != 8) parse_fail(line_no, "expected 8 fields, got " + std::to_string(f.size()));
    const std::string id(f[0]);
    const std::int32_t cls = to_int(f[1], line_no, "class id");
    if (f[2] != "-") {
      const auto [it, inserted] = file.class_names.emplace(cls, std::string(f[2]));
      if (!inserted && it->second != f[2]) {
        parse_fail(line_no, "class " + std::to_string(cls) + " named both '" + it->second +
                                "' and '" + std::string(f[2]) + "'");
      }
    }
    BBox box;
    try {
      box = validate_box(to_double(f[3], line_no, "x1"), to_double(f[4], line_no, "y1"),
                         to_double(f[5], line_no, "x2"), to_double(f[6], line_no, "y2"), cls,
                         to_double(f[7], line_no, "confidence"));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kParseError) throw;
      throw Error(e.code(), "line " + std::to_string(line_no) + " (image '" + id + "'): " + e.what());
    }
    set_for(id).boxes.push_back(box);
  }

  for (DetectionSet& set : file.sets) {
    if (!declared.count(set.image_id)) {
      for (const BBox& b : set.boxes) {
        set.canvas_w = std::max(set.canvas_w, b.x2);
        set.canvas_h = std::max(set.canvas_h, b.y2);
      }
      file.warnings.push_back("image '" + set.image_id + "' has no @canvas line; canvas inferred");
    }
    auto clamped = clamp_to_canvas(set);
    file.warnings.insert(file.warnings.end(), clamped.begin(), clamped.end());
  }
  return file;
}

void write_detections(std::ostream& out, std::span<const DetectionSet> sets, const ClassNames& names) {
  for (const DetectionSet& set : sets) {
    out << "@canvas " << set.image_id << ' ' << format_double(set.canvas_w) << ' '
        << format_double(set.canvas_h) << '\n';
    for (const BBox& b : set.boxes) {
      const auto name = names.find(b.class_id);
      out << set.image_id << ' ' << b.class_id << ' ' << (name == names.end() ? "-" : name->second)
          << ' ' << format_double(b.x1) << ' ' << format_double(b.y1) << ' ' << format_double(b.x2)
          << ' ' << format_double(b.y2) << ' ' << format_double(b.confidence) << '\n';
    }
  }
}

DetectionFile read_detection_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInputMissing, "cannot open '" + path.string() + "'");
  try {
    return parse_detections(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_detection_file(const std::filesystem::path& path, std::span<const DetectionSet> sets,
                          const ClassNames& names) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  write_detections(out, sets, names);
  if (!out) throw Error(ErrorCode::kIo, "write to '" + path.string() + "' failed");
}

ClassNames parse_label_table(std::istream& in) {
  ClassNames names;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto f = split_fields(body);
    if (f.size() != 2) parse_fail(line_no, "label table needs <id> <name>");
    if (!names.emplace(to_int(f[0], line_no, "label id"), std::string(f[1])).second) {
      parse_fail(line_no, "label id listed twice");
    }
  }
  return names;
}

DetectionSet parse_cmp_annotation(std::istream& xml, const std::string& image_id, double image_w,
                                  double image_h, const ClassNames& labels, const CmpLayout& layout) {
  namespace pt = boost::property_tree;
  if (!(image_w > 0.0) || !(image_h > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "image dimensions must be positive");
  }
  pt::ptree doc;
  try {
    pt::read_xml(xml, doc);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorCode::kParseError, image_id + ": " + e.message() + " at line " +
                                            std::to_string(e.line()));
  }

  DetectionSet set{image_id, image_w, image_h, {}};
  // Objects may sit directly under the document or under its root element.
  std::vector<const pt::ptree*> scopes{&doc};
  for (const auto& child : doc) scopes.push_back(&child.second);

  std::size_t object_no = 0;
  for (const pt::ptree* scope : scopes) {
    for (const auto& [tag, object] : *scope) {
      if (tag != layout.object_tag) continue;
      ++object_no;
      const std::string where = image_id + " object " + std::to_string(object_no);
      const auto points = object.get_child_optional(layout.points_tag);
      if (!points) throw Error(ErrorCode::kParseError, where + ": missing <" + layout.points_tag + ">");
      std::vector<double> xs;
      std::vector<double> ys;
      try {
        for (const auto& [ptag, value] : *points) {
          if (ptag == layout.x_tag) xs.push_back(value.get_value<double>());
          if (ptag == layout.y_tag) ys.push_back(value.get_value<double>());
        }
      } catch (const pt::ptree_bad_data&) {
        throw Error(ErrorCode::kParseError, where + ": non-numeric coordinate");
      }
      if (xs.size() != 2 || ys.size() != 2) {
        throw Error(ErrorCode::kParseError, where + ": expected two x and two y coordinates");
      }
      const auto label = object.get_optional<std::int32_t>(layout.label_tag);
      if (!label) throw Error(ErrorCode::kParseError, where + ": missing or bad <" + layout.label_tag + ">");
      if (!labels.count(*label)) {
        throw Error(ErrorCode::kUnknownLabel, where + ": label " + std::to_string(*label) +
                                                  " is not in the label table");
      }
      const auto [xmin, xmax] = std::minmax(xs[0], xs[1]);
      const auto [ymin, ymax] = std::minmax(ys[0], ys[1]);
      try {
        set.boxes.push_back(
            validate_box(xmin * image_w, ymin * image_h, xmax * image_w, ymax * image_h, *label, 1.0));
      } catch (const Error& e) {
        throw Error(e.code(), where + ": " + e.what());
      }
    }
  }
  return set;
}

std::map<std::string, ImageSize> parse_size_table(std::istream& in) {
  std::map<std::string, ImageSize> sizes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto f = split_fields(body);
    if (f.size() != 3) parse_fail(line_no, "size table needs <image_id> <width> <height>");
    const ImageSize size{to_double(f[1], line_no, "width"), to_double(f[2], line_no, "height")};
    if (!(size.width > 0.0) || !(size.height > 0.0)) parse_fail(line_no, "sizes must be positive");
    sizes[std::string(f[0])] = size;
  }
  return sizes;
}

DetectionFile load_cmp_directory(const std::filesystem::path& dir,
                                 const std::map<std::string, ImageSize>& sizes,
                                 const ClassNames& labels, const CmpLayout& layout) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kInputMissing, "annotation directory '" + dir.string() + "' not found");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".xml") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  DetectionFile out;
  out.class_names = labels;
  for (const fs::path& file : files) {
    const std::string id = file.stem().string();
    const auto size = sizes.find(id);
    if (size == sizes.end()) {
      throw Error(ErrorCode::kInputMissing, "no image size listed for '" + id + "'");
    }
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::kInputMissing, "cannot open '" + file.string() + "'");
    DetectionSet set = parse_cmp_annotation(in, id, size->second.width, size->second.height, labels, layout);
    auto warnings = clamp_to_canvas(set);
    out.warnings.insert(out.warnings.end(), warnings.begin(), warnings.end());
    out.sets.push_back(std::move(set));
  }
  return out;
}

FacadeSample crop_to_facade(const DetectionSet& annotations, const CropRect& crop,
                            const std::string& sample_id) {
  if (!(crop.width > 0.0) || !(crop.height > 0.0)) {
    throw Error(ErrorCode::kEmptyCrop, "crop '" + sample_id + "' has zero area");
  }
  if (crop.x < 0.0 || crop.y < 0.0 || crop.x + crop.width > annotations.canvas_w ||
      crop.y + crop.height > annotations.canvas_h) {
    throw Error(ErrorCode::kInvalidArgument, "crop '" + sample_id + "' extends past the canvas");
  }
  FacadeSample sample;
  sample.sample_id = sample_id;
  sample.source_image_id = annotations.image_id;
  sample.crop = crop;
  sample.annotations = DetectionSet{sample_id, crop.width, crop.height, {}};
  const double right = crop.x + crop.width;
  const double bottom = crop.y + crop.height;
  for (const BBox& b : annotations.boxes) {
    const double x1 = std::max(b.x1, crop.x);
    const double y1 = std::max(b.y1, crop.y);
    const double x2 = std::min(b.x2, right);
    const double y2 = std::min(b.y2, bottom);
    if (!(x1 < x2) || !(y1 < y2)) {
      ++sample.dropped;
      continue;
    }
    if (x1 != b.x1 || y1 != b.y1 || x2 != b.x2 || y2 != b.y2) {
      sample.clipped.push_back(sample.annotations.boxes.size());
    }
    sample.annotations.boxes.push_back(
        {b.class_id, x1 - crop.x, y1 - crop.y, x2 - crop.x, y2 - crop.y, b.confidence});
  }
  return sample;
}

std::vector<FacadeSample> crop_dataset(std::span<const DetectionSet> images, std::istream& crops) {
  std::map<std::string, const DetectionSet*> by_id;
  for (const DetectionSet& s : images) by_id[s.image_id] = &s;
  std::map<std::string, std::size_t> counter;
  std::vector<FacadeSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(crops, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto f = split_fields(body);
    if (f.size() != 5) parse_fail(line_no, "crop table needs <image_id> <x> <y> <width> <height>");
    const std::string id(f[0]);
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kInputMissing, "crop table names unknown image '" + id + "'");
    }
    const CropRect rect{to_double(f[1], line_no, "x"), to_double(f[2], line_no, "y"),
                        to_double(f[3], line_no, "width"), to_double(f[4], line_no, "height")};
    samples.push_back(crop_to_facade(*it->second, rect, id + "_" + std::to_string(counter[id]++)));
  }
  return samples;
}

DatasetSplit split_dataset(std::vector<std::string> ids, const std::array<double, 3>& ratios,
                           std::uint64_t seed) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (ratios[0] < 0.0 || ratios[1] < 0.0 || ratios[2] < 0.0 || !(std::abs(sum - 1.0) <= 1e-9)) {
    throw Error(ErrorCode::kBadRatios, "split ratios must be non-negative and sum to 1");
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw Error(ErrorCode::kInvalidArgument, "sample ids must be unique");
  }
  detail::Rng rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) {
    std::swap(ids[i - 1], ids[rng.below(i)]);
  }

  const std::size_t n = ids.size();
  // The epsilon keeps products such as 10 * 0.7 from flooring one short.
  auto portion = [n](double r) {
    return std::min(n, static_cast<std::size_t>(std::floor(static_cast<double>(n) * r + 1e-9)));
  };
  std::size_t n_train = portion(ratios[0]);
  if (n_train == 0 && n > 0 && ratios[0] > 0.0) n_train = 1;
  const std::size_t n_val = std::min(n - n_train, portion(ratios[1]));

  DatasetSplit split;
  split.seed = seed;
  split.ratios = ratios;
  split.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                   ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
  return split;
}

void write_split(std::ostream& out, const DatasetSplit& split) {
  for (const auto& id : split.train) out << "train " << id << '\n';
  for (const auto& id : split.val) out << "val " << id << '\n';
  for (const auto& id : split.test) out << "test " << id << '\n';
}

}  // namespace facadealign
