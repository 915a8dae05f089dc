#include "facadealign/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "facadealign/error.hpp"
#include "random.hpp"

namespace facadealign {

double GridSpec::canvas_w() const {
  return 2.0 * margin + cols * window_w + (cols > 0 ? (cols - 1) * spacing_x : 0.0);
}

double GridSpec::canvas_h() const {
  return 2.0 * margin + rows * window_h + (rows > 0 ? (rows - 1) * spacing_y : 0.0);
}

DetectionSet generate_grid(const GridSpec& spec) {
  if (spec.rows == 0 || spec.cols == 0 || !(spec.window_w > 0.0) || !(spec.window_h > 0.0) ||
      !(spec.spacing_x > 0.0) || !(spec.spacing_y > 0.0) || !(spec.margin >= 0.0) ||
      spec.class_id < 0 || spec.image_id.empty()) {
    throw Error(ErrorCode::kConfigInvalid,
                "grid spec needs rows, cols, window size and spacing > 0, margin >= 0");
  }
  const double cw = spec.canvas_w();
  const double ch = spec.canvas_h();
  if (!(cw <= kMaxSynthCanvas) || !(ch <= kMaxSynthCanvas)) {
    throw Error(ErrorCode::kSpecOverflow, "grid canvas exceeds the synthetic canvas limit");
  }
  DetectionSet set{spec.image_id, cw, ch, {}};
  set.boxes.reserve(static_cast<std::size_t>(spec.rows) * spec.cols);
  for (std::uint32_t r = 0; r < spec.rows; ++r) {
    const double y1 = spec.margin + r * (spec.window_h + spec.spacing_y);
    for (std::uint32_t c = 0; c < spec.cols; ++c) {
      const double x1 = spec.margin + c * (spec.window_w + spec.spacing_x);
      set.boxes.push_back({spec.class_id, x1, y1, x1 + spec.window_w, y1 + spec.window_h, 1.0});
    }
  }
  return set;
}

std::vector<std::size_t> row_indices(const DetectionSet& set) {
  std::vector<double> tops;
  tops.reserve(set.boxes.size());
  for (const BBox& b : set.boxes) tops.push_back(b.y1);
  std::sort(tops.begin(), tops.end());
  tops.erase(std::unique(tops.begin(), tops.end()), tops.end());
  std::vector<std::size_t> rows;
  rows.reserve(set.boxes.size());
  for (const BBox& b : set.boxes) {
    rows.push_back(static_cast<std::size_t>(
        std::lower_bound(tops.begin(), tops.end(), b.y1) - tops.begin()));
  }
  return rows;
}

namespace {

void fit_interval(double& lo, double& hi, double limit) {
  constexpr double kMin = 0.5;
  if (hi - lo < kMin) {
    const double mid = 0.5 * (lo + hi);
    lo = mid - 0.5 * kMin;
    hi = mid + 0.5 * kMin;
  }
  if (lo < 0.0) {
    hi -= lo;
    lo = 0.0;
  }
  if (hi > limit) {
    lo -= hi - limit;
    hi = limit;
  }
  lo = std::max(lo, 0.0);
}

}  // namespace

CorruptResult corrupt(const DetectionSet& set, const NoiseSpec& noise) {
  if (!(noise.jitter >= 0.0) || !(noise.shear >= 0.0) || !(noise.size_noise >= 0.0) ||
      !(noise.dropout >= 0.0 && noise.dropout <= 1.0)) {
    throw Error(ErrorCode::kConfigInvalid, "noise magnitudes must be >= 0 and dropout in [0, 1]");
  }
  detail::Rng rng(noise.seed);
  const auto rows = row_indices(set);
  CorruptResult out{DetectionSet{set.image_id, set.canvas_w, set.canvas_h, {}}, {}};

  for (std::size_t i = 0; i < set.boxes.size(); ++i) {
    const double u_drop = rng.uniform();
    double draws[6];
    for (double& d : draws) d = rng.uniform(-1.0, 1.0);

    const BBox& src = set.boxes[i];
    CorruptionEntry entry{i, std::nullopt, rows[i], src, src};
    if (u_drop < noise.dropout) {
      out.record.dropped.push_back(i);
      out.record.entries.push_back(entry);
      continue;
    }
    BBox b = src;
    const double shift = noise.shear * static_cast<double>(rows[i]);
    b.x1 += shift;
    b.x2 += shift;
    const double dw = noise.size_noise * draws[4];
    const double dh = noise.size_noise * draws[5];
    b.x1 -= 0.5 * dw;
    b.x2 += 0.5 * dw;
    b.y1 -= 0.5 * dh;
    b.y2 += 0.5 * dh;
    b.x1 += noise.jitter * draws[0];
    b.y1 += noise.jitter * draws[1];
    b.x2 += noise.jitter * draws[2];
    b.y2 += noise.jitter * draws[3];
    fit_interval(b.x1, b.x2, set.canvas_w);
    fit_interval(b.y1, b.y2, set.canvas_h);

    entry.corrupted = out.set.boxes.size();
    entry.after = b;
    out.set.boxes.push_back(b);
    out.record.entries.push_back(entry);
  }
  return out;
}

void write_corruption_record(std::ostream& out, const std::string& image_id,
                             const CorruptionRecord& record) {
  char buf[256];
  for (const CorruptionEntry& e : record.entries) {
    if (e.corrupted) {
      std::snprintf(buf, sizeof buf, "box %s %zu %zu %zu %.17g %.17g %.17g %.17g -> %.17g %.17g %.17g %.17g\n",
                    image_id.c_str(), e.original, *e.corrupted, e.row, e.before.x1, e.before.y1,
                    e.before.x2, e.before.y2, e.after.x1, e.after.y1, e.after.x2, e.after.y2);
    } else {
      std::snprintf(buf, sizeof buf, "box %s %zu dropped %zu %.17g %.17g %.17g %.17g\n",
                    image_id.c_str(), e.original, e.row, e.before.x1, e.before.y1, e.before.x2,
                    e.before.y2);
    }
    out << buf;
  }
  out << "dropped " << image_id;
  for (std::size_t d : record.dropped) out << ' ' << d;
  out << '\n';
}

SyntheticDataset make_synthetic_dataset(const GridSpec& grid, const NoiseSpec& noise,
                                        std::size_t count) {
  SyntheticDataset data;
  for (std::size_t i = 0; i < count; ++i) {
    GridSpec spec = grid;
    char id[64];
    std::snprintf(id, sizeof id, "%s_%04zu", grid.image_id.c_str(), i);
    spec.image_id = id;
    DetectionSet truth = generate_grid(spec);

    NoiseSpec image_noise = noise;
    image_noise.seed = detail::mix_seed(noise.seed, 2 * i);
    CorruptResult corrupted = corrupt(truth, image_noise);

    detail::Rng conf_rng(detail::mix_seed(noise.seed, 2 * i + 1));
    for (BBox& b : corrupted.set.boxes) b.confidence = conf_rng.uniform(0.3, 1.0);

    data.ground_truth.push_back(std::move(truth));
    data.detections.push_back(std::move(corrupted.set));
    data.records.push_back(std::move(corrupted.record));
  }
  return data;
}

}  // namespace facadealign
