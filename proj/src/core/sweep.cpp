#include "facadealign/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <thread>

#include "facadealign/error.hpp"
#include "facadealign/svg.hpp"

namespace facadealign {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Prepared {
  std::vector<DetectionSet> sets;
  std::vector<double> baseline;  // regularity score per image, NaN if it failed
  std::vector<std::string> failure;
};

double score_of(const DetectionSet& set, const SweepConfig& cfg) {
  return regularity_score(rasterize_class_mask(set, cfg.class_id, cfg.mask_w, cfg.mask_h), cfg.k_max)
      .score;
}

void append_status(std::string& status, const std::string& note) {
  if (status == "ok") status.clear();
  if (!status.empty()) status += "; ";
  status += note;
}

SweepRow run_cell(const SweepConfig& cfg, const Prepared& prep, double weight, double threshold) {
  const auto start = std::chrono::steady_clock::now();
  SweepRow row;
  row.weight = weight;
  row.threshold = threshold;

  RefineConfig rc = cfg.refine;
  rc.align.weight = weight;
  rc.align.threshold = threshold;

  std::vector<double> cell_scores;
  std::vector<double> base_scores;
  std::vector<DetectionSet> refined_sets;
  std::vector<DetectionSet> gt_used;
  std::map<std::string, const DetectionSet*> gt_by_id;
  for (const DetectionSet& g : cfg.ground_truth) gt_by_id[g.image_id] = &g;

  double before = 0.0;
  double after = 0.0;
  for (std::size_t i = 0; i < prep.sets.size(); ++i) {
    const DetectionSet& input = prep.sets[i];
    if (!prep.failure[i].empty()) {
      append_status(row.status, "quarantined " + input.image_id + " (" + prep.failure[i] + ")");
      continue;
    }
    try {
      RefineResult r = refine_detections(input, rc);
      const double loss_before = alignment_loss(input, rc.align).total;
      const double loss_after = alignment_loss(r.refined, rc.align).total;
      const double score = score_of(r.refined, cfg);
      before += loss_before;
      after += loss_after;
      cell_scores.push_back(score);
      base_scores.push_back(prep.baseline[i]);
      refined_sets.push_back(std::move(r.refined));
      if (const auto it = gt_by_id.find(input.image_id); it != gt_by_id.end()) {
        gt_used.push_back(*it->second);
      }
    } catch (const Error& e) {
      append_status(row.status, "quarantined " + input.image_id + " (" +
                                    std::string(error_code_name(e.code())) + ")");
    }
  }

  row.images = refined_sets.size();
  if (row.images > 0) {
    row.align_before = before / static_cast<double>(row.images);
    row.align_after = after / static_cast<double>(row.images);
  }
  try {
    row.relative_regularity = relative_regularity(cell_scores, base_scores);
  } catch (const Error& e) {
    row.relative_regularity = kNaN;
    append_status(row.status, std::string(error_code_name(e.code())));
  }
  if (cfg.ground_truth.empty()) {
    row.map50 = kNaN;
  } else {
    try {
      row.map50 = map50(refined_sets, gt_used, cfg.match_iou).map;
    } catch (const Error& e) {
      row.map50 = kNaN;
      append_status(row.status, std::string(error_code_name(e.code())));
    }
  }
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<SweepRow> run_sweep(const SweepConfig& cfg) {
  if (cfg.weights.empty() || cfg.thresholds.empty()) {
    throw Error(ErrorCode::kConfigInvalid, "sweep needs at least one W and one T value");
  }
  for (double w : cfg.weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::kConfigInvalid, "W values must be >= 0");
  }
  for (double t : cfg.thresholds) {
    if (!(t > 0.0) || !std::isfinite(t)) throw Error(ErrorCode::kConfigInvalid, "T values must be > 0");
  }
  if (cfg.k_max < 1 || cfg.mask_w == 0 || cfg.mask_h == 0) {
    throw Error(ErrorCode::kConfigInvalid, "mask size and k_max must be positive");
  }
  {
    RefineConfig probe = cfg.refine;
    probe.align.threshold = cfg.thresholds.front();
    probe.align.weight = cfg.weights.front();
    check_config(probe);
  }
  if (cfg.detections.empty()) throw Error(ErrorCode::kInputMissing, "sweep has no detection sets");
  if (!cfg.ground_truth.empty()) {
    std::set<std::string> gt_ids;
    for (const DetectionSet& g : cfg.ground_truth) gt_ids.insert(g.image_id);
    for (const DetectionSet& d : cfg.detections) {
      if (!gt_ids.count(d.image_id)) {
        throw Error(ErrorCode::kInputMissing, "no ground truth for image '" + d.image_id + "'");
      }
    }
  }

  std::vector<double> weights;
  if (std::find(cfg.weights.begin(), cfg.weights.end(), 0.0) == cfg.weights.end()) weights.push_back(0.0);
  for (double w : cfg.weights) {
    if (std::find(weights.begin(), weights.end(), w) == weights.end()) weights.push_back(w);
  }
  std::vector<double> thresholds;
  for (double t : cfg.thresholds) {
    if (std::find(thresholds.begin(), thresholds.end(), t) == thresholds.end()) thresholds.push_back(t);
  }

  Prepared prep;
  for (const DetectionSet& d : cfg.detections) {
    std::string failure;
    DetectionSet set = d;
    double score = kNaN;
    try {
      set = nms(confidence_filter(d, cfg.confidence), cfg.nms_iou);
      score = score_of(set, cfg);
    } catch (const Error& e) {
      failure = std::string(error_code_name(e.code())) + ": " + e.what();
    }
    prep.sets.push_back(std::move(set));
    prep.baseline.push_back(score);
    prep.failure.push_back(std::move(failure));
  }

  std::vector<std::pair<double, double>> cells;
  for (double w : weights) {
    for (double t : thresholds) cells.emplace_back(w, t);
  }
  std::vector<SweepRow> rows(cells.size());
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned n_threads =
      static_cast<unsigned>(std::min<std::size_t>(cfg.threads ? cfg.threads : hw, cells.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < cells.size(); c = next++) {
      rows[c] = run_cell(cfg, prep, cells[c].first, cells[c].second);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  if (!cfg.output_dir.empty()) write_sweep_reports(cfg.output_dir, rows);
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "W,T,relative_regularity,mAP50,align_before,align_after,images,status\n";
  for (const SweepRow& r : rows) {
    out << fmt(r.weight) << ',' << fmt(r.threshold) << ',' << fmt(r.relative_regularity) << ','
        << fmt(r.map50) << ',' << fmt(r.align_before) << ',' << fmt(r.align_after) << ',' << r.images
        << ',' << csv_field(r.status) << '\n';
  }
}

void write_sweep_timing_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "W,T,seconds\n";
  for (const SweepRow& r : rows) out << fmt(r.weight) << ',' << fmt(r.threshold) << ',' << fmt(r.seconds) << '\n';
}

void write_sweep_reports(const std::filesystem::path& dir, const std::vector<SweepRow>& rows) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create '" + dir.string() + "': " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw Error(ErrorCode::kIo, "cannot write '" + (dir / name).string() + "'");
    return f;
  };
  {
    auto f = open("sweep.csv");
    write_sweep_csv(f, rows);
  }
  {
    auto f = open("sweep_timing.csv");
    write_sweep_timing_csv(f, rows);
  }

  std::vector<double> thresholds;
  for (const SweepRow& r : rows) {
    if (std::find(thresholds.begin(), thresholds.end(), r.threshold) == thresholds.end()) {
      thresholds.push_back(r.threshold);
    }
  }
  Plot tradeoff{"Regularity vs mAP@0.5", "relative SVD regularity (%)", "mAP@0.5", {}, kNaN};
  Plot by_weight{"Relative SVD regularity (baseline = 100%)", "W", "relative SVD regularity (%)", {}, 100.0};
  for (double t : thresholds) {
    PlotSeries scatter{"T=" + fmt(t), {}, false};
    PlotSeries line{"T=" + fmt(t), {}, true};
    for (const SweepRow& r : rows) {
      if (r.threshold != t) continue;
      scatter.points.push_back({r.relative_regularity, r.map50, "W=" + fmt(r.weight)});
      line.points.push_back({r.weight, r.relative_regularity, ""});
    }
    std::sort(line.points.begin(), line.points.end(),
              [](const PlotPoint& a, const PlotPoint& b) { return a.x < b.x; });
    tradeoff.series.push_back(std::move(scatter));
    by_weight.series.push_back(std::move(line));
  }
  {
    auto f = open("sweep_tradeoff.svg");
    write_svg(f, tradeoff);
  }
  {
    auto f = open("sweep_regularity.svg");
    write_svg(f, by_weight);
  }
}

}  // namespace facadealign
