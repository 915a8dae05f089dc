#include "facadealign/facadealign.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "facadealign/align_loss.hpp"
#include "facadealign/data_io.hpp"
#include "facadealign/detect_eval.hpp"
#include "facadealign/error.hpp"
#include "facadealign/refine.hpp"
#include "facadealign/regularity.hpp"
#include "facadealign/sweep.hpp"
#include "facadealign/synth.hpp"

namespace fa = facadealign;

struct fa_detections {
  fa::DetectionFile file;
};

struct fa_mask {
  fa::MaskCanvas canvas;
};

struct fa_eval_report {
  fa::EvalReport report;
  std::string summary;
};

struct fa_sweep_result {
  std::vector<fa::SweepRow> rows;
};

namespace {

thread_local std::string g_last_error;

fa_status to_status(fa::ErrorCode code) {
  switch (code) {
    case fa::ErrorCode::kDegenerateBox: return FA_ERR_DEGENERATE_BOX;
    case fa::ErrorCode::kNonFinite: return FA_ERR_NON_FINITE;
    case fa::ErrorCode::kConfidenceOutOfRange: return FA_ERR_CONFIDENCE_OUT_OF_RANGE;
    case fa::ErrorCode::kSetMismatch: return FA_ERR_SET_MISMATCH;
    case fa::ErrorCode::kDegenerateInput: return FA_ERR_DEGENERATE_INPUT;
    case fa::ErrorCode::kRankOutOfRange: return FA_ERR_RANK_OUT_OF_RANGE;
    case fa::ErrorCode::kZeroBaseline: return FA_ERR_ZERO_BASELINE;
    case fa::ErrorCode::kNoGroundTruth: return FA_ERR_NO_GROUND_TRUTH;
    case fa::ErrorCode::kImageIdMismatch: return FA_ERR_IMAGE_ID_MISMATCH;
    case fa::ErrorCode::kParseError: return FA_ERR_PARSE;
    case fa::ErrorCode::kUnknownLabel: return FA_ERR_UNKNOWN_LABEL;
    case fa::ErrorCode::kEmptyCrop: return FA_ERR_EMPTY_CROP;
    case fa::ErrorCode::kBadRatios: return FA_ERR_BAD_RATIOS;
    case fa::ErrorCode::kSpecOverflow: return FA_ERR_SPEC_OVERFLOW;
    case fa::ErrorCode::kInputMissing: return FA_ERR_INPUT_MISSING;
    case fa::ErrorCode::kConfigInvalid: return FA_ERR_CONFIG_INVALID;
    case fa::ErrorCode::kInvalidArgument: return FA_ERR_INVALID_ARGUMENT;
    case fa::ErrorCode::kIo: return FA_ERR_IO;
  }
  return FA_ERR_INTERNAL;
}

fa_status fail(fa_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename Body>
fa_status guarded(Body&& body) {
  g_last_error.clear();
  try {
    body();
    return FA_OK;
  } catch (const fa::Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(FA_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(FA_ERR_INTERNAL, e.what());
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw fa::Error(fa::ErrorCode::kInvalidArgument, what);
}

const fa::DetectionSet& image_at(const fa_detections* dets, size_t image) {
  require(dets != nullptr, "null detections handle");
  if (image >= dets->file.sets.size()) {
    throw fa::Error(fa::ErrorCode::kInvalidArgument,
                    "image index " + std::to_string(image) + " out of range");
  }
  return dets->file.sets[image];
}

fa::AlignConfig to_cpp(const fa_align_config& c) { return {c.threshold, c.weight, c.eps_overlap}; }

fa::RefineConfig to_cpp(const fa_refine_config& c) {
  fa::RefineConfig r;
  r.align = to_cpp(c.align);
  r.lambda_fid = c.lambda_fid;
  r.step_size = c.step_size;
  r.max_iters = c.max_iters;
  r.tol = c.tol;
  return r;
}

fa_box to_c(const fa::BBox& b) { return {b.class_id, b.x1, b.y1, b.x2, b.y2, b.confidence}; }

template <typename Map>
fa_detections* map_sets(const fa_detections* in, Map&& map) {
  auto out = std::make_unique<fa_detections>();
  out->file.class_names = in->file.class_names;
  for (const fa::DetectionSet& s : in->file.sets) out->file.sets.push_back(map(s));
  return out.release();
}

}  // namespace

extern "C" {

const char* fa_status_name(fa_status status) {
  switch (status) {
    case FA_OK: return "Ok";
    case FA_ERR_INTERNAL: return "Internal";
    default: break;
  }
  if (status >= FA_ERR_DEGENERATE_BOX && status <= FA_ERR_IO) {
    return fa::error_code_name(static_cast<fa::ErrorCode>(status)).data();
  }
  return "Unknown";
}

const char* fa_last_error(void) { return g_last_error.c_str(); }

const char* fa_version(void) { return "0.1.0"; }

fa_status fa_detections_create(fa_detections** out) {
  return guarded([&] {
    require(out != nullptr, "null output pointer");
    *out = new fa_detections{};
  });
}

void fa_detections_destroy(fa_detections* dets) { delete dets; }

fa_status fa_detections_clone(const fa_detections* dets, fa_detections** out) {
  return guarded([&] {
    require(dets && out, "null argument");
    *out = new fa_detections{*dets};
  });
}

fa_status fa_detections_read(const char* path, fa_detections** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new fa_detections{fa::read_detection_file(path)};
  });
}

fa_status fa_detections_write(const fa_detections* dets, const char* path) {
  return guarded([&] {
    require(dets && path, "null argument");
    fa::write_detection_file(path, dets->file.sets, dets->file.class_names);
  });
}

size_t fa_detections_image_count(const fa_detections* dets) {
  return dets ? dets->file.sets.size() : 0;
}

fa_status fa_detections_add_image(fa_detections* dets, const char* image_id, double canvas_w,
                                  double canvas_h, size_t* index_out) {
  return guarded([&] {
    require(dets && image_id, "null argument");
    const std::string id(image_id);
    require(!id.empty() && id.find_first_of(" \t\r\n") == std::string::npos,
            "image id must be non-empty without whitespace");
    require(canvas_w > 0.0 && canvas_h > 0.0 && std::isfinite(canvas_w) && std::isfinite(canvas_h),
            "canvas dimensions must be positive");
    for (const auto& s : dets->file.sets) {
      if (s.image_id == id) throw fa::Error(fa::ErrorCode::kInvalidArgument, "duplicate image id '" + id + "'");
    }
    dets->file.sets.push_back({id, canvas_w, canvas_h, {}});
    if (index_out) *index_out = dets->file.sets.size() - 1;
  });
}

fa_status fa_detections_add_box(fa_detections* dets, size_t image, const fa_box* box) {
  return guarded([&] {
    require(box != nullptr, "null box");
    image_at(dets, image);
    fa::DetectionSet& set = dets->file.sets[image];
    fa::DetectionSet probe{set.image_id, set.canvas_w, set.canvas_h,
                           {fa::validate_box(box->x1, box->y1, box->x2, box->y2, box->class_id,
                                             box->confidence)}};
    for (auto& w : fa::clamp_to_canvas(probe)) dets->file.warnings.push_back(std::move(w));
    set.boxes.push_back(probe.boxes.front());
  });
}

fa_status fa_detections_image_info(const fa_detections* dets, size_t image, const char** image_id,
                                   double* canvas_w, double* canvas_h, size_t* box_count) {
  return guarded([&] {
    const fa::DetectionSet& s = image_at(dets, image);
    if (image_id) *image_id = s.image_id.c_str();
    if (canvas_w) *canvas_w = s.canvas_w;
    if (canvas_h) *canvas_h = s.canvas_h;
    if (box_count) *box_count = s.boxes.size();
  });
}

fa_status fa_detections_get_box(const fa_detections* dets, size_t image, size_t box, fa_box* out) {
  return guarded([&] {
    const fa::DetectionSet& s = image_at(dets, image);
    require(out != nullptr, "null output pointer");
    require(box < s.boxes.size(), "box index out of range");
    *out = to_c(s.boxes[box]);
  });
}

fa_status fa_detections_find(const fa_detections* dets, const char* image_id, size_t* index_out) {
  return guarded([&] {
    require(dets && image_id && index_out, "null argument");
    for (size_t i = 0; i < dets->file.sets.size(); ++i) {
      if (dets->file.sets[i].image_id == image_id) {
        *index_out = i;
        return;
      }
    }
    throw fa::Error(fa::ErrorCode::kInputMissing, std::string("no image '") + image_id + "'");
  });
}

size_t fa_detections_warning_count(const fa_detections* dets) {
  return dets ? dets->file.warnings.size() : 0;
}

const char* fa_detections_warning(const fa_detections* dets, size_t index) {
  if (!dets || index >= dets->file.warnings.size()) return nullptr;
  return dets->file.warnings[index].c_str();
}

void fa_align_config_default(fa_align_config* cfg) {
  if (!cfg) return;
  const fa::AlignConfig d;
  *cfg = {d.threshold, d.weight, d.eps_overlap};
}

fa_status fa_alignment_loss(const fa_detections* dets, size_t image, const fa_align_config* cfg,
                            fa_loss_breakdown* out) {
  return guarded([&] {
    require(cfg && out, "null argument");
    const fa::AlignConfig ac = to_cpp(*cfg);
    const fa::LossBreakdown b = fa::alignment_loss(image_at(dets, image), ac);
    *out = {b.sum_x, b.sum_y, b.n_x, b.n_y, b.total, fa::weighted_loss(b, ac)};
  });
}

fa_status fa_alignment_subgradient(const fa_detections* dets, size_t image,
                                   const fa_align_config* cfg, double* grad, size_t grad_len) {
  return guarded([&] {
    require(cfg && grad, "null argument");
    const fa::DetectionSet& s = image_at(dets, image);
    require(grad_len >= 4 * s.boxes.size(), "gradient buffer too small");
    const auto g = fa::alignment_subgradient(s, to_cpp(*cfg));
    for (size_t i = 0; i < g.size(); ++i) {
      for (size_t k = 0; k < 4; ++k) grad[4 * i + k] = g[i][k];
    }
  });
}

void fa_refine_config_default(fa_refine_config* cfg) {
  if (!cfg) return;
  const fa::RefineConfig d;
  fa_align_config_default(&cfg->align);
  cfg->lambda_fid = d.lambda_fid;
  cfg->step_size = d.step_size;
  cfg->max_iters = static_cast<uint32_t>(d.max_iters);
  cfg->tol = d.tol;
}

fa_status fa_refine(const fa_detections* input, const fa_refine_config* cfg, fa_detections** out,
                    const char* trace_csv_path, fa_refine_summary* summary) {
  return guarded([&] {
    require(input && cfg && out, "null argument");
    const fa::RefineConfig rc = to_cpp(*cfg);
    fa::check_config(rc);
    std::ofstream trace;
    if (trace_csv_path) {
      trace.open(trace_csv_path);
      if (!trace) throw fa::Error(fa::ErrorCode::kIo, std::string("cannot write '") + trace_csv_path + "'");
      trace << "image_id,iteration,objective,alignment,max_update,accepted\n";
    }
    fa_refine_summary sum{};
    auto result = std::make_unique<fa_detections>();
    result->file.class_names = input->file.class_names;
    for (const fa::DetectionSet& s : input->file.sets) {
      fa::RefineResult r = fa::refine_detections(s, rc);
      ++sum.images;
      if (r.trace.status == fa::ErrorCode::kDegenerateInput) ++sum.skipped_empty;
      if (r.trace.converged) ++sum.converged;
      sum.total_iterations += r.trace.iterations;
      if (trace) {
        std::ostringstream body;
        fa::write_trace_csv(body, r.trace);
        std::istringstream lines(body.str());
        std::string line;
        std::getline(lines, line);  // header
        while (std::getline(lines, line)) trace << s.image_id << ',' << line << '\n';
      }
      result->file.sets.push_back(std::move(r.refined));
    }
    if (summary) *summary = sum;
    *out = result.release();
  });
}

fa_status fa_mask_rasterize(const fa_detections* dets, size_t image, int32_t class_id,
                            uint32_t width, uint32_t height, fa_mask** out) {
  return guarded([&] {
    require(out != nullptr, "null output pointer");
    *out = new fa_mask{fa::rasterize_class_mask(image_at(dets, image), class_id, width, height)};
  });
}

fa_status fa_mask_read_pgm(const char* path, fa_mask** out) {
  return guarded([&] {
    require(path && out, "null argument");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw fa::Error(fa::ErrorCode::kInputMissing, std::string("cannot open '") + path + "'");
    *out = new fa_mask{fa::read_pgm(in)};
  });
}

fa_status fa_mask_write_pgm(const fa_mask* mask, const char* path) {
  return guarded([&] {
    require(mask && path, "null argument");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw fa::Error(fa::ErrorCode::kIo, std::string("cannot write '") + path + "'");
    fa::write_pgm(f, mask->canvas);
  });
}

void fa_mask_destroy(fa_mask* mask) { delete mask; }

fa_status fa_mask_size(const fa_mask* mask, uint32_t* width, uint32_t* height) {
  return guarded([&] {
    require(mask != nullptr, "null mask");
    if (width) *width = static_cast<uint32_t>(mask->canvas.width());
    if (height) *height = static_cast<uint32_t>(mask->canvas.height());
  });
}

fa_status fa_rank_k_mse(const fa_mask* mask, uint32_t k, double* out) {
  return guarded([&] {
    require(mask && out, "null argument");
    *out = fa::rank_k_mse(mask->canvas, k);
  });
}

fa_status fa_regularity_score(const fa_mask* mask, uint32_t k_max, double* mse, size_t mse_cap,
                              size_t* k_used, double* score) {
  return guarded([&] {
    require(mask != nullptr, "null mask");
    const fa::RegularityCurve curve = fa::regularity_score(mask->canvas, k_max);
    if (k_used) *k_used = curve.k_used;
    if (score) *score = curve.score;
    if (mse) {
      require(mse_cap >= curve.mse.size(), "mse buffer smaller than k_used");
      std::copy(curve.mse.begin(), curve.mse.end(), mse);
    }
  });
}

fa_status fa_relative_regularity(const double* method, const double* baseline, size_t n,
                                 double* percent) {
  return guarded([&] {
    require(method && baseline && percent, "null argument");
    *percent = fa::relative_regularity({method, n}, {baseline, n});
  });
}

fa_status fa_confidence_filter(const fa_detections* dets, double threshold, fa_detections** out) {
  return guarded([&] {
    require(dets && out, "null argument");
    *out = map_sets(dets, [&](const fa::DetectionSet& s) { return fa::confidence_filter(s, threshold); });
  });
}

fa_status fa_nms(const fa_detections* dets, double iou_threshold, fa_detections** out) {
  return guarded([&] {
    require(dets && out, "null argument");
    *out = map_sets(dets, [&](const fa::DetectionSet& s) { return fa::nms(s, iou_threshold); });
  });
}

fa_status fa_evaluate(const fa_detections* preds, const fa_detections* gts, double iou_threshold,
                      fa_eval_report** out) {
  return guarded([&] {
    require(preds && gts && out, "null argument");
    auto r = std::make_unique<fa_eval_report>();
    r->report = fa::map50(preds->file.sets, gts->file.sets, iou_threshold);
    r->summary = fa::eval_summary(r->report);
    *out = r.release();
  });
}

void fa_eval_report_destroy(fa_eval_report* report) { delete report; }

double fa_eval_report_map(const fa_eval_report* report) {
  return report ? report->report.map : std::numeric_limits<double>::quiet_NaN();
}

size_t fa_eval_report_class_count(const fa_eval_report* report) {
  return report ? report->report.classes.size() : 0;
}

fa_status fa_eval_report_class(const fa_eval_report* report, size_t index, fa_class_result* out) {
  return guarded([&] {
    require(report && out, "null argument");
    require(index < report->report.classes.size(), "class index out of range");
    const fa::ClassResult& c = report->report.classes[index];
    *out = {c.class_id, c.ap.has_value() ? 1 : 0, c.ap.value_or(0.0), c.tp, c.fp, c.fn};
  });
}

const char* fa_eval_report_summary(const fa_eval_report* report) {
  return report ? report->summary.c_str() : "";
}

fa_status fa_eval_report_write_csv(const fa_eval_report* report, const char* path) {
  return guarded([&] {
    require(report && path, "null argument");
    std::ofstream f(path);
    if (!f) throw fa::Error(fa::ErrorCode::kIo, std::string("cannot write '") + path + "'");
    fa::write_eval_csv(f, report->report);
  });
}

void fa_grid_spec_default(fa_grid_spec* spec) {
  if (!spec) return;
  const fa::GridSpec d;
  *spec = {d.rows, d.cols, d.window_w, d.window_h, d.spacing_x, d.spacing_y, d.margin, d.class_id};
}

fa_status fa_synth_dataset(const fa_grid_spec* grid, const fa_noise_spec* noise, uint32_t count,
                           const char* prefix, fa_detections** ground_truth,
                           fa_detections** corrupted, const char* record_path) {
  return guarded([&] {
    require(grid && noise && ground_truth && corrupted, "null argument");
    fa::GridSpec g;
    g.rows = grid->rows;
    g.cols = grid->cols;
    g.window_w = grid->window_w;
    g.window_h = grid->window_h;
    g.spacing_x = grid->spacing_x;
    g.spacing_y = grid->spacing_y;
    g.margin = grid->margin;
    g.class_id = grid->class_id;
    if (prefix) g.image_id = prefix;
    const fa::NoiseSpec n{noise->jitter, noise->shear, noise->dropout, noise->size_noise, noise->seed};
    fa::SyntheticDataset data = fa::make_synthetic_dataset(g, n, count);
    if (record_path) {
      std::ofstream f(record_path);
      if (!f) throw fa::Error(fa::ErrorCode::kIo, std::string("cannot write '") + record_path + "'");
      for (size_t i = 0; i < data.records.size(); ++i) {
        fa::write_corruption_record(f, data.detections[i].image_id, data.records[i]);
      }
    }
    auto gt = std::make_unique<fa_detections>();
    auto det = std::make_unique<fa_detections>();
    gt->file.sets = std::move(data.ground_truth);
    det->file.sets = std::move(data.detections);
    *ground_truth = gt.release();
    *corrupted = det.release();
  });
}

fa_status fa_cmp_convert(const char* annotation_dir, const char* labels_path,
                         const char* sizes_path, const char* crops_path, fa_detections** out) {
  return guarded([&] {
    require(annotation_dir && labels_path && sizes_path && out, "null argument");
    auto open = [](const char* path) {
      std::ifstream f(path);
      if (!f) throw fa::Error(fa::ErrorCode::kInputMissing, std::string("cannot open '") + path + "'");
      return f;
    };
    auto labels_in = open(labels_path);
    auto sizes_in = open(sizes_path);
    const fa::ClassNames labels = fa::parse_label_table(labels_in);
    const auto sizes = fa::parse_size_table(sizes_in);
    auto result = std::make_unique<fa_detections>();
    result->file = fa::load_cmp_directory(annotation_dir, sizes, labels);
    if (crops_path) {
      auto crops_in = open(crops_path);
      std::vector<fa::DetectionSet> samples;
      for (fa::FacadeSample& s : fa::crop_dataset(result->file.sets, crops_in)) {
        for (size_t idx : s.clipped) {
          result->file.warnings.push_back("sample '" + s.sample_id + "' box " + std::to_string(idx) +
                                          " clipped to crop");
        }
        samples.push_back(std::move(s.annotations));
      }
      result->file.sets = std::move(samples);
    }
    *out = result.release();
  });
}

fa_status fa_split(const char* const* ids, size_t n, const double ratios[3], uint64_t seed,
                   uint8_t* assignment) {
  return guarded([&] {
    require((ids || n == 0) && ratios && (assignment || n == 0), "null argument");
    std::vector<std::string> names;
    names.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      require(ids[i] != nullptr, "null id");
      names.emplace_back(ids[i]);
    }
    const fa::DatasetSplit split = fa::split_dataset(names, {ratios[0], ratios[1], ratios[2]}, seed);
    std::map<std::string, uint8_t> part;
    for (const auto& id : split.train) part[id] = 0;
    for (const auto& id : split.val) part[id] = 1;
    for (const auto& id : split.test) part[id] = 2;
    for (size_t i = 0; i < n; ++i) assignment[i] = part.at(names[i]);
  });
}

void fa_sweep_config_default(fa_sweep_config* cfg) {
  if (!cfg) return;
  const fa::SweepConfig d;
  *cfg = fa_sweep_config{};
  fa_refine_config_default(&cfg->refine);
  cfg->class_id = d.class_id;
  cfg->mask_w = static_cast<uint32_t>(d.mask_w);
  cfg->mask_h = static_cast<uint32_t>(d.mask_h);
  cfg->k_max = static_cast<uint32_t>(d.k_max);
  cfg->confidence = d.confidence;
  cfg->nms_iou = d.nms_iou;
  cfg->match_iou = d.match_iou;
}

fa_status fa_sweep(const fa_sweep_config* cfg, fa_sweep_result** out) {
  return guarded([&] {
    require(cfg && out && cfg->detections, "null argument");
    require((cfg->weights || cfg->weight_count == 0) && (cfg->thresholds || cfg->threshold_count == 0),
            "null value list");
    fa::SweepConfig sc;
    sc.weights.assign(cfg->weights, cfg->weights + cfg->weight_count);
    sc.thresholds.assign(cfg->thresholds, cfg->thresholds + cfg->threshold_count);
    sc.refine = to_cpp(cfg->refine);
    sc.detections = cfg->detections->file.sets;
    if (cfg->ground_truth) sc.ground_truth = cfg->ground_truth->file.sets;
    sc.class_id = cfg->class_id;
    sc.mask_w = cfg->mask_w;
    sc.mask_h = cfg->mask_h;
    sc.k_max = cfg->k_max;
    sc.confidence = cfg->confidence;
    sc.nms_iou = cfg->nms_iou;
    sc.match_iou = cfg->match_iou;
    if (cfg->output_dir) sc.output_dir = cfg->output_dir;
    sc.seed = cfg->seed;
    sc.threads = cfg->threads;
    *out = new fa_sweep_result{fa::run_sweep(sc)};
  });
}

void fa_sweep_result_destroy(fa_sweep_result* result) { delete result; }

size_t fa_sweep_result_row_count(const fa_sweep_result* result) {
  return result ? result->rows.size() : 0;
}

fa_status fa_sweep_result_row(const fa_sweep_result* result, size_t index, fa_sweep_row* out) {
  return guarded([&] {
    require(result && out, "null argument");
    require(index < result->rows.size(), "row index out of range");
    const fa::SweepRow& r = result->rows[index];
    *out = {r.weight, r.threshold, r.relative_regularity, r.map50, r.align_before, r.align_after,
            r.seconds, r.images, r.status.c_str()};
  });
}

}  // extern "C"
