// facadealign command-line front end. Every subcommand is a thin wrapper
// over the C interface in facadealign/facadealign.h.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "facadealign/facadealign.h"

namespace {

struct Failure {
  fa_status status;
  std::string message;
};

void check(fa_status s) {
  if (s != FA_OK) throw Failure{s, fa_last_error()};
}

struct DetsDeleter {
  void operator()(fa_detections* d) const { fa_detections_destroy(d); }
};
struct MaskDeleter {
  void operator()(fa_mask* m) const { fa_mask_destroy(m); }
};
struct ReportDeleter {
  void operator()(fa_eval_report* r) const { fa_eval_report_destroy(r); }
};
struct SweepDeleter {
  void operator()(fa_sweep_result* r) const { fa_sweep_result_destroy(r); }
};
using Dets = std::unique_ptr<fa_detections, DetsDeleter>;
using Mask = std::unique_ptr<fa_mask, MaskDeleter>;
using Report = std::unique_ptr<fa_eval_report, ReportDeleter>;
using SweepResult = std::unique_ptr<fa_sweep_result, SweepDeleter>;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

Dets read_dets(const std::string& path) {
  fa_detections* d = nullptr;
  check(fa_detections_read(path.c_str(), &d));
  Dets out(d);
  for (size_t i = 0; i < fa_detections_warning_count(d); ++i) {
    std::cerr << "warning: " << fa_detections_warning(d, i) << '\n';
  }
  return out;
}

std::string image_id(const fa_detections* d, size_t i) {
  const char* id = nullptr;
  check(fa_detections_image_info(d, i, &id, nullptr, nullptr, nullptr));
  return id;
}

// Indices of the images to process: all of them, or just --image.
std::vector<size_t> selected_images(const fa_detections* d, const std::string& only) {
  std::vector<size_t> out;
  if (!only.empty()) {
    size_t idx = 0;
    check(fa_detections_find(d, only.c_str(), &idx));
    out.push_back(idx);
  } else {
    for (size_t i = 0; i < fa_detections_image_count(d); ++i) out.push_back(i);
  }
  return out;
}

struct AlignFlags {
  fa_align_config cfg{};
  AlignFlags() { fa_align_config_default(&cfg); }
  void add(CLI::App* app) {
    app->add_option("--T", cfg.threshold, "edge threshold T in pixels")->check(CLI::PositiveNumber);
    app->add_option("--W", cfg.weight, "alignment weight W")->check(CLI::NonNegativeNumber);
    app->add_option("--eps-overlap", cfg.eps_overlap, "largest IoU treated as non-overlapping")
        ->check(CLI::Range(0.0, 1.0));
  }
};

struct RefineFlags {
  fa_refine_config cfg{};
  RefineFlags() { fa_refine_config_default(&cfg); }
  void add(CLI::App* app, bool with_align) {
    if (with_align) {
      app->add_option("--T", cfg.align.threshold, "edge threshold T in pixels")
          ->check(CLI::PositiveNumber);
      app->add_option("--W", cfg.align.weight, "alignment weight W")->check(CLI::NonNegativeNumber);
    }
    app->add_option("--eps-overlap", cfg.align.eps_overlap)->check(CLI::Range(0.0, 1.0));
    app->add_option("--lambda", cfg.lambda_fid, "fidelity weight")->check(CLI::NonNegativeNumber);
    app->add_option("--step", cfg.step_size, "initial step size in pixels")
        ->check(CLI::PositiveNumber);
    app->add_option("--max-iters", cfg.max_iters)->check(CLI::PositiveNumber);
    app->add_option("--tol", cfg.tol, "stopping tolerance in pixels")->check(CLI::PositiveNumber);
  }
};

void write_lines(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Failure{FA_ERR_IO, "cannot write '" + path + "'"};
  f << text;
}

// ---- subcommands --------------------------------------------------------

void cmd_loss(const std::string& in, const fa_align_config& cfg, const std::string& only) {
  Dets d = read_dets(in);
  for (size_t i : selected_images(d.get(), only)) {
    fa_loss_breakdown b{};
    check(fa_alignment_loss(d.get(), i, &cfg, &b));
    std::cout << "image=" << image_id(d.get(), i) << " sum_x=" << num(b.sum_x)
              << " sum_y=" << num(b.sum_y) << " n_x=" << b.n_x << " n_y=" << b.n_y
              << " total=" << num(b.total) << " weighted=" << num(b.weighted) << '\n';
  }
}

void cmd_refine(const std::string& in, const std::string& out, const std::string& trace,
                const fa_refine_config& cfg) {
  Dets d = read_dets(in);
  fa_detections* refined = nullptr;
  fa_refine_summary sum{};
  check(fa_refine(d.get(), &cfg, &refined, trace.empty() ? nullptr : trace.c_str(), &sum));
  Dets r(refined);
  check(fa_detections_write(r.get(), out.c_str()));
  std::cout << "images=" << sum.images << " converged=" << sum.converged
            << " skipped_empty=" << sum.skipped_empty << " iterations=" << sum.total_iterations
            << '\n';
}

struct SvdFlags {
  std::string in, mask_path, baseline, only, curve, pgm;
  int32_t class_id = 0;
  uint32_t width = 256, height = 256, k_max = 25;
};

double score_mask(const fa_mask* m, uint32_t k_max, std::vector<double>* curve) {
  size_t k_used = 0;
  double score = 0.0;
  check(fa_regularity_score(m, k_max, nullptr, 0, &k_used, &score));
  if (curve) {
    curve->assign(k_used, 0.0);
    check(fa_regularity_score(m, k_max, curve->data(), curve->size(), &k_used, &score));
  }
  return score;
}

void cmd_svd(const SvdFlags& f) {
  std::string curve_csv = "image_id,k,mse\n";
  std::vector<double> curve;
  auto emit_curve = [&](const std::string& id) {
    for (size_t k = 0; k < curve.size(); ++k) {
      curve_csv += id + ',' + std::to_string(k + 1) + ',' + num(curve[k]) + '\n';
    }
  };

  if (!f.mask_path.empty()) {
    fa_mask* raw = nullptr;
    check(fa_mask_read_pgm(f.mask_path.c_str(), &raw));
    Mask m(raw);
    const double s = score_mask(m.get(), f.k_max, &curve);
    std::cout << "mask=" << f.mask_path << " score=" << num(s) << " k_used=" << curve.size() << '\n';
    emit_curve(f.mask_path);
  } else {
    Dets d = read_dets(f.in);
    Dets base;
    if (!f.baseline.empty()) base = read_dets(f.baseline);
    std::vector<double> method_scores, base_scores;
    const auto images = selected_images(d.get(), f.only);
    for (size_t i : images) {
      const std::string id = image_id(d.get(), i);
      fa_mask* raw = nullptr;
      check(fa_mask_rasterize(d.get(), i, f.class_id, f.width, f.height, &raw));
      Mask m(raw);
      if (!f.pgm.empty() && images.size() == 1) check(fa_mask_write_pgm(m.get(), f.pgm.c_str()));
      const double s = score_mask(m.get(), f.k_max, &curve);
      emit_curve(id);
      method_scores.push_back(s);
      std::cout << "image=" << id << " score=" << num(s) << " k_used=" << curve.size() << '\n';
      if (base) {
        size_t bi = 0;
        check(fa_detections_find(base.get(), id.c_str(), &bi));
        fa_mask* braw = nullptr;
        check(fa_mask_rasterize(base.get(), bi, f.class_id, f.width, f.height, &braw));
        Mask bm(braw);
        base_scores.push_back(score_mask(bm.get(), f.k_max, nullptr));
      }
    }
    if (!f.pgm.empty() && images.size() != 1) {
      throw Failure{FA_ERR_INVALID_ARGUMENT, "--pgm needs a single image (use --image)"};
    }
    if (base) {
      double rel = 0.0;
      check(fa_relative_regularity(method_scores.data(), base_scores.data(), method_scores.size(),
                                   &rel));
      std::cout << "relative_regularity=" << num(rel) << '\n';
    }
  }
  if (!f.curve.empty()) write_lines(f.curve, curve_csv);
}

struct EvalFlags {
  std::string pred, gt, csv;
  double conf = 0.25, nms_iou = 0.7, match_iou = 0.5;
  bool no_nms = false;
};

void cmd_eval(const EvalFlags& f) {
  Dets preds = read_dets(f.pred);
  Dets gts = read_dets(f.gt);
  fa_detections* raw = nullptr;
  check(fa_confidence_filter(preds.get(), f.conf, &raw));
  Dets filtered(raw);
  if (!f.no_nms) {
    check(fa_nms(filtered.get(), f.nms_iou, &raw));
    filtered.reset(raw);
  }
  fa_eval_report* rep = nullptr;
  check(fa_evaluate(filtered.get(), gts.get(), f.match_iou, &rep));
  Report r(rep);
  if (!f.csv.empty()) check(fa_eval_report_write_csv(r.get(), f.csv.c_str()));
  std::cout << fa_eval_report_summary(r.get()) << '\n';
}

struct SynthFlags {
  fa_grid_spec grid{};
  fa_noise_spec noise{};
  uint32_t count = 1;
  std::string prefix = "grid";
  SynthFlags() { fa_grid_spec_default(&grid); }
  void add(CLI::App* app) {
    app->add_option("--rows", grid.rows)->check(CLI::PositiveNumber);
    app->add_option("--cols", grid.cols)->check(CLI::PositiveNumber);
    app->add_option("--window-w", grid.window_w)->check(CLI::PositiveNumber);
    app->add_option("--window-h", grid.window_h)->check(CLI::PositiveNumber);
    app->add_option("--spacing-x", grid.spacing_x)->check(CLI::NonNegativeNumber);
    app->add_option("--spacing-y", grid.spacing_y)->check(CLI::NonNegativeNumber);
    app->add_option("--margin", grid.margin)->check(CLI::NonNegativeNumber);
    app->add_option("--class", grid.class_id)->check(CLI::NonNegativeNumber);
    app->add_option("--jitter", noise.jitter, "uniform jitter half-width, pixels")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--shear", noise.shear, "horizontal drift per row, pixels");
    app->add_option("--dropout", noise.dropout)->check(CLI::Range(0.0, 1.0));
    app->add_option("--size-noise", noise.size_noise)->check(CLI::NonNegativeNumber);
    app->add_option("--seed", noise.seed);
    app->add_option("--count", count, "number of images")->check(CLI::PositiveNumber);
    app->add_option("--prefix", prefix, "image id prefix");
  }
  std::pair<Dets, Dets> make(const std::string& record) const {
    fa_detections* gt = nullptr;
    fa_detections* det = nullptr;
    check(fa_synth_dataset(&grid, &noise, count, prefix.c_str(), &gt, &det,
                           record.empty() ? nullptr : record.c_str()));
    return {Dets(gt), Dets(det)};
  }
};

void cmd_synth(const SynthFlags& f, const std::string& gt_out, const std::string& out,
               const std::string& record) {
  auto [gt, det] = f.make(record);
  check(fa_detections_write(gt.get(), gt_out.c_str()));
  check(fa_detections_write(det.get(), out.c_str()));
  std::cout << "images=" << fa_detections_image_count(det.get()) << '\n';
}

void cmd_convert(const std::string& dir, const std::string& labels, const std::string& sizes,
                 const std::string& crops, const std::string& out) {
  fa_detections* raw = nullptr;
  check(fa_cmp_convert(dir.c_str(), labels.c_str(), sizes.c_str(),
                       crops.empty() ? nullptr : crops.c_str(), &raw));
  Dets d(raw);
  for (size_t i = 0; i < fa_detections_warning_count(d.get()); ++i) {
    std::cerr << "warning: " << fa_detections_warning(d.get(), i) << '\n';
  }
  check(fa_detections_write(d.get(), out.c_str()));
  size_t boxes = 0;
  for (size_t i = 0; i < fa_detections_image_count(d.get()); ++i) {
    size_t n = 0;
    check(fa_detections_image_info(d.get(), i, nullptr, nullptr, nullptr, &n));
    boxes += n;
  }
  std::cout << "images=" << fa_detections_image_count(d.get()) << " boxes=" << boxes << '\n';
}

void cmd_split(const std::string& in, const std::string& ids_path, std::vector<double> ratios,
               uint64_t seed, const std::string& out) {
  std::vector<std::string> ids;
  if (!in.empty()) {
    Dets d = read_dets(in);
    for (size_t i = 0; i < fa_detections_image_count(d.get()); ++i) ids.push_back(image_id(d.get(), i));
  } else {
    std::ifstream f(ids_path);
    if (!f) throw Failure{FA_ERR_INPUT_MISSING, "cannot open '" + ids_path + "'"};
    std::string line;
    while (std::getline(f, line)) {
      const auto b = line.find_first_not_of(" \t\r");
      if (b == std::string::npos || line[b] == '#') continue;
      const auto e = line.find_last_not_of(" \t\r");
      ids.push_back(line.substr(b, e - b + 1));
    }
  }
  std::vector<const char*> ptrs;
  for (const auto& id : ids) ptrs.push_back(id.c_str());
  std::vector<uint8_t> part(ids.size());
  check(fa_split(ptrs.data(), ptrs.size(), ratios.data(), seed, part.data()));

  static const char* kNames[] = {"train", "val", "test"};
  std::string text;
  size_t counts[3] = {0, 0, 0};
  for (uint8_t p = 0; p < 3; ++p) {
    for (size_t i = 0; i < ids.size(); ++i) {
      if (part[i] != p) continue;
      text += std::string(kNames[p]) + ' ' + ids[i] + '\n';
      ++counts[p];
    }
  }
  if (out.empty()) {
    std::cout << text;
  } else {
    write_lines(out, text);
  }
  std::cerr << "train=" << counts[0] << " val=" << counts[1] << " test=" << counts[2] << '\n';
}

struct SweepFlags {
  std::vector<double> weights{0.0, 0.1, 0.5, 1.0};
  std::vector<double> thresholds{9.0};
  std::string dets, gt, out_dir;
  bool synthetic = false;
  SynthFlags synth;
  RefineFlags refine;
  uint32_t mask_w = 256, mask_h = 256, k_max = 25, threads = 0;
  double conf = 0.25, nms_iou = 0.7, match_iou = 0.5;
  uint64_t seed = 0;
};

void cmd_sweep(const SweepFlags& f) {
  Dets det, gt;
  if (f.synthetic) {
    auto pair = f.synth.make("");
    gt = std::move(pair.first);
    det = std::move(pair.second);
  } else {
    if (f.dets.empty()) throw Failure{FA_ERR_INPUT_MISSING, "--dets or --synthetic is required"};
    det = read_dets(f.dets);
    if (!f.gt.empty()) gt = read_dets(f.gt);
  }
  fa_sweep_config cfg{};
  fa_sweep_config_default(&cfg);
  cfg.weights = f.weights.data();
  cfg.weight_count = f.weights.size();
  cfg.thresholds = f.thresholds.data();
  cfg.threshold_count = f.thresholds.size();
  cfg.refine = f.refine.cfg;
  cfg.detections = det.get();
  cfg.ground_truth = gt.get();
  cfg.class_id = f.synth.grid.class_id;  // --class: generated and scored class
  cfg.mask_w = f.mask_w;
  cfg.mask_h = f.mask_h;
  cfg.k_max = f.k_max;
  cfg.confidence = f.conf;
  cfg.nms_iou = f.nms_iou;
  cfg.match_iou = f.match_iou;
  cfg.output_dir = f.out_dir.c_str();
  cfg.seed = f.seed;
  cfg.threads = f.threads;
  fa_sweep_result* raw = nullptr;
  check(fa_sweep(&cfg, &raw));
  SweepResult r(raw);
  for (size_t i = 0; i < fa_sweep_result_row_count(r.get()); ++i) {
    fa_sweep_row row{};
    check(fa_sweep_result_row(r.get(), i, &row));
    std::cout << "W=" << num(row.weight) << " T=" << num(row.threshold)
              << " relative_regularity=" << num(row.relative_regularity)
              << " mAP50=" << num(row.map50) << " align_before=" << num(row.align_before)
              << " align_after=" << num(row.align_after) << " status=" << row.status << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grid-consistency alignment tools for facade detections"};
  app.set_version_flag("--version", std::string(fa_version()));
  app.require_subcommand(1);

  // loss
  auto* loss = app.add_subcommand("loss", "alignment loss breakdown per image");
  std::string loss_in, loss_image;
  AlignFlags loss_align;
  loss->add_option("--in", loss_in, "detection file")->required();
  loss->add_option("--image", loss_image, "only this image id");
  loss_align.add(loss);

  // refine
  auto* refine = app.add_subcommand("refine", "refine detections under the alignment objective");
  std::string refine_in, refine_out, refine_trace;
  RefineFlags refine_flags;
  refine->add_option("--in", refine_in)->required();
  refine->add_option("--out", refine_out)->required();
  refine->add_option("--trace", refine_trace, "per-iteration trace CSV");
  refine_flags.add(refine, true);

  // svd-metric
  auto* svd = app.add_subcommand("svd-metric", "SVD regularity score of class masks");
  SvdFlags svd_flags;
  auto* svd_in = svd->add_option("--in", svd_flags.in, "detection file");
  auto* svd_mask = svd->add_option("--mask", svd_flags.mask_path, "binary PGM mask");
  svd_in->excludes(svd_mask);
  svd->add_option("--baseline", svd_flags.baseline, "baseline detections for relative score")
      ->needs(svd_in);
  svd->add_option("--image", svd_flags.only)->needs(svd_in);
  svd->add_option("--class", svd_flags.class_id);
  svd->add_option("--width", svd_flags.width)->check(CLI::PositiveNumber);
  svd->add_option("--height", svd_flags.height)->check(CLI::PositiveNumber);
  svd->add_option("--k-max", svd_flags.k_max)->check(CLI::PositiveNumber);
  svd->add_option("--curve", svd_flags.curve, "per-k MSE CSV");
  svd->add_option("--pgm", svd_flags.pgm, "write the rasterized mask")->needs(svd_in);

  // eval
  auto* eval = app.add_subcommand("eval", "confidence filter, NMS and mAP@0.5");
  EvalFlags eval_flags;
  eval->add_option("--pred", eval_flags.pred)->required();
  eval->add_option("--gt", eval_flags.gt)->required();
  eval->add_option("--conf", eval_flags.conf, "confidence floor")->check(CLI::Range(0.0, 1.0));
  eval->add_option("--nms-iou", eval_flags.nms_iou)->check(CLI::Range(0.0, 1.0));
  eval->add_option("--iou", eval_flags.match_iou, "match IoU")->check(CLI::Range(0.0, 1.0));
  eval->add_flag("--no-nms", eval_flags.no_nms);
  eval->add_option("--csv", eval_flags.csv, "per-class CSV");

  // synth
  auto* synth = app.add_subcommand("synth", "synthetic facade grids with seeded corruption");
  SynthFlags synth_flags;
  std::string synth_gt, synth_out, synth_record;
  synth_flags.add(synth);
  synth->add_option("--gt-out", synth_gt, "ground truth file")->required();
  synth->add_option("--out", synth_out, "corrupted detections file")->required();
  synth->add_option("--record", synth_record, "corruption record");

  // convert-cmp
  auto* convert = app.add_subcommand("convert-cmp", "convert CMP XML annotations");
  std::string cmp_dir, cmp_labels, cmp_sizes, cmp_crops, cmp_out;
  convert->add_option("--dir", cmp_dir)->required();
  convert->add_option("--labels", cmp_labels)->required();
  convert->add_option("--sizes", cmp_sizes)->required();
  convert->add_option("--crops", cmp_crops, "facade crop table");
  convert->add_option("--out", cmp_out)->required();

  // split
  auto* split = app.add_subcommand("split", "seeded train/val/test split");
  std::string split_in, split_ids, split_out;
  std::vector<double> split_ratios{0.8, 0.1, 0.1};
  uint64_t split_seed = 0;
  auto* split_in_opt = split->add_option("--in", split_in, "detection file");
  auto* split_ids_opt = split->add_option("--ids", split_ids, "one id per line");
  split_in_opt->excludes(split_ids_opt);
  split->add_option("--ratios", split_ratios)->delimiter(',')->expected(3);
  split->add_option("--seed", split_seed);
  split->add_option("--out", split_out);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "W x T sweep with CSV and SVG reports");
  SweepFlags sweep_flags;
  sweep->add_option("--W", sweep_flags.weights)->delimiter(',');
  sweep->add_option("--T", sweep_flags.thresholds)->delimiter(',');
  auto* sweep_dets = sweep->add_option("--dets", sweep_flags.dets);
  sweep->add_option("--gt", sweep_flags.gt)->needs(sweep_dets);
  auto* sweep_synth = sweep->add_flag("--synthetic", sweep_flags.synthetic);
  sweep_synth->excludes(sweep_dets);
  sweep->add_option("--out-dir", sweep_flags.out_dir)->required();
  sweep->add_option("--mask-w", sweep_flags.mask_w)->check(CLI::PositiveNumber);
  sweep->add_option("--mask-h", sweep_flags.mask_h)->check(CLI::PositiveNumber);
  sweep->add_option("--k-max", sweep_flags.k_max)->check(CLI::PositiveNumber);
  sweep->add_option("--conf", sweep_flags.conf)->check(CLI::Range(0.0, 1.0));
  sweep->add_option("--nms-iou", sweep_flags.nms_iou)->check(CLI::Range(0.0, 1.0));
  sweep->add_option("--iou", sweep_flags.match_iou)->check(CLI::Range(0.0, 1.0));
  sweep->add_option("--threads", sweep_flags.threads);
  sweep->add_option("--sweep-seed", sweep_flags.seed, "master seed for the sweep");
  sweep_flags.refine.add(sweep, false);
  sweep_flags.synth.add(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: Usage: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*loss) {
      cmd_loss(loss_in, loss_align.cfg, loss_image);
    } else if (*refine) {
      cmd_refine(refine_in, refine_out, refine_trace, refine_flags.cfg);
    } else if (*svd) {
      if (svd_flags.in.empty() && svd_flags.mask_path.empty()) {
        std::cerr << "error: Usage: svd-metric needs --in or --mask\n";
        return 2;
      }
      cmd_svd(svd_flags);
    } else if (*eval) {
      cmd_eval(eval_flags);
    } else if (*synth) {
      cmd_synth(synth_flags, synth_gt, synth_out, synth_record);
    } else if (*convert) {
      cmd_convert(cmp_dir, cmp_labels, cmp_sizes, cmp_crops, cmp_out);
    } else if (*split) {
      if (split_in.empty() && split_ids.empty()) {
        std::cerr << "error: Usage: split needs --in or --ids\n";
        return 2;
      }
      cmd_split(split_in, split_ids, split_ratios, split_seed, split_out);
    } else if (*sweep) {
      if (!sweep_flags.synthetic && sweep_flags.dets.empty()) {
        std::cerr << "error: Usage: sweep needs --dets or --synthetic\n";
        return 2;
      }
      cmd_sweep(sweep_flags);
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << fa_status_name(f.status) << ": " << f.message << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
