// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--expect-fail 4,...]
//
// Exit status is 0 when every criterion passes, or fails only where listed
// with --expect-fail. Listed criteria still print FAIL.
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
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
#include "support.hpp"

namespace fa = facadealign;
namespace fs = std::filesystem;
using fa_test::box;
using fa_test::make_set;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

// Collects failed checks; the first few messages end up in the detail line.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) notes_ += (notes_.empty() ? "" : "; ") + what;
  }
  bool ok() const { return failures_ == 0; }
  std::string notes() const {
    if (failures_ <= 3) return notes_;
    return notes_ + "; +" + std::to_string(failures_ - 3) + " more";
  }

 private:
  int failures_ = 0;
  std::string notes_;
};

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Verdict finish(const Checks& c, std::string detail) {
  if (!c.ok()) detail += " | " + c.notes();
  return {c.ok(), detail};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1 --------------------------------------------------------------------

Verdict loss_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<std::size_t> n_boxes(0, 50);
  std::uniform_int_distribution<int> n_classes(1, 3);
  std::uniform_real_distribution<double> threshold(1.0, 20.0);
  Checks c;
  double worst = 0.0;
  std::size_t pairs = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto s = fa_test::random_set(rng, n_boxes(rng), n_classes(rng));
    const double T = threshold(rng);
    const auto got = fa::alignment_loss(s, fa::AlignConfig{T, 0.5, 1e-9});
    const auto want = fa_test::brute_force_loss(s, T);
    const double diff = std::fabs(got.total - want.total());
    worst = std::max(worst, diff);
    pairs += want.n_x + want.n_y;
    c.expect(got.n_x == want.n_x && got.n_y == want.n_y, "pair count mismatch in set " + std::to_string(t));
    c.expect(diff <= 1e-12, "set " + std::to_string(t) + " differs by " + num(diff));
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 10.0, "took " + num(secs) + " s");
  return finish(c, "1000 sets, " + std::to_string(pairs) + " candidate pairs, max |diff| " + num(worst) +
                       " (tol 1e-12), " + num(secs) + " s (limit 10 s)");
}

// ---- 2 --------------------------------------------------------------------

Verdict gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2002);
  std::uniform_real_distribution<double> threshold(4.0, 16.0);
  std::uniform_int_distribution<int> rows(2, 3), cols(3, 6), classes(1, 2);
  std::uniform_real_distribution<double> jitter(1.0, 4.0);
  Checks c;
  double worst = 0.0;
  int configs = 0;
  int skipped = 0;
  std::size_t coords = 0;
  while (configs < 200) {
    const double T = threshold(rng);
    const auto s = fa_test::jittered_lattice(rng, rows(rng), cols(rng), jitter(rng), classes(rng));
    if (fa_test::kink_margin(s, T) < 0.1) {
      ++skipped;
      continue;
    }
    ++configs;
    const fa::AlignConfig cfg{T, 0.5, 1e-9};
    const auto g = fa::alignment_subgradient(s, cfg);
    const auto fd = fa_test::finite_difference(s, cfg, 1e-3);
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (int k = 0; k < 4; ++k) {
        const double scale = std::max({std::fabs(g[i][k]), std::fabs(fd[i][k]), 1e-12});
        const double rel = std::fabs(g[i][k] - fd[i][k]) / scale;
        worst = std::max(worst, rel);
        ++coords;
        c.expect(rel < 1e-4, "config " + std::to_string(configs) + " box " + std::to_string(i) +
                                 " rel err " + num(rel));
      }
    }
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 30.0, "took " + num(secs) + " s");
  return finish(c, "200 configs (" + std::to_string(skipped) + " near kinks redrawn), " +
                       std::to_string(coords) + " coordinates, max rel err " + num(worst) +
                       " (tol 1e-4), " + num(secs) + " s (limit 30 s)");
}

// ---- 3 --------------------------------------------------------------------

Verdict grid_fixed_point() {
  std::vector<fa::GridSpec> grids(3);
  grids[1].rows = 3;
  grids[1].cols = 12;
  grids[1].window_w = 14;
  grids[1].spacing_x = 9;
  grids[2].rows = 7;
  grids[2].cols = 4;
  grids[2].window_h = 44;
  grids[2].spacing_y = 13;
  Checks c;
  double worst_loss = 0.0;
  double worst_grad = 0.0;
  double worst_move = 0.0;
  for (const auto& spec : grids) {
    const auto grid = fa::generate_grid(spec);
    for (double T : {6.0, 7.0, 9.0, 10.0, 12.0}) {
      fa::RefineConfig rc;
      rc.align = {T, 0.5, 1e-9};
      const double loss = fa::alignment_loss(grid, rc.align).total;
      double grad = 0.0;
      for (const auto& g : fa::alignment_subgradient(grid, rc.align)) {
        for (double v : g) grad = std::max(grad, std::fabs(v));
      }
      const auto refined = fa::refine_detections(grid, rc).refined;
      double move = 0.0;
      for (std::size_t i = 0; i < grid.boxes.size(); ++i) {
        const auto& a = grid.boxes[i];
        const auto& b = refined.boxes[i];
        move = std::max({move, std::fabs(a.x1 - b.x1), std::fabs(a.y1 - b.y1), std::fabs(a.x2 - b.x2),
                         std::fabs(a.y2 - b.y2)});
      }
      worst_loss = std::max(worst_loss, std::fabs(loss));
      worst_grad = std::max(worst_grad, grad);
      worst_move = std::max(worst_move, move);
      const std::string where = "T=" + num(T) + " grid " + std::to_string(spec.rows) + "x" +
                                std::to_string(spec.cols);
      c.expect(loss == 0.0, where + " loss " + num(loss));
      c.expect(grad == 0.0, where + " subgradient " + num(grad));
      c.expect(move < 1e-9, where + " moved " + num(move));
    }
  }
  return finish(c, "3 grids x T in {6,7,9,10,12}: max loss " + num(worst_loss) + ", max |grad| " +
                       num(worst_grad) + ", max move " + num(worst_move) + " (tol 1e-9)");
}

// ---- 4 --------------------------------------------------------------------

// Once every lattice line is aligned the alignment term is 0 and the
// fidelity term is minimized by any point of the median interval of the
// jittered coordinates on that line. Returns the smallest edge error such a
// minimizer can reach, taking the interval point nearest the true line.
double median_bound(const fa::DetectionSet& jittered, const fa::CorruptionRecord& record) {
  std::map<std::pair<int, double>, std::vector<double>> lines;
  for (const auto& e : record.entries) {
    if (!e.corrupted) continue;
    const auto& j = jittered.boxes[*e.corrupted];
    lines[{0, e.before.x1}].push_back(j.x1);
    lines[{1, e.before.y1}].push_back(j.y1);
    lines[{2, e.before.x2}].push_back(j.x2);
    lines[{3, e.before.y2}].push_back(j.y2);
  }
  double worst = 0.0;
  for (auto& [key, v] : lines) {
    std::sort(v.begin(), v.end());
    const double lo = v[(v.size() - 1) / 2];
    const double hi = v[v.size() / 2];
    worst = std::max(worst, std::fabs(std::clamp(key.second, lo, hi) - key.second));
  }
  return worst;
}

Verdict refinement_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  fa::GridSpec grid;  // 5 x 8
  fa::NoiseSpec noise;
  noise.jitter = 3.0;
  noise.seed = 4004;
  const auto data = fa::make_synthetic_dataset(grid, noise, 20);
  fa::RefineConfig rc;
  rc.align = {9.0, 0.5, 1e-9};

  Checks c;
  double worst_loss = 0.0;
  double worst_edge = 0.0;
  double worst_bound = 0.0;
  std::size_t edges_off = 0;
  std::vector<double> before_scores;
  std::vector<double> after_scores;
  for (std::size_t img = 0; img < data.detections.size(); ++img) {
    const auto& jittered = data.detections[img];
    worst_bound = std::max(worst_bound, median_bound(jittered, data.records[img]));
    const auto result = fa::refine_detections(jittered, rc);
    const double loss = fa::alignment_loss(result.refined, rc.align).total;
    worst_loss = std::max(worst_loss, loss);
    c.expect(loss < 1e-2, "image " + std::to_string(img) + " alignment " + num(loss));
    for (const auto& e : data.records[img].entries) {
      if (!e.corrupted) continue;
      const auto& r = result.refined.boxes[*e.corrupted];
      const auto& truth = e.before;
      for (double d : {r.x1 - truth.x1, r.y1 - truth.y1, r.x2 - truth.x2, r.y2 - truth.y2}) {
        worst_edge = std::max(worst_edge, std::fabs(d));
        edges_off += std::fabs(d) > 1.0;
      }
    }
    before_scores.push_back(fa::regularity_score(fa::rasterize_class_mask(jittered, grid.class_id)).score);
    after_scores.push_back(
        fa::regularity_score(fa::rasterize_class_mask(result.refined, grid.class_id)).score);
  }
  c.expect(edges_off == 0, std::to_string(edges_off) + " of " + std::to_string(20 * 40 * 4) +
                               " edges more than 1 px from their lattice line");
  const double rel = fa::relative_regularity(after_scores, before_scores);
  c.expect(rel <= 50.0, "relative regularity " + num(rel) + "%");
  const double secs = seconds_since(t0);
  c.expect(secs < 10.0, "took " + num(secs) + " s");
  return finish(c, "20 grids, jitter 3, T=9 W=0.5: max alignment " + num(worst_loss) +
                       " (tol 1e-2), max edge error " + num(worst_edge) + " px (tol 1; line-median optimum " + num(worst_bound) +
                       " px), regularity " +
                       num(rel) + "% (limit 50%), " + num(secs) + " s (limit 10 s)");
}

// ---- 5 --------------------------------------------------------------------

double eigen_mse(const fa::MaskCanvas& m, std::size_t k) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(m.height()), static_cast<Eigen::Index>(m.width()));
  for (std::size_t y = 0; y < m.height(); ++y) {
    for (std::size_t x = 0; x < m.width(); ++x) {
      a(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)) = m.at(x, y);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto kk = static_cast<Eigen::Index>(k);
  const Eigen::MatrixXd rec = svd.matrixU().leftCols(kk) * svd.singularValues().head(kk).asDiagonal() *
                              svd.matrixV().leftCols(kk).transpose();
  return (a - rec).squaredNorm() / static_cast<double>(a.size());
}

fa::MaskCanvas random_mask(std::mt19937_64& rng, std::size_t w, std::size_t h) {
  std::uniform_real_distribution<double> density(0.05, 0.6);
  std::bernoulli_distribution on(density(rng));
  fa::MaskCanvas m(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) m.set(x, y, on(rng));
  }
  return m;
}

Verdict regularity_metric() {
  std::mt19937_64 rng(5005);
  Checks c;

  // (a) rank-one masks: rasterized lattices and random row x column patterns.
  double worst_a = 0.0;
  std::vector<fa::MaskCanvas> outer;
  outer.push_back(fa::rasterize_class_mask(fa::generate_grid({}), 0));
  fa::GridSpec dense;
  dense.rows = 9;
  dense.cols = 3;
  outer.push_back(fa::rasterize_class_mask(fa::generate_grid(dense), 0, 128, 96));
  std::bernoulli_distribution half(0.5);
  for (int t = 0; t < 20; ++t) {
    fa::MaskCanvas m(64, 48);
    std::vector<bool> rows(48), cols(64);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = half(rng);
    for (std::size_t i = 0; i < cols.size(); ++i) cols[i] = half(rng);
    for (std::size_t y = 0; y < 48; ++y) {
      for (std::size_t x = 0; x < 64; ++x) m.set(x, y, rows[y] && cols[x]);
    }
    outer.push_back(m);
  }
  for (const auto& m : outer) worst_a = std::max(worst_a, std::fabs(fa::regularity_score(m).score));
  c.expect(worst_a <= 1e-9, "(a) rank-one score " + num(worst_a));

  // (b) monotone curves.
  std::size_t increases = 0;
  for (int t = 0; t < 100; ++t) {
    const auto curve = fa::regularity_score(random_mask(rng, 40 + t % 25, 30 + t % 17), 30);
    for (std::size_t k = 1; k < curve.mse.size(); ++k) increases += curve.mse[k] > curve.mse[k - 1];
  }
  c.expect(increases == 0, "(b) " + std::to_string(increases) + " increases");

  // (c) dense oracle on 64 x 64 masks, every rank.
  double worst_c = 0.0;
  for (int t = 0; t < 8; ++t) {
    const auto m = random_mask(rng, 64, 64);
    const fa::MaskSpectrum spectrum(m);
    for (std::size_t k = 1; k <= 64; ++k) {
      worst_c = std::max(worst_c, std::fabs(spectrum.rank_k_mse(k) - eigen_mse(m, k)));
    }
  }
  c.expect(worst_c <= 1e-9, "(c) oracle diff " + num(worst_c));

  // (d) full rank reconstructs exactly.
  double worst_d = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto m = random_mask(rng, 20 + t, 64 - t);
    worst_d = std::max(worst_d, fa::rank_k_mse(m, std::min(m.width(), m.height())));
  }
  c.expect(worst_d < 1e-12, "(d) full-rank mse " + num(worst_d));

  return finish(c, "(a) max rank-one score " + num(worst_a) + " (tol 1e-9); (b) 100 curves, " +
                       std::to_string(increases) + " increases; (c) max diff vs dense SVD " +
                       num(worst_c) + " (tol 1e-9); (d) max full-rank mse " + num(worst_d) +
                       " (tol 1e-12)");
}

// ---- 6 --------------------------------------------------------------------

Verdict map_evaluator() {
  std::mt19937_64 rng(6006);
  Checks c;
  int cases = 0;
  int aps = 0;
  double worst = 0.0;
  for (int t = 0; t < 3000; ++t) {
    const auto tc = fa_test::toy_case(rng);
    const auto report = fa::map50(tc.preds, tc.gts);
    double sum = 0.0;
    int n = 0;
    for (const auto& cr : report.classes) {
      if (!cr.ap) continue;
      const double want = fa_test::oracle_ap(tc.oracle, cr.class_id);
      worst = std::max(worst, std::fabs(*cr.ap - want));
      c.expect(*cr.ap == want, "case " + std::to_string(t) + " class " + std::to_string(cr.class_id) +
                                   " AP " + num(*cr.ap) + " vs " + num(want));
      sum += want;
      ++n;
      ++aps;
    }
    if (n > 0) c.expect(report.map == sum / n, "case " + std::to_string(t) + " mAP");
    ++cases;
  }

  std::vector<fa::DetectionSet> gts{
      make_set({box(0, 0, 10, 10), box(20, 20, 40, 40, 1), box(50, 0, 70, 30)}, 100, 100, "a"),
      make_set({box(5, 5, 25, 25, 1)}, 100, 100, "b")};
  auto perfect = gts;
  for (auto& s : perfect) {
    for (auto& b : s.boxes) b.confidence = 0.7;
  }
  const double map_perfect = fa::map50(perfect, gts).map;
  c.expect(map_perfect == 1.0, "perfect mAP " + num(map_perfect));
  const std::vector<fa::DetectionSet> empty{make_set({}, 100, 100, "a"), make_set({}, 100, 100, "b")};
  const double map_empty = fa::map50(empty, gts).map;
  c.expect(map_empty == 0.0, "empty mAP " + num(map_empty));

  const std::vector<fa::DetectionSet> hand_gt{make_set({box(0, 0, 10, 10)}, 100, 100, "h")};
  const std::vector<fa::DetectionSet> hand_pred{
      make_set({box(50, 50, 60, 60, 0, 0.9), box(0, 0, 10, 10, 0, 0.8)}, 100, 100, "h")};
  std::vector<fa::MatchReport> reports{fa::match_detections(hand_pred[0], hand_gt[0])};
  const double hand = fa::average_precision(reports, 0);
  c.expect(hand == 0.5, "hand case AP " + num(hand));

  return finish(c, std::to_string(cases) + " toy cases, " + std::to_string(aps) +
                       " class APs, max diff vs exhaustive oracle " + num(worst) + " (exact); perfect " +
                       num(map_perfect) + ", empty " + num(map_empty) + ", hand case " + num(hand));
}

// ---- 7 --------------------------------------------------------------------

fa::SweepConfig trend_config(double jitter, double shear, std::uint64_t seed) {
  fa::NoiseSpec noise;
  noise.jitter = jitter;
  noise.shear = shear;
  noise.seed = seed;
  auto data = fa::make_synthetic_dataset(fa::GridSpec{}, noise, 10);
  fa::SweepConfig cfg;
  cfg.detections = std::move(data.detections);
  cfg.ground_truth = std::move(data.ground_truth);
  return cfg;
}

Verdict trend_reproduction() {
  const auto t0 = std::chrono::steady_clock::now();
  Checks c;

  auto weights = trend_config(2.0, 1.5, 7007);
  weights.weights = {0.0, 0.1, 0.5, 1.0};
  weights.thresholds = {9.0};
  const auto rows = fa::run_sweep(weights);
  std::string by_w;
  for (const auto& r : rows) {
    by_w += (by_w.empty() ? "" : ", ") + ("W=" + num(r.weight) + ":" + num(r.relative_regularity) + "%");
    if (r.weight > 0.0) {
      c.expect(r.relative_regularity < 100.0, "W=" + num(r.weight) + " at " + num(r.relative_regularity) + "%");
    }
    c.expect(r.status == "ok", "status " + r.status);
  }

  // Row drift 7.5 px with +-0.5 px jitter keeps neighbors in (6, 9) px.
  auto contrast = trend_config(0.5, 7.5, 7008);
  contrast.weights = {0.5};
  contrast.thresholds = {6.0, 9.0};
  const auto crow = fa::run_sweep(contrast);
  double t6 = NAN;
  double t9 = NAN;
  for (const auto& r : crow) {
    if (r.weight != 0.5) continue;
    (r.threshold == 6.0 ? t6 : t9) = r.relative_regularity;
  }
  c.expect(t9 < t6, "T=9 " + num(t9) + "% not below T=6 " + num(t6) + "%");

  const double secs = seconds_since(t0);
  c.expect(secs < 60.0, "took " + num(secs) + " s");
  return finish(c, "T=9 sweep " + by_w + "; drift contrast at W=0.5: T=6 " + num(t6) + "%, T=9 " +
                       num(t9) + "%; " + num(secs) + " s (limit 60 s)");
}

// ---- 8 --------------------------------------------------------------------

Verdict data_plumbing() {
  Checks c;
  std::mt19937_64 rng(8008);

  std::vector<fa::DetectionSet> sets;
  for (int i = 0; i < 10; ++i) {
    auto s = fa_test::random_set(rng, static_cast<std::size_t>(i * 3), 3, 400.0);
    s.image_id = "img" + std::to_string(i);
    sets.push_back(std::move(s));
  }
  const fa::ClassNames names{{0, "window"}, {1, "door"}};
  std::ostringstream first;
  fa::write_detections(first, sets, names);
  std::istringstream in(first.str());
  const auto parsed = fa::parse_detections(in);
  std::ostringstream second;
  fa::write_detections(second, parsed.sets, parsed.class_names);
  c.expect(first.str() == second.str(), "interchange round trip changed bytes");

  std::vector<std::string> ids;
  for (int i = 0; i < 689; ++i) ids.push_back("facade_" + std::to_string(i));
  const auto split = fa::split_dataset(ids, {0.8, 0.1, 0.1}, 42);
  const auto again = fa::split_dataset(ids, {0.8, 0.1, 0.1}, 42);
  c.expect(split.train.size() == 551 && split.val.size() == 68 && split.test.size() == 70,
           "split sizes " + std::to_string(split.train.size()) + "/" + std::to_string(split.val.size()) +
               "/" + std::to_string(split.test.size()));
  c.expect(split.train == again.train && split.val == again.val && split.test == again.test,
           "split not deterministic");

  const fs::path cmp = fs::path(FA_TEST_DATA_DIR) / "cmp";
  std::string counts;
  try {
    std::ifstream labels_in(cmp / "labels.txt");
    std::ifstream sizes_in(cmp / "sizes.txt");
    const auto labels = fa::parse_label_table(labels_in);
    const auto file = fa::load_cmp_directory(cmp / "xml", fa::parse_size_table(sizes_in), labels);
    const std::vector<std::size_t> expected{7, 5, 0};
    for (std::size_t i = 0; i < file.sets.size(); ++i) {
      counts += (counts.empty() ? "" : "/") + std::to_string(file.sets[i].boxes.size());
    }
    c.expect(file.sets.size() == expected.size(), "fixture image count");
    for (std::size_t i = 0; i < std::min(file.sets.size(), expected.size()); ++i) {
      c.expect(file.sets[i].boxes.size() == expected[i], "fixture " + file.sets[i].image_id + " count");
    }

    // Relative coordinates survive scaling into pixels and back.
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> side(100.0, 4000.0);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
      double r[4] = {u(rng), u(rng), u(rng), u(rng)};
      if (r[0] > r[1]) std::swap(r[0], r[1]);
      if (r[2] > r[3]) std::swap(r[2], r[3]);
      if (r[1] - r[0] < 1e-3 || r[3] - r[2] < 1e-3) continue;
      char xml[256];
      std::snprintf(xml, sizeof xml,
                    "<annotation><object><points><x>%.17g</x><x>%.17g</x><y>%.17g</y><y>%.17g</y>"
                    "</points><label>3</label></object></annotation>",
                    r[0], r[1], r[2], r[3]);
      std::istringstream xin(xml);
      const double w = side(rng);
      const double h = side(rng);
      const auto s = fa::parse_cmp_annotation(xin, "rt", w, h, labels);
      const auto& b = s.boxes.at(0);
      worst = std::max({worst, std::fabs(b.x1 / w - r[0]), std::fabs(b.x2 / w - r[1]),
                        std::fabs(b.y1 / h - r[2]), std::fabs(b.y2 / h - r[3])});
    }
    c.expect(worst < 1e-9, "relative round trip error " + num(worst));
    counts += ", relative round trip " + num(worst);
  } catch (const fa::Error& e) {
    c.expect(false, std::string("fixtures: ") + e.what());
  }

  return finish(c, "round trip " + std::to_string(first.str().size()) + " bytes; 689 ids -> " +
                       std::to_string(split.train.size()) + "/" + std::to_string(split.val.size()) + "/" +
                       std::to_string(split.test.size()) + "; fixtures " + counts + " (tol 1e-9)");
}

// ---- 9 --------------------------------------------------------------------

bool same_boxes(const fa::DetectionSet& a, const fa::DetectionSet& b) {
  if (a.boxes.size() != b.boxes.size()) return false;
  for (std::size_t i = 0; i < a.boxes.size(); ++i) {
    const auto& p = a.boxes[i];
    const auto& q = b.boxes[i];
    if (p.class_id != q.class_id || p.x1 != q.x1 || p.y1 != q.y1 || p.x2 != q.x2 || p.y2 != q.y2 ||
        p.confidence != q.confidence) {
      return false;
    }
  }
  return true;
}

Verdict nms_and_filter() {
  std::mt19937_64 rng(9009);
  std::uniform_int_distribution<std::size_t> n(0, 40);
  std::uniform_int_distribution<int> classes(1, 3);
  std::uniform_real_distribution<double> thr(0.3, 0.9);
  const double grid[] = {0.0, 0.1, 0.2, 0.25, 0.25, 0.3, 0.5, 1.0};
  std::uniform_int_distribution<int> pick(0, 7);
  Checks c;
  std::size_t kept_total = 0;
  std::size_t filtered_total = 0;
  for (int t = 0; t < 500; ++t) {
    auto s = fa_test::random_set(rng, n(rng), classes(rng), 150.0);
    // Half the sets use a coarse confidence grid to create ties and boundary values.
    if (t % 2 == 0) {
      for (auto& b : s.boxes) b.confidence = grid[pick(rng)];
    }
    const double iou_thr = thr(rng);
    const auto once = fa::nms(s, iou_thr);
    const auto twice = fa::nms(once, iou_thr);
    c.expect(same_boxes(once, twice), "set " + std::to_string(t) + " not idempotent");
    kept_total += once.boxes.size();

    const auto filtered = fa::confidence_filter(s, 0.25);
    fa::DetectionSet want = s;
    want.boxes.clear();
    for (const auto& b : s.boxes) {
      if (b.confidence >= 0.25) want.boxes.push_back(b);
    }
    c.expect(same_boxes(filtered, want), "set " + std::to_string(t) + " filter mismatch");
    filtered_total += filtered.boxes.size();
  }
  return finish(c, "500 sets: NMS idempotent (" + std::to_string(kept_total) +
                       " boxes kept), filter at 0.25 kept exactly the " + std::to_string(filtered_total) +
                       " boxes with confidence >= 0.25");
}

std::set<int> parse_expected(int argc, char** argv) {
  std::set<int> out;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) != "--expect-fail" || i + 1 >= argc) continue;
    std::stringstream list(argv[++i]);
    std::string item;
    while (std::getline(list, item, ',')) out.insert(std::atoi(item.c_str()));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::set<int> expected_fail = parse_expected(argc, argv);
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"loss oracle equivalence", loss_oracle},
      {"gradient correctness", gradient_check},
      {"grid fixed point", grid_fixed_point},
      {"refinement recovery", refinement_recovery},
      {"regularity metric", regularity_metric},
      {"mAP evaluator", map_evaluator},
      {"trend reproduction", trend_reproduction},
      {"data plumbing", data_plumbing},
      {"NMS and filtering", nms_and_filter},
  };
  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const bool known = expected_fail.count(id) > 0;
    if (!v.pass && !known) ++unexpected;
    std::printf("%s %d %s: %s%s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first, v.detail.c_str(),
                !v.pass && known ? " [known failure]" : "");
    std::fflush(stdout);
  }
  return unexpected == 0 ? 0 : 1;
}
