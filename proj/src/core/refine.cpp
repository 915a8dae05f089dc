#include "facadealign/refine.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace facadealign {

namespace {

int sign(double v) { return (v > 0.0) - (v < 0.0); }

std::array<double, 4> coords(const BBox& b) { return {b.x1, b.y1, b.x2, b.y2}; }

void set_coords(BBox& b, const std::array<double, 4>& c) {
  b.x1 = c[0];
  b.y1 = c[1];
  b.x2 = c[2];
  b.y2 = c[3];
}

void check_same_layout(const DetectionSet& current, const DetectionSet& anchors) {
  if (current.boxes.size() != anchors.boxes.size()) {
    throw Error(ErrorCode::kSetMismatch, "current and anchor sets differ in box count");
  }
  for (std::size_t i = 0; i < current.boxes.size(); ++i) {
    if (current.boxes[i].class_id != anchors.boxes[i].class_id) {
      std::ostringstream msg;
      msg << "box " << i << " changed class between current and anchor sets";
      throw Error(ErrorCode::kSetMismatch, msg.str());
    }
  }
}

// Keeps one edge pair inside [0, limit] with at least kMinExtent between them.
void project_interval(double& lo, double& hi, double limit) {
  lo = std::clamp(lo, 0.0, limit);
  hi = std::clamp(hi, 0.0, limit);
  if (hi - lo >= kMinExtent) return;
  const double half = 0.5 * kMinExtent;
  const double mid = std::clamp(0.5 * (lo + hi), half, std::max(half, limit - half));
  lo = mid - half;
  hi = mid + half;
}

double fidelity(const DetectionSet& current, const DetectionSet& anchors) {
  double sum = 0.0;
  for (std::size_t i = 0; i < current.boxes.size(); ++i) {
    const auto c = coords(current.boxes[i]);
    const auto a = coords(anchors.boxes[i]);
    for (std::size_t k = 0; k < 4; ++k) sum += std::abs(c[k] - a[k]);
  }
  return sum / static_cast<double>(std::max<std::size_t>(current.boxes.size(), 1));
}

struct Evaluation {
  double objective;
  double alignment;
};

Evaluation evaluate(const DetectionSet& current, const DetectionSet& anchors,
                    const RefineConfig& cfg) {
  const double align = alignment_loss(current, cfg.align).total;
  return {cfg.lambda_fid * fidelity(current, anchors) + cfg.align.weight * align, align};
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

// Coordinates of one edge type that sit within `tie` of each other across a
// candidate pair, or that would meet during this step, are treated as
// aligned: the group is snapped to its mean position and moves with the mean
// of its members' gradients instead of chattering around the kink. Returns
// the per-coordinate snap offsets.
std::vector<std::array<double, 4>> tie_groups(const DetectionSet& set,
                                              const std::vector<CandidatePair>& pairs, double tie,
                                              double step, std::vector<std::array<double, 4>>& grad) {
  const std::size_t n = set.boxes.size();
  std::vector<std::array<double, 4>> snap(n, std::array<double, 4>{});
  for (std::size_t k = 0; k < 4; ++k) {
    const Axis axis = (k % 2 == 0) ? Axis::kX : Axis::kY;
    std::vector<std::size_t> parent(n);
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;
    bool any = false;
    for (const CandidatePair& p : pairs) {
      if (p.axis != axis) continue;
      const double a = coords(set.boxes[p.i])[k];
      const double b = coords(set.boxes[p.j])[k];
      const double closing = step * (a > b ? grad[p.i][k] - grad[p.j][k] : grad[p.j][k] - grad[p.i][k]);
      if (std::abs(a - b) > std::max(tie, closing)) continue;
      const std::size_t ri = find_root(parent, p.i);
      const std::size_t rj = find_root(parent, p.j);
      if (ri != rj) {
        parent[std::max(ri, rj)] = std::min(ri, rj);
        any = true;
      }
    }
    if (!any) continue;
    std::vector<double> grad_sum(n, 0.0);
    std::vector<double> pos_sum(n, 0.0);
    std::vector<std::size_t> count(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = find_root(parent, i);
      grad_sum[r] += grad[i][k];
      pos_sum[r] += coords(set.boxes[i])[k];
      ++count[r];
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = find_root(parent, i);
      if (count[r] < 2) continue;
      const double c = static_cast<double>(count[r]);
      grad[i][k] = grad_sum[r] / c;
      snap[i][k] = pos_sum[r] / c - coords(set.boxes[i])[k];
    }
  }
  return snap;
}

}  // namespace

void check_config(const RefineConfig& cfg) {
  check_config(cfg.align);
  if (!(cfg.lambda_fid >= 0.0) || !std::isfinite(cfg.lambda_fid) || !(cfg.step_size > 0.0) ||
      !std::isfinite(cfg.step_size) || cfg.max_iters < 1 || !(cfg.tol >= 0.0)) {
    throw Error(ErrorCode::kConfigInvalid,
                "refine config needs step_size > 0, max_iters >= 1, tol >= 0, lambda_fid >= 0");
  }
}

double refinement_objective(const DetectionSet& current, const DetectionSet& anchors,
                            const RefineConfig& cfg) {
  check_config(cfg);
  check_same_layout(current, anchors);
  return evaluate(current, anchors, cfg).objective;
}

RefineResult refine_detections(const DetectionSet& input, const RefineConfig& cfg) {
  check_config(cfg);
  RefineResult result{input, {}};
  if (input.boxes.empty()) {
    result.trace.status = ErrorCode::kDegenerateInput;
    return result;
  }

  DetectionSet& current = result.refined;
  const std::size_t n = input.boxes.size();
  const double fid_scale = cfg.lambda_fid / static_cast<double>(n);
  double step = cfg.step_size;
  Evaluation eval = evaluate(current, input, cfg);
  std::vector<std::array<double, 4>> grad(n);

  for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
    result.trace.iterations = iter;
    const auto align_grad = alignment_subgradient(current, cfg.align);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = coords(current.boxes[i]);
      const auto a = coords(input.boxes[i]);
      for (std::size_t k = 0; k < 4; ++k) {
        grad[i][k] = fid_scale * sign(c[k] - a[k]) + cfg.align.weight * align_grad[i][k];
      }
    }
    double grad_max = 0.0;
    for (const auto& g : grad) {
      for (double v : g) grad_max = std::max(grad_max, std::abs(v));
    }
    // The step is a length in pixels: the largest coordinate moves by it.
    const double scale = grad_max > 0.0 ? step / grad_max : 0.0;
    std::vector<std::array<double, 4>> snap(n, std::array<double, 4>{});
    if (cfg.align.weight > 0.0 && grad_max > 0.0) {
      snap = tie_groups(current, candidate_pairs(current, cfg.align), cfg.tol, scale, grad);
    }

    if (grad_max == 0.0 || step < cfg.tol) {
      result.trace.steps.push_back({iter, eval.objective, eval.alignment, 0.0, false});
      result.trace.converged = true;
      break;
    }

    DetectionSet candidate = current;
    double applied = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto c = coords(candidate.boxes[i]);
      for (std::size_t k = 0; k < 4; ++k) c[k] += snap[i][k] - scale * grad[i][k];
      project_interval(c[0], c[2], candidate.canvas_w);
      project_interval(c[1], c[3], candidate.canvas_h);
      const auto before = coords(current.boxes[i]);
      for (std::size_t k = 0; k < 4; ++k) applied = std::max(applied, std::abs(c[k] - before[k]));
      set_coords(candidate.boxes[i], c);
    }

    const Evaluation next = evaluate(candidate, input, cfg);
    if (next.objective < eval.objective) {
      current = std::move(candidate);
      eval = next;
      step = std::min(2.0 * step, cfg.step_size);
      result.trace.steps.push_back({iter, eval.objective, eval.alignment, applied, true});
    } else {
      step *= 0.5;
      result.trace.steps.push_back({iter, eval.objective, eval.alignment, 0.0, false});
    }
  }
  return result;
}

void write_trace_csv(std::ostream& out, const RefineTrace& trace) {
  const auto old_precision = out.precision(12);
  out << "iteration,objective,alignment,max_update,accepted\n";
  for (const RefineStep& s : trace.steps) {
    out << s.iteration << ',' << s.objective << ',' << s.alignment << ',' << s.max_update << ','
        << (s.accepted ? 1 : 0) << '\n';
  }
  out.precision(old_precision);
}

}  // namespace facadealign
