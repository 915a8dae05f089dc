#include "facadealign/regularity.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "facadealign/error.hpp"

namespace facadealign {

MaskCanvas::MaskCanvas(std::size_t width, std::size_t height)
    : width_(width), height_(height), values_(width * height, 0) {
  if (width == 0 || height == 0) {
    throw Error(ErrorCode::kInvalidArgument, "mask dimensions must be positive");
  }
}

std::size_t MaskCanvas::count_ones() const {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

MaskCanvas MaskCanvas::transposed() const {
  MaskCanvas t(height_, width_);
  for (std::size_t y = 0; y < height_; ++y) {
    for (std::size_t x = 0; x < width_; ++x) t.set(y, x, at(x, y) != 0);
  }
  return t;
}

MaskCanvas rasterize_class_mask(const DetectionSet& set, std::int32_t class_id, std::size_t width,
                                std::size_t height) {
  if (!(set.canvas_w > 0.0) || !(set.canvas_h > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "detection set canvas must be positive");
  }
  MaskCanvas mask(width, height);
  const double scale = std::min(static_cast<double>(width) / set.canvas_w,
                                static_cast<double>(height) / set.canvas_h);
  auto pixel_range = [](double lo, double hi, std::size_t limit) {
    // Pixels whose center c = p + 0.5 satisfies lo <= c < hi.
    const double first = std::max(0.0, std::ceil(lo - 0.5));
    const double last = std::min(static_cast<double>(limit), std::ceil(hi - 0.5));
    return std::pair<std::size_t, std::size_t>(static_cast<std::size_t>(first),
                                               static_cast<std::size_t>(std::max(first, last)));
  };
  for (const BBox& b : set.boxes) {
    if (b.class_id != class_id) continue;
    const auto [x0, x1] = pixel_range(b.x1 * scale, b.x2 * scale, width);
    const auto [y0, y1] = pixel_range(b.y1 * scale, b.y2 * scale, height);
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::size_t x = x0; x < x1; ++x) mask.set(x, y, true);
    }
  }
  return mask;
}

namespace {

// Dense column-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return data[j * rows + i]; }
  double operator()(std::size_t i, std::size_t j) const { return data[j * rows + i]; }
  double* column(std::size_t j) { return data.data() + j * rows; }
  const double* column(std::size_t j) const { return data.data() + j * rows; }
};

// Collapses repeated rows and columns. Each distinct row (column) pattern
// keeps one representative scaled by sqrt(multiplicity); the result has the
// same singular values as the mask, and its squared Frobenius distance to
// any reconstruction equals that of the full-size matrix.
Matrix compress(const MaskCanvas& mask) {
  const std::size_t w = mask.width();
  const std::size_t h = mask.height();
  std::map<std::vector<std::uint8_t>, std::size_t> row_count;
  for (std::size_t y = 0; y < h; ++y) {
    const auto row = mask.values().subspan(y * w, w);
    ++row_count[std::vector<std::uint8_t>(row.begin(), row.end())];
  }
  std::vector<const std::vector<std::uint8_t>*> rows;
  std::vector<double> row_weight;
  for (const auto& [pattern, count] : row_count) {
    rows.push_back(&pattern);
    row_weight.push_back(static_cast<double>(count));
  }
  std::map<std::vector<std::uint8_t>, std::size_t> col_count;
  for (std::size_t x = 0; x < w; ++x) {
    std::vector<std::uint8_t> col(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) col[r] = (*rows[r])[x];
    ++col_count[col];
  }
  Matrix out(rows.size(), col_count.size());
  std::size_t j = 0;
  for (const auto& [pattern, count] : col_count) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (pattern[i] != 0) out(i, j) = std::sqrt(row_weight[i] * static_cast<double>(count));
    }
    ++j;
  }
  return out;
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

struct Decomposition {
  Matrix scaled_left;  // columns are sigma_i * u_i, descending sigma
  Matrix right;        // columns are v_i
  std::vector<double> sigma;
};

// One-sided Jacobi (Hestenes) on a matrix with rows >= cols.
Decomposition jacobi_svd(Matrix a) {
  const std::size_t m = a.rows;
  const std::size_t n = a.cols;
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  constexpr double kEps = 1e-15;
  constexpr int kMaxSweeps = 80;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double* ap = a.column(p);
        double* aq = a.column(q);
        const double alpha = dot(ap, ap, m);
        const double beta = dot(aq, aq, m);
        const double gamma = dot(ap, aq, m);
        if (alpha == 0.0 || beta == 0.0 || std::abs(gamma) <= kEps * std::sqrt(alpha * beta)) {
          continue;
        }
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double x = ap[i];
          const double y = aq[i];
          ap[i] = c * x - s * y;
          aq[i] = s * x + c * y;
        }
        double* vp = v.column(p);
        double* vq = v.column(q);
        for (std::size_t i = 0; i < n; ++i) {
          const double x = vp[i];
          const double y = vq[i];
          vp[i] = c * x - s * y;
          vq[i] = s * x + c * y;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = std::sqrt(dot(a.column(j), a.column(j), m));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  Decomposition d{Matrix(m, n), Matrix(n, n), std::vector<double>(n)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    d.sigma[k] = norms[j];
    std::copy(a.column(j), a.column(j) + m, d.scaled_left.column(k));
    std::copy(v.column(j), v.column(j) + n, d.right.column(k));
  }
  return d;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t j = 0; j < a.cols; ++j) {
    for (std::size_t i = 0; i < a.rows; ++i) t(j, i) = a(i, j);
  }
  return t;
}

}  // namespace

MaskSpectrum::MaskSpectrum(const MaskCanvas& mask)
    : max_rank_(std::min(mask.width(), mask.height())) {
  Matrix b = compress(mask);
  if (b.rows < b.cols) b = transpose(b);
  const Decomposition d = jacobi_svd(b);
  sigma_ = d.sigma;

  // Residual after subtracting the leading triplets one at a time.
  const double pixels = static_cast<double>(mask.width() * mask.height());
  Matrix residual = b;
  auto squared_norm = [](const Matrix& r) { return dot(r.data.data(), r.data.data(), r.data.size()); };
  mse_.push_back(squared_norm(residual) / pixels);
  for (std::size_t k = 0; k < sigma_.size(); ++k) {
    const double* left = d.scaled_left.column(k);
    const double* right = d.right.column(k);
    for (std::size_t j = 0; j < residual.cols; ++j) {
      double* col = residual.column(j);
      for (std::size_t i = 0; i < residual.rows; ++i) col[i] -= left[i] * right[j];
    }
    mse_.push_back(squared_norm(residual) / pixels);
  }
}

double MaskSpectrum::rank_k_mse(std::size_t k) const {
  if (k < 1 || k > max_rank_) {
    std::ostringstream msg;
    msg << "rank " << k << " outside [1, " << max_rank_ << "]";
    throw Error(ErrorCode::kRankOutOfRange, msg.str());
  }
  return mse_[std::min(k, mse_.size() - 1)];
}

double rank_k_mse(const MaskCanvas& mask, std::size_t k) { return MaskSpectrum(mask).rank_k_mse(k); }

RegularityCurve regularity_score(const MaskCanvas& mask, std::size_t k_max) {
  if (k_max < 1) throw Error(ErrorCode::kInvalidArgument, "k_max must be at least 1");
  const MaskSpectrum spectrum(mask);
  RegularityCurve curve;
  curve.k_max = k_max;
  curve.k_used = std::min(k_max, spectrum.max_rank());
  for (std::size_t k = 1; k <= curve.k_used; ++k) {
    curve.mse.push_back(spectrum.rank_k_mse(k));
    curve.score += curve.mse.back();
  }
  return curve;
}

double relative_regularity(std::span<const double> method, std::span<const double> baseline) {
  if (method.size() != baseline.size() || method.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "method and baseline score lists must have the same non-zero length");
  }
  const double base = std::accumulate(baseline.begin(), baseline.end(), 0.0);
  if (!(base > 0.0)) throw Error(ErrorCode::kZeroBaseline, "baseline regularity sums to zero");
  return 100.0 * (std::accumulate(method.begin(), method.end(), 0.0) / base);
}

void write_curve_csv(std::ostream& out, const RegularityCurve& curve) {
  out << "k,mse\n";
  char buf[64];
  for (std::size_t k = 0; k < curve.mse.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", k + 1, curve.mse[k]);
    out << buf;
  }
}

void write_pgm(std::ostream& out, const MaskCanvas& mask) {
  out << "P5\n" << mask.width() << ' ' << mask.height() << "\n255\n";
  for (std::uint8_t v : mask.values()) out.put(static_cast<char>(v ? 255 : 0));
}

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

std::size_t parse_dimension(const std::string& tok) {
  try {
    std::size_t pos = 0;
    const unsigned long v = std::stoul(tok, &pos);
    if (pos != tok.size() || v == 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kParseError, "bad PGM header field '" + tok + "'");
  }
}

}  // namespace

MaskCanvas read_pgm(std::istream& in) {
  if (next_token(in) != "P5") throw Error(ErrorCode::kParseError, "not a binary PGM (P5)");
  const std::size_t w = parse_dimension(next_token(in));
  const std::size_t h = parse_dimension(next_token(in));
  const std::size_t maxval = parse_dimension(next_token(in));
  if (maxval > 255) throw Error(ErrorCode::kParseError, "only 8-bit PGM is supported");
  MaskCanvas mask(w, h);
  std::vector<char> raw(w * h);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw Error(ErrorCode::kParseError, "PGM pixel data truncated");
  }
  for (std::size_t i = 0; i < raw.size(); ++i) mask.set(i % w, i / w, raw[i] != 0);
  return mask;
}

}  // namespace facadealign
