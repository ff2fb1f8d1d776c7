#include "seemlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "seemlab/errors.hpp"

namespace seemlab {

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    std::ostringstream os;
    os << "Mat: " << data_.size() << " entries cannot fill a " << rows_ << "x" << cols_
       << " matrix";
    throw DimensionError(os.str());
  }
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  const std::size_t cols = rows.front().size();
  Mat m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) {
      throw DimensionError("Mat::from_rows: ragged rows");
    }
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

Mat Mat::transposed() const {
  Mat t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double Mat::norm() const noexcept { return norm2(data_); }

double Mat::trace() const {
  if (!square()) throw DimensionError("trace of non-square " + shape_string() + " matrix");
  double s = 0.0;
  for (std::size_t i = 0; i < rows_; ++i) s += (*this)(i, i);
  return s;
}

bool Mat::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Mat::shape_string() const {
  std::ostringstream os;
  os << rows_ << "x" << cols_;
  return os.str();
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: cannot multiply " + a.shape_string() + " by " +
                         b.shape_string());
  }
  Mat c(a.rows(), b.cols());
  // i-k-j order keeps the inner loop contiguous in both b and c.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto crow = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

std::vector<double> matvec(const Mat& a, std::span<const double> x) {
  if (a.cols() != x.size()) {
    std::ostringstream os;
    os << "matvec: " << a.shape_string() << " matrix with vector of length " << x.size();
    throw DimensionError(os.str());
  }
  std::vector<double> y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

namespace {

Mat elementwise(const Mat& a, const Mat& b, double sign, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shapes " + a.shape_string() + " and " +
                         b.shape_string() + " differ");
  }
  Mat c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] += sign * bd[i];
  return c;
}

}  // namespace

Mat operator+(const Mat& a, const Mat& b) { return elementwise(a, b, 1.0, "add"); }
Mat operator-(const Mat& a, const Mat& b) { return elementwise(a, b, -1.0, "subtract"); }

Mat operator*(double s, const Mat& a) {
  Mat c = a;
  for (double& v : c.data()) v *= s;
  return c;
}

double norm2(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

double cosine(std::span<const double> a, std::span<const double> b) noexcept {
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

double Spectrum::max_real() const {
  if (eigenvalues.empty()) throw DimensionError("max_real of an empty spectrum");
  double m = eigenvalues.front().real();
  for (const auto& z : eigenvalues) m = std::max(m, z.real());
  return m;
}

double max_real_eigenvalue(const Mat& a) {
  const Spectrum s = eigenvalues(a);
  if (!s.converged) {
    throw ConvergenceError("eigenvalues: QR iteration did not converge for " +
                           a.shape_string() + " matrix");
  }
  return s.max_real();
}

namespace {

struct Lu {
  Mat lu;
  std::vector<std::size_t> perm;
  bool singular = false;
};

Lu lu_factor(Mat a) {
  const std::size_t n = a.rows();
  Lu f{std::move(a), std::vector<std::size_t>(n), false};
  std::iota(f.perm.begin(), f.perm.end(), std::size_t{0});
  Mat& m = f.lu;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(m(i, k)) > std::abs(m(p, k))) p = i;
    if (m(p, k) == 0.0) {
      f.singular = true;
      continue;
    }
    if (p != k) {
      std::swap_ranges(m.row(k).begin(), m.row(k).end(), m.row(p).begin());
      std::swap(f.perm[k], f.perm[p]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double l = m(i, k) / m(k, k);
      m(i, k) = l;
      for (std::size_t j = k + 1; j < n; ++j) m(i, j) -= l * m(k, j);
    }
  }
  return f;
}

std::vector<double> lu_solve(const Lu& f, std::span<const double> b, double pivot_floor) {
  const std::size_t n = f.lu.rows();
  const Mat& m = f.lu;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[f.perm[i]];
    for (std::size_t j = 0; j < i; ++j) s -= m(i, j) * x[j];
    x[i] = s;
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= m(ii, j) * x[j];
    double piv = m(ii, ii);
    if (std::abs(piv) < pivot_floor) piv = piv < 0 ? -pivot_floor : pivot_floor;
    x[ii] = s / piv;
  }
  return x;
}

}  // namespace

std::vector<double> solve(Mat a, std::vector<double> b) {
  if (!a.square() || a.rows() != b.size()) {
    std::ostringstream os;
    os << "solve: " << a.shape_string() << " system with right-hand side of length "
       << b.size();
    throw DimensionError(os.str());
  }
  const Lu f = lu_factor(std::move(a));
  if (f.singular) throw FitError("solve: singular matrix");
  return lu_solve(f, b, 0.0);
}

std::optional<std::vector<double>> dominant_eigenvector(const Mat& a) {
  const Spectrum spec = eigenvalues(a);
  if (!spec.converged) {
    throw ConvergenceError("dominant_eigenvector: eigensolver did not converge");
  }
  const auto it = std::max_element(
      spec.eigenvalues.begin(), spec.eigenvalues.end(),
      [](const auto& x, const auto& y) { return x.real() < y.real(); });
  const double scale = std::max(a.norm(), 1e-300);
  if (std::abs(it->imag()) > 1e-10 * scale) return std::nullopt;

  // Inverse iteration on (A - sigma I) with sigma just above the eigenvalue:
  // power iteration on the shifted inverse, where the target dominates.
  const std::size_t n = a.rows();
  const double sigma = it->real() + 1e-10 * scale;
  Mat shifted = a;
  for (std::size_t i = 0; i < n; ++i) shifted(i, i) -= sigma;
  const Lu f = lu_factor(std::move(shifted));

  std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n)));
  for (std::size_t i = 0; i < n; ++i) x[i] += 1e-3 * static_cast<double>(i % 7);
  for (int iter = 0; iter < 1000; ++iter) {
    std::vector<double> y = lu_solve(f, x, 1e-300);
    const double ny = norm2(y);
    if (!(ny > 0.0) || !std::isfinite(ny)) break;
    for (double& v : y) v /= ny;
    const double agreement = std::abs(dot(x, y));
    x = std::move(y);
    if (1.0 - agreement < 1e-15) break;
  }
  const auto big = std::max_element(x.begin(), x.end(),
                                    [](double p, double q) { return std::abs(p) < std::abs(q); });
  if (*big < 0)
    for (double& v : x) v = -v;
  return x;
}

double LineFit::root() const noexcept {
  if (slope == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return -intercept / slope;
}

LineFit fit_line(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    std::ostringstream os;
    os << "fit_line: " << xs.size() << " xs but " << ys.size() << " ys";
    throw FitError(os.str());
  }
  const std::size_t n = xs.size();
  if (n < 2) throw FitError("fit_line: need at least two points");
  if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) {
    throw FitError("fit_line: all xs are equal");
  }
  const double xm = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
  const double ym = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - xm) * (xs[i] - xm);
    sxy += (xs[i] - xm) * (ys[i] - ym);
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = ym - fit.slope * xm;
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ys[i] - fit(xs[i]);
    ss_res += r * r;
    ss_tot += (ys[i] - ym) * (ys[i] - ym);
  }
  fit.r_squared = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
  return fit;
}

}  // namespace seemlab
