#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace seemlab {

/// Dense row-major matrix of doubles.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Mat identity(std::size_t n);
  /// Builds a matrix from nested rows; every row must have the same length.
  static Mat from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  Mat transposed() const;
  /// Frobenius norm.
  double norm() const noexcept;
  double trace() const;
  bool all_finite() const noexcept;

  /// "RxC", used in error messages.
  std::string shape_string() const;

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Mat matmul(const Mat& a, const Mat& b);
std::vector<double> matvec(const Mat& a, std::span<const double> x);
Mat operator+(const Mat& a, const Mat& b);
Mat operator-(const Mat& a, const Mat& b);
Mat operator*(double s, const Mat& a);

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  const std::size_t n = std::min(a.size(), b.size());
  // Four independent partial sums so the reduction can vectorize.
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

double norm2(std::span<const double> a) noexcept;
/// Cosine similarity; two zero vectors count as identical (1), one zero vector as 0.
double cosine(std::span<const double> a, std::span<const double> b) noexcept;

/// Eigenvalues of a real square matrix.
struct Spectrum {
  std::vector<std::complex<double>> eigenvalues;
  /// False when the QR iteration hit its cap; `eigenvalues` then holds only
  /// the ones that deflated before the cap.
  bool converged = true;
  std::size_t iterations = 0;

  double max_real() const;
};

/// All eigenvalues of a real non-symmetric matrix via balancing, Hessenberg
/// reduction and Francis double-shift QR. Throws DimensionError for
/// non-square input; non-convergence is reported through Spectrum::converged.
Spectrum eigenvalues(const Mat& a);

/// Largest real part over the spectrum. Throws ConvergenceError when the
/// eigensolver did not converge.
double max_real_eigenvalue(const Mat& a);

/// Right eigenvector for the eigenvalue of largest real part, unit 2-norm,
/// sign fixed so the largest-magnitude entry is positive. Empty when that
/// eigenvalue is complex.
std::optional<std::vector<double>> dominant_eigenvector(const Mat& a);

/// Solves a x = b with partial pivoting. Throws FitError on singular a.
std::vector<double> solve(Mat a, std::vector<double> b);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;

  double operator()(double x) const noexcept { return slope * x + intercept; }
  /// x at which the line crosses zero; NaN for a flat line.
  double root() const noexcept;
};

/// Ordinary least squares y = slope*x + intercept. Throws FitError for fewer
/// than two points, mismatched lengths, or all-equal xs.
LineFit fit_line(std::span<const double> xs, std::span<const double> ys);

}  // namespace seemlab
