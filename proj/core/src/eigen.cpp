// Dense non-symmetric eigenvalues: balancing, Householder reduction to upper
// Hessenberg form, then Francis double-shift QR on the Hessenberg matrix.

#include <algorithm>
#include <cmath>
#include <complex>

#include "seemlab/errors.hpp"
#include "seemlab/linalg.hpp"

namespace seemlab {
namespace {

// 1-based view over a row-major square buffer; the QR sweep below reads far
// more naturally with the textbook indexing.
class OneBased {
 public:
  explicit OneBased(Mat& m) : m_(m) {}
  double& operator()(int i, int j) { return m_(i - 1, j - 1); }

 private:
  Mat& m_;
};

void balance(Mat& a) {
  constexpr double radix = 2.0;
  constexpr double radix_sq = radix * radix;
  const std::size_t n = a.rows();
  bool done = false;
  while (!done) {
    done = true;
    for (std::size_t i = 0; i < n; ++i) {
      double r = 0.0;
      double c = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(a(j, i));
        r += std::abs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= radix_sq;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= radix_sq;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        g = 1.0 / f;
        for (std::size_t j = 0; j < n; ++j) a(i, j) *= g;
        for (std::size_t j = 0; j < n; ++j) a(j, i) *= f;
      }
    }
  }
}

void to_hessenberg(Mat& a) {
  const std::size_t n = a.rows();
  if (n < 3) return;
  std::vector<double> v(n);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    const std::size_t len = n - k - 1;
    double xnorm = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      v[i] = a(k + 1 + i, k);
      xnorm += v[i] * v[i];
    }
    xnorm = std::sqrt(xnorm);
    if (xnorm == 0.0) continue;
    const double alpha = v[0] > 0 ? -xnorm : xnorm;
    v[0] -= alpha;
    double vnorm2 = 0.0;
    for (std::size_t i = 0; i < len; ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 == 0.0) continue;
    const double beta = 2.0 / vnorm2;

    for (std::size_t j = k; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < len; ++i) s += v[i] * a(k + 1 + i, j);
      s *= beta;
      for (std::size_t i = 0; i < len; ++i) a(k + 1 + i, j) -= s * v[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < len; ++j) s += a(i, k + 1 + j) * v[j];
      s *= beta;
      for (std::size_t j = 0; j < len; ++j) a(i, k + 1 + j) -= s * v[j];
    }
    a(k + 1, k) = alpha;
    for (std::size_t i = k + 2; i < n; ++i) a(i, k) = 0.0;
  }
}

double sign_of(double magnitude, double s) { return s >= 0.0 ? std::abs(magnitude) : -std::abs(magnitude); }

// Francis double-shift QR on an upper Hessenberg matrix (destroys `hess`).
Spectrum hessenberg_qr(Mat& hess) {
  const int n = static_cast<int>(hess.rows());
  OneBased a(hess);
  Spectrum out;
  std::vector<double> wr(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> wi(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<bool> found(static_cast<std::size_t>(n) + 1, false);

  const std::size_t iteration_cap = 30 * static_cast<std::size_t>(n);
  std::size_t total_iterations = 0;

  double anorm = 0.0;
  for (int i = 1; i <= n; ++i)
    for (int j = std::max(i - 1, 1); j <= n; ++j) anorm += std::abs(a(i, j));

  int nn = n;
  double t = 0.0;
  double p = 0, q = 0, r = 0, s = 0, w = 0, x = 0, y = 0, z = 0;
  while (nn >= 1) {
    int its = 0;
    int l = 0;
    do {
      for (l = nn; l >= 2; --l) {
        s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::abs(a(l, l - 1)) + s == s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      x = a(nn, nn);
      if (l == nn) {
        wr[nn] = x + t;
        wi[nn] = 0.0;
        found[nn] = true;
        --nn;
      } else {
        y = a(nn - 1, nn - 1);
        w = a(nn, nn - 1) * a(nn - 1, nn);
        if (l == nn - 1) {
          p = 0.5 * (y - x);
          q = p * p + w;
          z = std::sqrt(std::abs(q));
          x += t;
          if (q >= 0.0) {
            z = p + sign_of(z, p);
            wr[nn - 1] = wr[nn] = x + z;
            if (z != 0.0) wr[nn] = x - w / z;
            wi[nn - 1] = wi[nn] = 0.0;
          } else {
            wr[nn - 1] = wr[nn] = x + p;
            wi[nn - 1] = -z;
            wi[nn] = z;
          }
          found[nn] = found[nn - 1] = true;
          nn -= 2;
        } else {
          if (total_iterations >= iteration_cap) {
            out.converged = false;
            out.iterations = total_iterations;
            for (int i = 1; i <= n; ++i)
              if (found[i]) out.eigenvalues.emplace_back(wr[i], wi[i]);
            return out;
          }
          if (its > 0 && its % 10 == 0) {
            // Exceptional shift to break cycles.
            t += x;
            for (int i = 1; i <= nn; ++i) a(i, i) -= x;
            s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          ++total_iterations;
          int m = nn - 2;
          for (; m >= l; --m) {
            z = a(m, m);
            r = x - z;
            s = y - z;
            p = (r * s - w) / a(m + 1, m) + a(m, m + 1);
            q = a(m + 1, m + 1) - z - r - s;
            r = a(m + 2, m + 1);
            s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
            const double v =
                std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) + std::abs(a(m + 1, m + 1)));
            if (u + v == v) break;
          }
          for (int i = m + 2; i <= nn; ++i) {
            a(i, i - 2) = 0.0;
            if (i != m + 2) a(i, i - 3) = 0.0;
          }
          for (int k = m; k <= nn - 1; ++k) {
            if (k != m) {
              p = a(k, k - 1);
              q = a(k + 1, k - 1);
              r = 0.0;
              if (k != nn - 1) r = a(k + 2, k - 1);
              if ((x = std::abs(p) + std::abs(q) + std::abs(r)) != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            if ((s = sign_of(std::sqrt(p * p + q * q + r * r), p)) != 0.0) {
              if (k == m) {
                if (l != m) a(k, k - 1) = -a(k, k - 1);
              } else {
                a(k, k - 1) = -s * x;
              }
              p += s;
              x = p / s;
              y = q / s;
              z = r / s;
              q /= p;
              r /= p;
              for (int j = k; j <= nn; ++j) {
                p = a(k, j) + q * a(k + 1, j);
                if (k != nn - 1) {
                  p += r * a(k + 2, j);
                  a(k + 2, j) -= p * z;
                }
                a(k + 1, j) -= p * y;
                a(k, j) -= p * x;
              }
              const int mmin = nn < k + 3 ? nn : k + 3;
              for (int i = l; i <= mmin; ++i) {
                p = x * a(i, k) + y * a(i, k + 1);
                if (k != nn - 1) {
                  p += z * a(i, k + 2);
                  a(i, k + 2) -= p * r;
                }
                a(i, k + 1) -= p * q;
                a(i, k) -= p;
              }
            }
          }
        }
      }
    } while (l < nn - 1);
  }

  out.iterations = total_iterations;
  out.eigenvalues.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) out.eigenvalues.emplace_back(wr[i], wi[i]);
  return out;
}

}  // namespace

Spectrum eigenvalues(const Mat& a) {
  if (!a.square()) {
    throw DimensionError("eigenvalues: matrix must be square, got " + a.shape_string());
  }
  if (!a.all_finite()) throw Error("eigenvalues: matrix has non-finite entries");
  Spectrum out;
  if (a.rows() == 0) return out;

  Mat h = a;
  balance(h);
  to_hessenberg(h);
  out = hessenberg_qr(h);
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end(),
            [](const std::complex<double>& p, const std::complex<double>& q) {
              if (p.real() != q.real()) return p.real() > q.real();
              return p.imag() > q.imag();
            });
  return out;
}

}  // namespace seemlab
