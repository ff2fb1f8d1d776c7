#pragma once

// Independent reference computations shared by the unit and acceptance suites.
// Each one recomputes its quantity from definitions, never through the code
// under test.

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "seemlab/linalg.hpp"
#include "seemlab/net.hpp"

namespace seemlab::oracle {

inline Mat naive_matmul(const Mat& a, const Mat& b) {
  Mat c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

inline Mat matpow(Mat m, std::size_t k) {
  Mat result = Mat::identity(m.rows());
  while (k > 0) {
    if (k & 1) result = naive_matmul(result, m);
    m = naive_matmul(m, m);
    k >>= 1;
  }
  return result;
}

/// Companion matrix of the monic polynomial c0 + c1 x + ... + c_{n-1} x^{n-1} + x^n.
inline Mat companion(const std::vector<double>& c) {
  const std::size_t n = c.size();
  Mat m(n, n);
  for (std::size_t i = 1; i < n; ++i) m(i, i - 1) = 1.0;
  for (std::size_t i = 0; i < n; ++i) m(i, n - 1) = -c[i];
  return m;
}

/// Low-order-first coefficients of prod (x - r), dropping the leading 1.
/// Complex roots must come in conjugate pairs so the result is real.
inline std::vector<double> monic_from_roots(const std::vector<std::complex<double>>& roots) {
  std::vector<std::complex<double>> p{1.0};
  for (auto r : roots) {
    std::vector<std::complex<double>> next(p.size() + 1, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      next[i + 1] += p[i];
      next[i] -= r * p[i];
    }
    p = std::move(next);
  }
  std::vector<double> c;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) c.push_back(p[i].real());
  return c;
}

/// Every value in `got` lies within tol of a distinct value in `want`.
inline bool same_spectrum(const std::vector<std::complex<double>>& got,
                          const std::vector<std::complex<double>>& want, double tol) {
  if (got.size() != want.size()) return false;
  std::vector<bool> used(want.size(), false);
  for (auto g : got) {
    bool hit = false;
    for (std::size_t j = 0; j < want.size(); ++j) {
      if (!used[j] && std::abs(g - want[j]) <= tol) {
        used[j] = hit = true;
        break;
      }
    }
    if (!hit) return false;
  }
  return true;
}

/// Central differences with step 1e-6 (1 + |theta_i|).
inline std::vector<double> fd_gradient(const Network& net, std::vector<double> theta,
                                       std::span<const double> x) {
  auto ws = net.make_workspace();
  std::vector<double> g(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double t = theta[i];
    const double h = 1e-6 * (1.0 + std::abs(t));
    theta[i] = t + h;
    const double up = net.forward(theta, x, ws);
    theta[i] = t - h;
    const double down = net.forward(theta, x, ws);
    theta[i] = t;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Smallest |pre-activation| over hidden units for the last forward on ws.
inline double kink_margin(const Network& net, const Network::Workspace& ws) {
  double m = INFINITY;
  for (std::size_t l = 0; l + 1 < net.spec().layers(); ++l)
    for (double v : ws.post[l]) m = std::min(m, std::abs(v));
  return m;
}

/// max |g - fd| / max |fd|.
inline double relative_gradient_error(std::span<const double> g, std::span<const double> fd) {
  double scale = 0.0;
  double diff = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    scale = std::max(scale, std::abs(fd[i]));
    diff = std::max(diff, std::abs(fd[i] - g[i]));
  }
  return diff / std::max(scale, 1e-12);
}

}  // namespace seemlab::oracle
