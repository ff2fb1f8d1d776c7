#include "seemlab/net.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "seemlab/errors.hpp"
#include "seemlab/rng.hpp"

namespace seemlab {

std::string_view to_string(Norm norm) noexcept {
  switch (norm) {
    case Norm::none:
      return "none";
    case Norm::layernorm:
      return "layernorm";
    case Norm::layernorm_no_affine:
      return "layernorm-no-affine";
    case Norm::weightnorm:
      return "weightnorm";
  }
  return "none";
}

Norm parse_norm(std::string_view text) {
  if (text == "none") return Norm::none;
  if (text == "layernorm") return Norm::layernorm;
  if (text == "layernorm-no-affine" || text == "layernorm_no_affine") {
    return Norm::layernorm_no_affine;
  }
  if (text == "weightnorm") return Norm::weightnorm;
  throw ConfigError("unknown norm '" + std::string(text) +
                    "' (expected none, layernorm, layernorm-no-affine, weightnorm)");
}

namespace {

bool is_layernorm(Norm n) { return n == Norm::layernorm || n == Norm::layernorm_no_affine; }

}  // namespace

void MLPSpec::validate() const {
  if (layer_dims.size() < 2) throw ConfigError("MLPSpec: need at least one layer (two dims)");
  for (std::size_t d : layer_dims) {
    if (d == 0) throw ConfigError("MLPSpec: layer dims must be >= 1");
  }
  if (layer_dims.back() != 1) throw ConfigError("MLPSpec: output dim must be 1");
  if (input_norm == Norm::weightnorm) {
    throw ConfigError("MLPSpec: input norm must be none or a layernorm variant");
  }
}

std::size_t MLPSpec::param_count() const { return make_layout(*this).total; }

Layout make_layout(const MLPSpec& spec) {
  spec.validate();
  Layout lay;
  std::size_t off = 0;
  if (is_layernorm(spec.input_norm)) {
    lay.input_layernorm = true;
    if (spec.input_norm == Norm::layernorm) {
      lay.input_gain = off;
      off += spec.input_dim();
      lay.input_shift = off;
      off += spec.input_dim();
    }
  }
  const std::size_t L = spec.layers();
  for (std::size_t l = 0; l < L; ++l) {
    LayerSlice s;
    s.in = spec.layer_dims[l];
    s.out = spec.layer_dims[l + 1];
    const bool hidden = l + 1 < L;
    s.weight = off;
    off += s.in * s.out;
    s.bias = off;
    off += s.out;
    if (hidden && is_layernorm(spec.norm)) {
      s.layernorm = true;
      if (spec.norm == Norm::layernorm) {
        s.gain = off;
        off += s.out;
        s.shift = off;
        off += s.out;
      }
    }
    if (!hidden && spec.norm == Norm::weightnorm) {
      s.scale = off;
      off += s.out;
    }
    lay.layers.push_back(s);
  }
  lay.total = off;
  return lay;
}

bool Params::all_finite() const noexcept {
  return std::all_of(theta.begin(), theta.end(), [](double v) { return std::isfinite(v); });
}

Params init(const MLPSpec& spec, std::uint64_t seed, InitOptions options) {
  const Layout lay = make_layout(spec);
  Params p{std::vector<double>(lay.total, 0.0)};
  Rng rng(seed);
  if (lay.input_gain != npos) {
    std::fill_n(p.theta.begin() + static_cast<std::ptrdiff_t>(lay.input_gain), spec.input_dim(),
                1.0);
  }
  for (const LayerSlice& s : lay.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.in));
    for (std::size_t i = 0; i < s.in * s.out; ++i) p.theta[s.weight + i] = rng.uniform(-bound, bound);
    if (options.bias_scale != 0.0) {
      const double bb = options.bias_scale * bound;
      for (std::size_t i = 0; i < s.out; ++i) p.theta[s.bias + i] = rng.uniform(-bb, bb);
    }
    if (s.gain != npos) {
      for (std::size_t i = 0; i < s.out; ++i) p.theta[s.gain + i] = 1.0;
    }
    if (s.scale != npos) {
      for (std::size_t o = 0; o < s.out; ++o) {
        p.theta[s.scale + o] = norm2(std::span<const double>(p.theta).subspan(s.weight + o * s.in, s.in));
      }
    }
  }
  return p;
}

Params scale_params(const Params& params, double lambda) {
  Params out = params;
  for (double& v : out.theta) v *= lambda;
  return out;
}

std::vector<double> layernorm(std::span<const double> z) {
  const std::size_t d = z.size();
  if (d == 0) return {};
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= static_cast<double>(d);
  std::vector<double> c(d);
  for (std::size_t i = 0; i < d; ++i) c[i] = z[i] - mean;
  const double scale = std::sqrt(static_cast<double>(d)) / (norm2(c) + kLayerNormEps);
  for (double& v : c) v *= scale;
  return c;
}

namespace {

// Centers `z` in place into `c` and writes psi into `n`; returns ||c||.
double psi_forward(std::span<const double> z, std::span<double> c, std::span<double> n) {
  const std::size_t d = z.size();
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= static_cast<double>(d);
  double sq = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    c[i] = z[i] - mean;
    sq += c[i] * c[i];
  }
  const double cn = std::sqrt(sq);
  const double k = std::sqrt(static_cast<double>(d)) / (cn + kLayerNormEps);
  for (std::size_t i = 0; i < d; ++i) n[i] = k * c[i];
  return cn;
}

// dz = J^T dn for psi with J = sqrt(d) [P/r - c c^T / (||c|| r^2)], r = ||c|| + eps.
void psi_backward(std::span<const double> c, double cn, std::span<const double> dn,
                  std::span<double> dz) {
  const std::size_t d = c.size();
  const double r = cn + kLayerNormEps;
  const double sd = std::sqrt(static_cast<double>(d));
  double mean = 0.0;
  for (double v : dn) mean += v;
  mean /= static_cast<double>(d);
  const double cd = cn > 0.0 ? dot(c, dn) / (cn * r * r) : 0.0;
  for (std::size_t i = 0; i < d; ++i) dz[i] = sd * ((dn[i] - mean) / r - c[i] * cd);
}

}  // namespace

Network::Network(MLPSpec spec) : spec_(std::move(spec)), layout_(make_layout(spec_)) {}

Network::Workspace Network::make_workspace() const {
  Workspace ws;
  const std::size_t L = spec_.layers();
  ws.act.resize(L);
  ws.pre.resize(L);
  ws.nrm.resize(L);
  ws.post.resize(L);
  ws.cnorm.assign(L, 0.0);
  std::size_t widest = 0;
  for (std::size_t l = 0; l < L; ++l) {
    const LayerSlice& s = layout_.layers[l];
    ws.act[l].resize(s.in);
    ws.pre[l].resize(s.out);
    if (s.layernorm) ws.nrm[l].resize(s.out);
    ws.post[l].resize(s.out);
    widest = std::max({widest, s.in, s.out});
  }
  if (layout_.input_layernorm) ws.in_nrm.resize(spec_.input_dim());
  ws.wn_norm.assign(layout_.layers.back().out, 0.0);
  ws.delta.resize(widest);
  ws.delta_prev.resize(widest);
  return ws;
}

void Network::check_sizes(std::span<const double> theta, std::span<const double> x) const {
  if (theta.size() != layout_.total || x.size() != spec_.input_dim()) {
    std::ostringstream os;
    os << "Network: expected " << layout_.total << " params and input of length "
       << spec_.input_dim() << ", got " << theta.size() << " and " << x.size();
    throw DimensionError(os.str());
  }
}

double Network::forward(std::span<const double> theta, std::span<const double> x,
                        Workspace& ws) const {
  check_sizes(theta, x);
  const std::size_t L = spec_.layers();
  std::vector<double>& a0 = ws.act[0];
  if (layout_.input_layernorm) {
    ws.in_cnorm = psi_forward(x, a0, ws.in_nrm);
    for (std::size_t i = 0; i < a0.size(); ++i) {
      a0[i] = ws.in_nrm[i];
      if (layout_.input_gain != npos) {
        a0[i] = theta[layout_.input_gain + i] * a0[i] + theta[layout_.input_shift + i];
      }
    }
  } else {
    std::copy(x.begin(), x.end(), a0.begin());
  }

  for (std::size_t l = 0; l < L; ++l) {
    const LayerSlice& s = layout_.layers[l];
    const std::vector<double>& a = ws.act[l];
    std::vector<double>& z = ws.pre[l];
    for (std::size_t o = 0; o < s.out; ++o) {
      const auto w = theta.subspan(s.weight + o * s.in, s.in);
      double v = dot(w, a);
      if (s.scale != npos) {
        const double vn = norm2(w);
        ws.wn_norm[o] = vn;
        v *= theta[s.scale + o] / vn;
      }
      z[o] = v + theta[s.bias + o];
    }
    if (l + 1 == L) break;

    std::vector<double>& y = ws.post[l];
    if (s.layernorm) {
      // pre[l] is overwritten with the centered vector, which backward needs.
      ws.cnorm[l] = psi_forward(z, z, ws.nrm[l]);
      for (std::size_t o = 0; o < s.out; ++o) {
        y[o] = s.gain != npos ? theta[s.gain + o] * ws.nrm[l][o] + theta[s.shift + o]
                              : ws.nrm[l][o];
      }
    } else {
      std::copy(z.begin(), z.end(), y.begin());
    }
    std::vector<double>& next = ws.act[l + 1];
    for (std::size_t o = 0; o < s.out; ++o) next[o] = y[o] > 0.0 ? y[o] : 0.0;
  }
  return ws.pre[L - 1][0];
}

double Network::forward(const Params& params, std::span<const double> x) const {
  Workspace ws = make_workspace();
  return forward(params.theta, x, ws);
}

double Network::accumulate_gradient(std::span<const double> theta, std::span<const double> x,
                                    double scale, std::span<double> grad, Workspace& ws) const {
  if (grad.size() != layout_.total) {
    throw DimensionError("accumulate_gradient: gradient buffer has wrong length");
  }
  const double f = forward(theta, x, ws);
  backward(theta, scale, grad, ws);
  return f;
}

void Network::backward(std::span<const double> theta, double scale, std::span<double> grad,
                       Workspace& ws) const {
  if (grad.size() != layout_.total || theta.size() != layout_.total) {
    throw DimensionError("backward: parameter or gradient buffer has wrong length");
  }
  const std::size_t L = spec_.layers();

  // delta holds df/dz for the current layer's linear output.
  std::span<double> delta(ws.delta.data(), layout_.layers.back().out);
  std::fill(delta.begin(), delta.end(), 0.0);
  delta[0] = 1.0;

  for (std::size_t l = L; l-- > 0;) {
    const LayerSlice& s = layout_.layers[l];
    const std::vector<double>& a = ws.act[l];
    const bool need_input_grad = l > 0 || layout_.input_gain != npos;
    std::span<double> da(ws.delta_prev.data(), s.in);
    if (need_input_grad) std::fill(da.begin(), da.end(), 0.0);

    for (std::size_t o = 0; o < s.out; ++o) {
      const double dz = delta[o];
      if (dz == 0.0) continue;
      const auto w = theta.subspan(s.weight + o * s.in, s.in);
      grad[s.bias + o] += scale * dz;
      if (s.scale != npos) {
        const double vn = ws.wn_norm[o];
        const double g = theta[s.scale + o];
        const double va = dot(w, a);
        grad[s.scale + o] += scale * dz * va / vn;
        const double k = scale * dz * g / vn;
        const double proj = va / (vn * vn);
        for (std::size_t i = 0; i < s.in; ++i) grad[s.weight + o * s.in + i] += k * (a[i] - proj * w[i]);
        if (need_input_grad) {
          for (std::size_t i = 0; i < s.in; ++i) da[i] += dz * g / vn * w[i];
        }
      } else {
        const double k = scale * dz;
        double* gw = grad.data() + s.weight + o * s.in;
        for (std::size_t i = 0; i < s.in; ++i) gw[i] += k * a[i];
        if (need_input_grad) {
          for (std::size_t i = 0; i < s.in; ++i) da[i] += dz * w[i];
        }
      }
    }

    if (l == 0) {
      if (layout_.input_gain != npos) {
        for (std::size_t i = 0; i < s.in; ++i) {
          grad[layout_.input_gain + i] += scale * da[i] * ws.in_nrm[i];
          grad[layout_.input_shift + i] += scale * da[i];
        }
      }
      break;
    }

    // Back through ReLU and the optional LayerNorm of hidden layer l-1.
    const LayerSlice& p = layout_.layers[l - 1];
    std::span<double> dprev(ws.delta.data(), p.out);
    const std::vector<double>& y = ws.post[l - 1];
    for (std::size_t i = 0; i < p.out; ++i) da[i] = y[i] > 0.0 ? da[i] : 0.0;
    if (p.layernorm) {
      const std::vector<double>& n = ws.nrm[l - 1];
      if (p.gain != npos) {
        for (std::size_t i = 0; i < p.out; ++i) {
          grad[p.gain + i] += scale * da[i] * n[i];
          grad[p.shift + i] += scale * da[i];
          da[i] *= theta[p.gain + i];
        }
      }
      psi_backward(ws.pre[l - 1], ws.cnorm[l - 1], da, dprev);
    } else {
      std::copy(da.begin(), da.end(), dprev.begin());
    }
    delta = dprev;
  }
}

Mat GradientFeatures::to_mat() const {
  Mat m(params_, samples_);
  for (std::size_t j = 0; j < samples_; ++j) {
    const auto col = column(j);
    for (std::size_t i = 0; i < params_; ++i) m(i, j) = col[i];
  }
  return m;
}

double forward(const MLPSpec& spec, const Params& params, std::span<const double> x) {
  return Network(spec).forward(params, x);
}

std::vector<double> forward_batch(const MLPSpec& spec, const Params& params, const Mat& inputs) {
  const Network net(spec);
  auto ws = net.make_workspace();
  std::vector<double> out(inputs.rows());
  for (std::size_t i = 0; i < inputs.rows(); ++i) out[i] = net.forward(params.theta, inputs.row(i), ws);
  return out;
}

GradientFeatures gradient_features(const Network& net, std::span<const double> theta,
                                   const Mat& inputs) {
  if (inputs.rows() == 0) throw DimensionError("gradient_features: empty batch");
  GradientFeatures g(net.param_count(), inputs.rows());
  auto ws = net.make_workspace();
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    net.accumulate_gradient(theta, inputs.row(i), 1.0, g.column(i), ws);
  }
  return g;
}

GradientFeatures gradient_features(const MLPSpec& spec, const Params& params, const Mat& inputs) {
  return gradient_features(Network(spec), params.theta, inputs);
}

Mat gram(const GradientFeatures& a, const GradientFeatures& b) {
  if (a.params() != b.params()) {
    throw DimensionError("gram: feature sets have different parameter counts");
  }
  Mat g(a.samples(), b.samples());
  const bool same = &a == &b;
  for (std::size_t i = 0; i < a.samples(); ++i) {
    for (std::size_t j = same ? i : 0; j < b.samples(); ++j) {
      const double v = dot(a.column(i), b.column(j));
      g(i, j) = v;
      if (same) g(j, i) = v;
    }
  }
  return g;
}

double ntk(const MLPSpec& spec, const Params& params, std::span<const double> x,
           std::span<const double> x2) {
  const Network net(spec);
  auto ws = net.make_workspace();
  std::vector<double> g1(net.param_count(), 0.0);
  std::vector<double> g2(net.param_count(), 0.0);
  net.accumulate_gradient(params.theta, x, 1.0, g1, ws);
  net.accumulate_gradient(params.theta, x2, 1.0, g2, ws);
  return dot(g1, g2);
}

}  // namespace seemlab
