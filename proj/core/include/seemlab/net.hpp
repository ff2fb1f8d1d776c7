#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seemlab/linalg.hpp"

namespace seemlab {

enum class Norm { none, layernorm, layernorm_no_affine, weightnorm };

std::string_view to_string(Norm norm) noexcept;
/// Accepts both `layernorm-no-affine` and `layernorm_no_affine`. Throws ConfigError.
Norm parse_norm(std::string_view text);

/// ReLU MLP architecture.
///
/// `layer_dims` is [d0, d1, ..., dL] with dL = 1. Hidden layers are
/// linear -> (LayerNorm) -> ReLU; the output layer is linear only, optionally
/// weight-normalized. `input_norm` puts a LayerNorm on the raw input before
/// the first linear map (the Baird "LayerNorm in front of linear" variant).
struct MLPSpec {
  std::vector<std::size_t> layer_dims;
  Norm norm = Norm::none;
  Norm input_norm = Norm::none;

  /// Number of weight matrices, L.
  std::size_t layers() const noexcept { return layer_dims.empty() ? 0 : layer_dims.size() - 1; }
  std::size_t input_dim() const noexcept { return layer_dims.empty() ? 0 : layer_dims.front(); }
  std::size_t param_count() const;
  /// Throws ConfigError when the spec is malformed.
  void validate() const;

  friend bool operator==(const MLPSpec&, const MLPSpec&) = default;
};

inline constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

/// Offsets of each parameter block inside the flat theta vector.
struct LayerSlice {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight = npos;  // out x in, row-major
  std::size_t bias = npos;    // out
  std::size_t gain = npos;    // LayerNorm affine, out
  std::size_t shift = npos;   // LayerNorm affine, out
  std::size_t scale = npos;   // WeightNorm per-output-unit scale, out
  bool layernorm = false;
};

struct Layout {
  std::size_t input_gain = npos;
  std::size_t input_shift = npos;
  bool input_layernorm = false;
  std::vector<LayerSlice> layers;
  std::size_t total = 0;
};

Layout make_layout(const MLPSpec& spec);

/// Flat parameter vector theta.
struct Params {
  std::vector<double> theta;

  std::size_t size() const noexcept { return theta.size(); }
  double norm() const noexcept { return norm2(theta); }
  bool all_finite() const noexcept;

  friend bool operator==(const Params&, const Params&) = default;
};

struct InitOptions {
  /// Biases are drawn from U(-s/sqrt(fan_in), s/sqrt(fan_in)); 0 keeps them at zero.
  double bias_scale = 0.0;
};

/// Deterministic init: weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases per
/// `options`, LayerNorm gain 1 / shift 0, WeightNorm scale = initial row norm.
Params init(const MLPSpec& spec, std::uint64_t seed, InitOptions options = {});

Params scale_params(const Params& params, double lambda);

/// psi(z) = sqrt(d) (z - mean) / (||z - mean|| + 1e-8).
std::vector<double> layernorm(std::span<const double> z);

inline constexpr double kLayerNormEps = 1e-8;

/// Evaluator bound to one architecture. Stateless apart from the layout, so a
/// single instance can be shared across threads; each thread brings its own
/// Workspace.
class Network {
 public:
  struct Workspace {
    std::vector<std::vector<double>> act;   // input to layer l
    std::vector<std::vector<double>> pre;   // z = W act + b
    std::vector<std::vector<double>> nrm;   // psi(z) for LayerNorm layers
    std::vector<std::vector<double>> post;  // value fed to ReLU
    std::vector<double> cnorm;              // ||z - mean|| per LayerNorm layer
    std::vector<double> in_nrm;
    double in_cnorm = 0.0;
    std::vector<double> wn_norm;            // ||v|| per output unit
    std::vector<double> delta;
    std::vector<double> delta_prev;
  };

  explicit Network(MLPSpec spec);

  const MLPSpec& spec() const noexcept { return spec_; }
  const Layout& layout() const noexcept { return layout_; }
  std::size_t param_count() const noexcept { return layout_.total; }
  std::size_t input_dim() const noexcept { return spec_.input_dim(); }

  Workspace make_workspace() const;

  double forward(std::span<const double> theta, std::span<const double> x, Workspace& ws) const;
  double forward(const Params& params, std::span<const double> x) const;

  /// Adds scale * grad_theta f(x) into `grad` for the x of the most recent
  /// forward() on `ws`.
  void backward(std::span<const double> theta, double scale, std::span<double> grad,
                Workspace& ws) const;

  /// Returns f(x) and adds scale * grad_theta f(x) into `grad`.
  double accumulate_gradient(std::span<const double> theta, std::span<const double> x,
                             double scale, std::span<double> grad, Workspace& ws) const;

 private:
  void check_sizes(std::span<const double> theta, std::span<const double> x) const;

  MLPSpec spec_;
  Layout layout_;
};

/// Per-sample parameter gradients phi(x_i) = grad_theta f(x_i), conceptually a
/// P x M matrix whose column i belongs to input i. Stored column-contiguous.
class GradientFeatures {
 public:
  GradientFeatures() = default;
  GradientFeatures(std::size_t params, std::size_t samples)
      : params_(params), samples_(samples), data_(params * samples, 0.0) {}

  std::size_t params() const noexcept { return params_; }
  std::size_t samples() const noexcept { return samples_; }

  std::span<double> column(std::size_t i) noexcept { return {data_.data() + i * params_, params_}; }
  std::span<const double> column(std::size_t i) const noexcept {
    return {data_.data() + i * params_, params_};
  }
  std::span<const double> data() const noexcept { return data_; }

  /// Dense P x M copy.
  Mat to_mat() const;

 private:
  std::size_t params_ = 0;
  std::size_t samples_ = 0;
  std::vector<double> data_;
};

double forward(const MLPSpec& spec, const Params& params, std::span<const double> x);
/// f(x_i) for every row of X.
std::vector<double> forward_batch(const MLPSpec& spec, const Params& params, const Mat& inputs);

/// Rows of `inputs` are the samples. Throws DimensionError on empty batch.
GradientFeatures gradient_features(const MLPSpec& spec, const Params& params, const Mat& inputs);
GradientFeatures gradient_features(const Network& net, std::span<const double> theta,
                                   const Mat& inputs);

/// G(A, B)_ij = <phi(a_i), phi(b_j)>.
Mat gram(const GradientFeatures& a, const GradientFeatures& b);

/// Neural tangent kernel <grad f(x), grad f(x2)>.
double ntk(const MLPSpec& spec, const Params& params, std::span<const double> x,
           std::span<const double> x2);

}  // namespace seemlab
