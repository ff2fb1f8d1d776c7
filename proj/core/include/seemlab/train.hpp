#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "seemlab/envs.hpp"
#include "seemlab/linalg.hpp"
#include "seemlab/net.hpp"
#include "seemlab/rng.hpp"

namespace seemlab {

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind kind) noexcept;
/// Throws ConfigError.
OptimizerKind parse_optimizer(std::string_view text);

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  MLPSpec spec;
  double gamma = 0.99;
  double eta = 3e-4;
  OptimizerKind optimizer = OptimizerKind::adam;
  AdamSettings adam;
  std::size_t steps = 1000;
  std::uint64_t seed = 0;
  /// Decoupled: theta <- theta - eta * weight_decay * theta after each update.
  double weight_decay = 0.0;
  /// Target params follow theta_tgt <- (1 - tau) theta_tgt + tau theta.
  bool use_ema = false;
  double ema_tau = 0.005;
  /// 0 means full batch.
  std::size_t batch_size = 0;
  std::size_t record_every = 1;
  /// Kernel diagnostics (SEEM, NTK cosine) on records whose step is a
  /// multiple of this; 0 disables them.
  std::size_t kernel_every = 0;
  double diverge_threshold = 1e6;
  InitOptions init;
  /// Replaces the seeded initialization when set.
  std::optional<Params> initial_params;

  /// Throws ConfigError.
  void validate() const;
};

/// Bootstrapped regression targets q_bar_i = r_i + gamma max_a' Q(s'_i, a')
/// and the argmax inputs X*_i = (s'_i, enc(a*_i)).
struct TargetVector {
  std::vector<double> q_bar;
  std::vector<std::size_t> actions;
  Mat next_inputs;
};

/// Exhaustive argmax over the action set; ties go to the lowest index.
/// Throws CrashError on a non-finite Q value.
TargetVector compute_targets(const Network& net, std::span<const double> theta, const Dataset& d,
                             double gamma);
TargetVector compute_targets(const MLPSpec& spec, const Params& params, const Dataset& d,
                             double gamma);

/// SGD or Adam with decoupled weight decay. Owns the Adam moments.
class Optimizer {
 public:
  Optimizer(const TrainConfig& config, std::size_t param_count);

  void apply(std::span<double> theta, std::span<const double> grad);
  std::size_t steps_taken() const noexcept { return t_; }

 private:
  OptimizerKind kind_;
  AdamSettings adam_;
  double eta_;
  double weight_decay_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

struct TdGradient {
  std::vector<double> grad;
  /// f(x_i) for each batch entry, in batch order.
  std::vector<double> q;
};

/// Gradient of 0.5 * mean_i (f(x_i) - q_bar_i)^2 over `batch` (all of X when
/// empty).
TdGradient td_gradient(const Network& net, std::span<const double> theta,
                       const TargetVector& targets, const Mat& inputs,
                       std::span<const std::size_t> batch = {});

/// One optimizer step. Throws CrashError when the gradient is non-finite.
Params td_step(const Network& net, const Params& params, const TargetVector& targets,
               const Mat& inputs, Optimizer& optimizer, std::span<const std::size_t> batch = {});
/// Single step with fresh optimizer state.
Params td_step(const MLPSpec& spec, const Params& params, const TargetVector& targets,
               const Dataset& d, const TrainConfig& config);

struct TrainRecord {
  std::size_t step = 0;
  double q_mean = 0.0;
  double q_abs_mean = 0.0;
  double u_norm = 0.0;
  double theta_norm = 0.0;
  std::optional<double> seem_raw;
  std::optional<double> seem_norm;
  std::optional<double> ntk_cos;
  std::optional<double> action_cos;
  std::optional<double> extreme_ratio;
  bool crashed = false;

  friend bool operator==(const TrainRecord&, const TrainRecord&) = default;
};

struct TrainTrace {
  std::vector<TrainRecord> records;
  std::optional<std::size_t> crash_step;
  /// Last parameters that passed the crash check.
  Params final_params;
  std::size_t final_step = 0;
  std::size_t param_count = 0;
  std::size_t layers = 0;

  bool diverged() const noexcept { return crash_step.has_value(); }
  friend bool operator==(const TrainTrace&, const TrainTrace&) = default;
};

/// Read-only view handed to observers at every recorded, uncrashed step.
struct Snapshot {
  std::size_t step;
  std::span<const double> theta;
  const TargetVector& targets;
  std::span<const double> q;
};
using Observer = std::function<void(const Snapshot&)>;

/// Q-value iteration for config.steps updates or until crash. A crash is any
/// non-finite value or mean |Q| over the dataset above diverge_threshold; it is
/// recorded as a final crashed row.
TrainTrace run(const TrainConfig& config, const Dataset& d, const Observer& observer = {});

/// Linear value model on Baird features, optionally behind an affine input
/// LayerNorm, starting from the classic weights with zero bias, unit gain and
/// zero shift. Full-batch SGD on baird_dataset; runs stop once mean |V|
/// passes 1e12.
TrainConfig baird_config(const BairdInstance& inst, bool front_layernorm, double eta = 0.01,
                         std::size_t steps = 20000);

/// Header: step,q_mean,u_norm,theta_norm,seem_raw,seem_norm,ntk_cos,action_cos,crashed
/// with `,extreme_ratio` appended when requested. Missing values are empty.
void write_trace_csv(std::ostream& out, const TrainTrace& trace, bool extreme_ratio = false);
/// Reads records back (crash_step from the crashed row). Throws ConfigError.
TrainTrace read_trace_csv(std::istream& in);

}  // namespace seemlab
