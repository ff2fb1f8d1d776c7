#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "seemlab/diagnostics.hpp"
#include "seemlab/envs.hpp"
#include "seemlab/train.hpp"

namespace seemlab::cli {

enum class Scenario { toy_nav, baird };

std::string_view to_string(Scenario s) noexcept;
/// Throws ConfigError.
Scenario parse_scenario(std::string_view text);

/// Everything one invocation needs. Loaded from a flat JSON object whose keys
/// match the field names below; unknown keys are a ConfigError.
struct ExperimentConfig {
  Scenario scenario = Scenario::toy_nav;

  // Network. Input and output widths follow from the scenario.
  std::vector<std::size_t> hidden{256};
  Norm norm = Norm::none;
  Norm input_norm = Norm::none;
  double bias_scale = 0.0;

  // Data.
  std::size_t dataset_size = 100;
  /// Kept share of the transitions, in (0, 1].
  double dataset_fraction = 1.0;

  // Training.
  double gamma = 0.99;
  /// Replaces `gamma` when nonempty.
  std::vector<double> sweep;
  std::vector<std::uint64_t> seeds{0};
  OptimizerKind optimizer = OptimizerKind::adam;
  double eta = 3e-4;
  std::size_t steps = 20000;
  double weight_decay = 0.0;
  bool use_ema = false;
  double ema_tau = 0.005;
  std::size_t batch_size = 0;
  std::size_t record_every = 10;
  std::size_t kernel_every = 100;
  double diverge_threshold = 1e6;

  // Diagnostics.
  double ntk_cos_threshold = 0.99;
  double action_cos_threshold = 0.999;
  std::size_t consecutive = 5;
  std::vector<double> lambdas{1.0, 5.0, 10.0};
  std::vector<double> x0{0.1, 0.2};
  double grid_lo = -4.0;
  double grid_hi = 4.0;
  std::size_t grid_points = 81;
  /// Checkpoint JSON used by homogeneity and ntk-map instead of training.
  std::optional<std::filesystem::path> checkpoint;
  /// Trace CSV used by predict-crash and adam-check instead of training.
  std::optional<std::filesystem::path> trace;

  // Output.
  std::filesystem::path out = "seemlab_out";
  bool emit_svg = false;

  std::vector<double> gammas() const { return sweep.empty() ? std::vector<double>{gamma} : sweep; }
  /// Throws ConfigError.
  void validate() const;
};

/// Throws ConfigError on malformed JSON, unknown keys or wrong value types.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Round-trips through parse_config.
std::string to_json(const ExperimentConfig& config);

/// Network spec for the scenario: toy-nav takes (state, action encoding)
/// inputs, Baird takes its 8 features. `input_dim` overrides the scenario.
MLPSpec make_spec(const ExperimentConfig& config, std::optional<std::size_t> input_dim = {});
TrainConfig make_train_config(const ExperimentConfig& config, double gamma, std::uint64_t seed);
Dataset make_dataset(const ExperimentConfig& config, std::uint64_t seed);
CriticalPointThresholds make_thresholds(const ExperimentConfig& config);

}  // namespace seemlab::cli
