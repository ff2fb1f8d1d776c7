#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seemlab/diagnostics.hpp"
#include "seemlab/train.hpp"

namespace seemlab::cli {

inline constexpr const char* kSummaryFormat = "seemlab.summary";
inline constexpr int kSummaryVersion = 1;

struct AdamSlopes {
  double theta_slope = 0.0;
  double theta_slope_expected = 0.0;
  double q_loglog_slope = 0.0;
  double q_slope_expected = 0.0;

  friend bool operator==(const AdamSlopes&, const AdamSlopes&) = default;
};

/// Outcome of one (gamma, seed) run. Optional fields are written as null.
struct RunResult {
  double gamma = 0.0;
  std::uint64_t seed = 0;
  std::string optimizer;
  /// Equal to crash_step.has_value(): the crash check already includes the threshold.
  bool diverged = false;
  std::optional<std::size_t> crash_step;
  std::size_t final_step = 0;
  double final_q_abs_mean = 0.0;
  std::optional<std::size_t> t0;
  /// SEEM at t0, or at the last kernel record when t0 was not reached.
  std::optional<double> seem;
  std::optional<double> seem_norm;
  std::optional<std::size_t> seem_step;
  std::optional<double> predicted_t;
  std::optional<double> crash_fit_r2;
  std::optional<std::string> crash_fit_error;
  std::optional<AdamSlopes> adam;
  std::string trace_file;

  friend bool operator==(const RunResult&, const RunResult&) = default;
};

struct Aggregate {
  std::size_t runs = 0;
  std::size_t diverged = 0;
  /// Runs whose SEEM sign (> 0) matches the divergence outcome, over runs with a SEEM.
  std::optional<double> sign_agreement;
  /// |predicted_t - crash| / crash over diverged runs with a crash fit.
  std::optional<double> prediction_error_mean;
  std::optional<double> prediction_error_max;

  friend bool operator==(const Aggregate&, const Aggregate&) = default;
};

struct RunSummary {
  std::string command;
  std::vector<RunResult> runs;
  Aggregate aggregate;

  friend bool operator==(const RunSummary&, const RunSummary&) = default;
};

/// Fills the diagnostic fields of a result from a finished trace.
RunResult summarize_run(const TrainTrace& trace, double gamma, std::uint64_t seed,
                        const TrainConfig& config, const CriticalPointThresholds& thresholds);
Aggregate aggregate(const std::vector<RunResult>& runs);

std::string to_json(const RunSummary& summary);
/// Every field must be present (null where optional). Throws ConfigError.
RunSummary summary_from_json(const std::string& text);

}  // namespace seemlab::cli
