#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "seemlab/cli/config.hpp"
#include "seemlab/cli/summary.hpp"
#include "seemlab/diagnostics.hpp"

namespace seemlab::cli {

// Every command writes only under config.out, creating it when missing, and
// overwrites its own files on re-runs.

/// Trains every (gamma, seed) pair. Writes trace_<stem>.csv and
/// checkpoint_<stem>.json per run and summary.json once all runs finish.
RunSummary cmd_run(const ExperimentConfig& config);

/// cmd_run over the sweep list plus seem_sweep.csv
/// (gamma,seed,seem,seem_norm,seem_step,t0,diverged). Needs a nonempty sweep.
RunSummary cmd_seem_sweep(const ExperimentConfig& config);

struct CrashPrediction {
  CrashFit fit;
  std::optional<std::size_t> observed_crash;
};

/// SGD terminal-time fit on config.trace, or on a fresh run of the first
/// (gamma, seed). Writes crash_fit.json.
CrashPrediction cmd_predict_crash(const ExperimentConfig& config);

struct AdamCheck {
  AdamGrowthReport report;
  std::size_t t0 = 0;
};

/// Adam growth-law fit over the post-t0 window. Writes adam_check.json.
AdamCheck cmd_adam_check(const ExperimentConfig& config);

/// Homogeneity table on config.checkpoint, or on the final parameters of a
/// fresh run. Writes homogeneity.csv.
std::vector<HomogeneityRow> cmd_homogeneity(const ExperimentConfig& config);

/// NTK map of config.checkpoint, or of a seeded 2-D input network built from
/// the config. Writes ntk_map_<norm>.csv (and .svg when emit_svg).
NtkMap cmd_ntk_map(const ExperimentConfig& config);

struct BairdVariant {
  std::string name;
  bool diverged = false;
  std::optional<std::size_t> crash_step;
  double final_theta_norm = 0.0;
  /// ||u|| at the last uncrashed record.
  double final_td_error = 0.0;
  TrainTrace trace;
};

/// Linear Baird value learning with and without the LayerNorm front layer,
/// using config eta, steps and the first gamma; the divergence threshold is
/// baird_config's. Writes baird_<name>.csv and baird.json.
std::vector<BairdVariant> cmd_baird(const ExperimentConfig& config);

/// File stem for one run, e.g. "gamma0.99_seed3".
std::string run_stem(double gamma, std::uint64_t seed);

}  // namespace seemlab::cli
