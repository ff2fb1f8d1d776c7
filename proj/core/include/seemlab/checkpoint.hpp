#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "seemlab/net.hpp"

namespace seemlab {

/// Snapshot of a training run.
///
/// JSON layout (version 1):
///   {"format": "seemlab.checkpoint", "version": 1,
///    "spec": {"layer_dims": [...], "norm": "...", "input_norm": "..."},
///    "step": N, "rng_state": "...", "theta": [...]}
/// Doubles are written in shortest round-trip form, so save/load is exact.
struct Checkpoint {
  MLPSpec spec;
  Params params;
  std::uint64_t step = 0;
  std::string rng_state;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr int kCheckpointVersion = 1;

std::string to_json(const Checkpoint& ckpt);
/// Throws ConfigError on schema or version mismatch.
Checkpoint checkpoint_from_json(const std::string& text);

/// Throws CrashError if the parameters are non-finite, Error on I/O failure.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace seemlab
