#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "seemlab/linalg.hpp"
#include "seemlab/rng.hpp"

namespace seemlab {

/// Static description of an environment's state and finite action set.
///
/// Network inputs are x = (s, enc(a)). With action_dim = 0 the model is a
/// state-value function and every action maps to the same input.
struct EnvInfo {
  std::string name;
  std::size_t state_dim = 0;
  std::size_t action_count = 0;
  std::size_t action_dim = 0;
  std::vector<double> action_encodings;  // action_count x action_dim, row-major

  std::size_t input_dim() const noexcept { return state_dim + action_dim; }
  std::span<const double> encoding(std::size_t a) const;
  void write_input(std::span<const double> s, std::size_t a, std::span<double> out) const;
  std::vector<double> input(std::span<const double> s, std::size_t a) const;

  friend bool operator==(const EnvInfo&, const EnvInfo&) = default;
};

struct Transition {
  std::vector<double> s;
  std::size_t a = 0;
  std::vector<double> s_next;
  double r = 0.0;

  friend bool operator==(const Transition&, const Transition&) = default;
};

struct Dataset {
  EnvInfo env;
  std::uint64_t seed = 0;
  std::vector<Transition> transitions;

  std::size_t size() const noexcept { return transitions.size(); }
  /// X: row i is (s_i, enc(a_i)).
  Mat inputs() const;
  std::vector<double> rewards() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline constexpr int kDatasetVersion = 1;

/// JSON lines: a header {"format":"seemlab.dataset","version":1,"env":{...},
/// "seed":N,"size":M} followed by one {"s":[..],"a":k,"s_next":[..],"r":x}
/// per transition.
void write_jsonl(std::ostream& out, const Dataset& d);
/// Throws ConfigError on a malformed file.
Dataset read_jsonl(std::istream& in);

// Toy 2-D navigation.

inline constexpr double kToyNavStep = 0.01;

/// 8 compass directions, counterclockwise from +x. Encodings are the unit-box
/// direction vectors in {-1,0,1}^2; the state moves by kToyNavStep per axis.
EnvInfo toy_nav_env();
std::vector<double> toy_nav_step(std::span<const double> s, std::size_t a);
/// States uniform in [-1,1]^2, actions uniform, rewards 0.
Dataset toy_nav_dataset(std::size_t m, std::uint64_t seed);

/// Uniform sample without replacement of ceil(fraction * M) transitions.
/// Throws ConfigError when fraction is outside (0,1] or the sample is empty.
Dataset subsample(const Dataset& d, double fraction, std::uint64_t seed);

// Baird's seven-state star counterexample. States are numbered 1..7.

enum class BairdPolicy { behavior, target };

struct BairdInstance {
  static constexpr std::size_t kStates = 7;
  static constexpr std::size_t kFeatures = 8;
  static constexpr std::size_t kDashed = 0;
  static constexpr std::size_t kSolid = 1;
  static constexpr double kGamma = 0.99;
  static constexpr double kDashedProbability = 6.0 / 7.0;

  /// States 1..6: 2 e_i + e_8. State 7: e_7 + 2 e_8.
  std::vector<double> features(std::size_t state) const;
  /// 7 x 8, row i-1 is features(i).
  Mat feature_matrix() const;
  /// State whose feature vector equals `phi`; throws DimensionError otherwise.
  std::size_t state_of(std::span<const double> phi) const;
  /// (1, 1, 1, 1, 1, 1, 10, 1): the large weight is on e_7.
  std::vector<double> initial_weights() const;
  EnvInfo env() const;
};

/// One step from `state` (1..7). Behavior picks dashed with probability 6/7;
/// target always picks solid. Dashed leads uniformly to 1..6, solid to 7.
Transition baird_step(const BairdInstance& inst, std::size_t state, BairdPolicy policy, Rng& rng);
Transition baird_step(const BairdInstance& inst, std::size_t state, BairdPolicy policy,
                      std::uint64_t seed);

/// Expected-update dataset under the target policy: one solid transition per state.
Dataset baird_dataset(const BairdInstance& inst);

}  // namespace seemlab
