#include "seemlab/envs.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "seemlab/errors.hpp"

namespace seemlab {

using nlohmann::json;

std::span<const double> EnvInfo::encoding(std::size_t a) const {
  if (a >= action_count) throw DimensionError("EnvInfo: action index out of range");
  return std::span<const double>(action_encodings).subspan(a * action_dim, action_dim);
}

void EnvInfo::write_input(std::span<const double> s, std::size_t a, std::span<double> out) const {
  if (s.size() != state_dim || out.size() != input_dim()) {
    throw DimensionError("EnvInfo::write_input: state or output has wrong length");
  }
  std::copy(s.begin(), s.end(), out.begin());
  const auto enc = encoding(a);
  std::copy(enc.begin(), enc.end(), out.begin() + static_cast<std::ptrdiff_t>(state_dim));
}

std::vector<double> EnvInfo::input(std::span<const double> s, std::size_t a) const {
  std::vector<double> x(input_dim());
  write_input(s, a, x);
  return x;
}

Mat Dataset::inputs() const {
  Mat x(size(), env.input_dim());
  for (std::size_t i = 0; i < size(); ++i) {
    env.write_input(transitions[i].s, transitions[i].a, x.row(i));
  }
  return x;
}

std::vector<double> Dataset::rewards() const {
  std::vector<double> r(size());
  for (std::size_t i = 0; i < size(); ++i) r[i] = transitions[i].r;
  return r;
}

void write_jsonl(std::ostream& out, const Dataset& d) {
  json header = {{"format", "seemlab.dataset"},
                 {"version", kDatasetVersion},
                 {"env",
                  {{"name", d.env.name},
                   {"state_dim", d.env.state_dim},
                   {"action_count", d.env.action_count},
                   {"action_dim", d.env.action_dim},
                   {"action_encodings", d.env.action_encodings}}},
                 {"seed", d.seed},
                 {"size", d.size()}};
  out << header.dump() << '\n';
  for (const Transition& t : d.transitions) {
    json line = {{"s", t.s}, {"a", t.a}, {"s_next", t.s_next}, {"r", t.r}};
    out << line.dump() << '\n';
  }
}

Dataset read_jsonl(std::istream& in) {
  Dataset d;
  std::string line;
  try {
    if (!std::getline(in, line)) throw ConfigError("dataset: missing header line");
    const json h = json::parse(line);
    if (h.at("format") != "seemlab.dataset") throw ConfigError("dataset: wrong format tag");
    if (h.at("version") != kDatasetVersion) {
      throw ConfigError("dataset: unsupported version " + h.at("version").dump());
    }
    const json& e = h.at("env");
    d.env.name = e.at("name").get<std::string>();
    d.env.state_dim = e.at("state_dim").get<std::size_t>();
    d.env.action_count = e.at("action_count").get<std::size_t>();
    d.env.action_dim = e.at("action_dim").get<std::size_t>();
    d.env.action_encodings = e.at("action_encodings").get<std::vector<double>>();
    d.seed = h.at("seed").get<std::uint64_t>();
    const auto size = h.at("size").get<std::size_t>();
    if (d.env.action_encodings.size() != d.env.action_count * d.env.action_dim) {
      throw ConfigError("dataset: action encodings do not match action_count x action_dim");
    }
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json t = json::parse(line);
      Transition tr{t.at("s").get<std::vector<double>>(), t.at("a").get<std::size_t>(),
                    t.at("s_next").get<std::vector<double>>(), t.at("r").get<double>()};
      if (tr.s.size() != d.env.state_dim || tr.s_next.size() != d.env.state_dim ||
          tr.a >= d.env.action_count) {
        throw ConfigError("dataset: transition " + std::to_string(d.size()) +
                          " does not match the env header");
      }
      d.transitions.push_back(std::move(tr));
    }
    if (d.size() != size) throw ConfigError("dataset: header size does not match line count");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("dataset: ") + e.what());
  }
  if (d.transitions.empty()) throw ConfigError("dataset: no transitions");
  return d;
}

EnvInfo toy_nav_env() {
  EnvInfo env;
  env.name = "toy_nav";
  env.state_dim = 2;
  env.action_count = 8;
  env.action_dim = 2;
  env.action_encodings = {1, 0, 1, 1, 0, 1, -1, 1, -1, 0, -1, -1, 0, -1, 1, -1};
  return env;
}

std::vector<double> toy_nav_step(std::span<const double> s, std::size_t a) {
  static const EnvInfo env = toy_nav_env();
  if (s.size() != 2) throw DimensionError("toy_nav_step: state must be 2-D");
  const auto enc = env.encoding(a);
  return {s[0] + kToyNavStep * enc[0], s[1] + kToyNavStep * enc[1]};
}

Dataset toy_nav_dataset(std::size_t m, std::uint64_t seed) {
  if (m == 0) throw ConfigError("toy_nav_dataset: m must be >= 1");
  Dataset d;
  d.env = toy_nav_env();
  d.seed = seed;
  Rng rng(seed);
  d.transitions.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    Transition t;
    t.s = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    t.a = rng.index(d.env.action_count);
    t.s_next = toy_nav_step(t.s, t.a);
    t.r = 0.0;
    d.transitions.push_back(std::move(t));
  }
  return d;
}

Dataset subsample(const Dataset& d, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("subsample: fraction must lie in (0, 1]");
  }
  const double want = fraction * static_cast<double>(d.size());
  if (want < 1.0) throw ConfigError("subsample: fraction * M < 1 leaves an empty dataset");
  const auto k = std::min(d.size(), static_cast<std::size_t>(std::ceil(want - 1e-9)));

  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(idx[i], idx[i + rng.index(d.size() - i)]);
  }
  Dataset out;
  out.env = d.env;
  out.seed = seed;
  out.transitions.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.transitions.push_back(d.transitions[idx[i]]);
  return out;
}

std::vector<double> BairdInstance::features(std::size_t state) const {
  if (state < 1 || state > kStates) throw DimensionError("Baird: state must be in 1..7");
  std::vector<double> phi(kFeatures, 0.0);
  if (state < kStates) {
    phi[state - 1] = 2.0;
    phi[7] = 1.0;
  } else {
    phi[6] = 1.0;
    phi[7] = 2.0;
  }
  return phi;
}

Mat BairdInstance::feature_matrix() const {
  Mat m(kStates, kFeatures);
  for (std::size_t s = 1; s <= kStates; ++s) {
    const auto phi = features(s);
    std::copy(phi.begin(), phi.end(), m.row(s - 1).begin());
  }
  return m;
}

std::size_t BairdInstance::state_of(std::span<const double> phi) const {
  for (std::size_t s = 1; s <= kStates; ++s) {
    const auto f = features(s);
    if (std::equal(f.begin(), f.end(), phi.begin(), phi.end())) return s;
  }
  throw DimensionError("Baird: vector is not a state feature");
}

std::vector<double> BairdInstance::initial_weights() const { return {1, 1, 1, 1, 1, 1, 10, 1}; }

EnvInfo BairdInstance::env() const {
  EnvInfo env;
  env.name = "baird";
  env.state_dim = kFeatures;
  env.action_count = 2;
  env.action_dim = 0;
  return env;
}

Transition baird_step(const BairdInstance& inst, std::size_t state, BairdPolicy policy, Rng& rng) {
  Transition t;
  t.s = inst.features(state);
  const bool dashed = policy == BairdPolicy::behavior && rng.bernoulli(BairdInstance::kDashedProbability);
  t.a = dashed ? BairdInstance::kDashed : BairdInstance::kSolid;
  const std::size_t next = dashed ? 1 + rng.index(6) : BairdInstance::kStates;
  t.s_next = inst.features(next);
  t.r = 0.0;
  return t;
}

Transition baird_step(const BairdInstance& inst, std::size_t state, BairdPolicy policy,
                      std::uint64_t seed) {
  Rng rng(seed);
  return baird_step(inst, state, policy, rng);
}

Dataset baird_dataset(const BairdInstance& inst) {
  Dataset d;
  d.env = inst.env();
  d.seed = 0;
  Rng unused(0);
  for (std::size_t s = 1; s <= BairdInstance::kStates; ++s) {
    d.transitions.push_back(baird_step(inst, s, BairdPolicy::target, unused));
  }
  return d;
}

}  // namespace seemlab
