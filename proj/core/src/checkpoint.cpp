#include "seemlab/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "seemlab/errors.hpp"

namespace seemlab {

using nlohmann::json;

std::string to_json(const Checkpoint& ckpt) {
  json j;
  j["format"] = "seemlab.checkpoint";
  j["version"] = kCheckpointVersion;
  j["spec"] = {{"layer_dims", ckpt.spec.layer_dims},
               {"norm", std::string(to_string(ckpt.spec.norm))},
               {"input_norm", std::string(to_string(ckpt.spec.input_norm))}};
  j["step"] = ckpt.step;
  j["rng_state"] = ckpt.rng_state;
  j["theta"] = ckpt.params.theta;
  return j.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
  Checkpoint c;
  try {
    const json j = json::parse(text);
    if (j.at("format") != "seemlab.checkpoint") throw ConfigError("checkpoint: wrong format tag");
    if (j.at("version") != kCheckpointVersion) {
      throw ConfigError("checkpoint: unsupported version " + j.at("version").dump());
    }
    const json& s = j.at("spec");
    c.spec.layer_dims = s.at("layer_dims").get<std::vector<std::size_t>>();
    c.spec.norm = parse_norm(s.at("norm").get<std::string>());
    c.spec.input_norm = parse_norm(s.at("input_norm").get<std::string>());
    c.step = j.at("step").get<std::uint64_t>();
    c.rng_state = j.at("rng_state").get<std::string>();
    c.params.theta = j.at("theta").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
  c.spec.validate();
  if (c.params.size() != c.spec.param_count()) {
    throw ConfigError("checkpoint: theta length does not match spec");
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (!ckpt.params.all_finite()) throw CrashError("save_checkpoint: parameters are not finite");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("save_checkpoint: cannot open " + path.string());
  out << to_json(ckpt) << '\n';
  if (!out) throw Error("save_checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("load_checkpoint: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace seemlab
