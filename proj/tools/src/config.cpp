#include "seemlab/cli/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <type_traits>

#include <nlohmann/json.hpp>

#include "seemlab/errors.hpp"

namespace seemlab::cli {

using nlohmann::json;

std::string_view to_string(Scenario s) noexcept {
  switch (s) {
    case Scenario::toy_nav:
      return "toy_nav";
    case Scenario::baird:
      return "baird";
  }
  return "?";
}

Scenario parse_scenario(std::string_view text) {
  if (text == "toy_nav" || text == "toy-nav") return Scenario::toy_nav;
  if (text == "baird") return Scenario::baird;
  throw ConfigError("unknown scenario '" + std::string(text) + "' (expected toy_nav or baird)");
}

namespace {

template <class T>
struct is_vector : std::false_type {};
template <class E>
struct is_vector<std::vector<E>> : std::true_type {};

[[noreturn]] void wrong_type(const json& v, const std::string& key) {
  throw ConfigError("config key '" + key + "' has the wrong type: " + v.dump());
}

template <class T>
T get_as(const json& v, const std::string& key) {
  if constexpr (is_vector<T>::value) {
    if (!v.is_array()) wrong_type(v, key);
    T out;
    for (const json& e : v) out.push_back(get_as<typename T::value_type>(e, key));
    return out;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) wrong_type(v, key);
    return v.get<bool>();
  } else if constexpr (std::is_unsigned_v<T>) {
    if (!v.is_number_unsigned()) wrong_type(v, key);
    return v.get<T>();
  } else if constexpr (std::is_arithmetic_v<T>) {
    if (!v.is_number()) wrong_type(v, key);
    return v.get<T>();
  } else {
    if (!v.is_string()) wrong_type(v, key);
    return v.get<T>();
  }
}

using Setter = std::function<void(ExperimentConfig&, const json&, const std::string&)>;

template <class T>
Setter field(T ExperimentConfig::*member) {
  return [member](ExperimentConfig& c, const json& v, const std::string& key) {
    c.*member = get_as<T>(v, key);
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"scenario",
       [](ExperimentConfig& c, const json& v, const std::string& k) {
         c.scenario = parse_scenario(get_as<std::string>(v, k));
       }},
      {"hidden", field(&ExperimentConfig::hidden)},
      {"norm",
       [](ExperimentConfig& c, const json& v, const std::string& k) {
         c.norm = parse_norm(get_as<std::string>(v, k));
       }},
      {"input_norm",
       [](ExperimentConfig& c, const json& v, const std::string& k) {
         c.input_norm = parse_norm(get_as<std::string>(v, k));
       }},
      {"bias_scale", field(&ExperimentConfig::bias_scale)},
      {"dataset_size", field(&ExperimentConfig::dataset_size)},
      {"dataset_fraction", field(&ExperimentConfig::dataset_fraction)},
      {"gamma", field(&ExperimentConfig::gamma)},
      {"sweep", field(&ExperimentConfig::sweep)},
      {"seeds", field(&ExperimentConfig::seeds)},
      {"optimizer",
       [](ExperimentConfig& c, const json& v, const std::string& k) {
         c.optimizer = parse_optimizer(get_as<std::string>(v, k));
       }},
      {"eta", field(&ExperimentConfig::eta)},
      {"steps", field(&ExperimentConfig::steps)},
      {"weight_decay", field(&ExperimentConfig::weight_decay)},
      {"use_ema", field(&ExperimentConfig::use_ema)},
      {"ema_tau", field(&ExperimentConfig::ema_tau)},
      {"batch_size", field(&ExperimentConfig::batch_size)},
      {"record_every", field(&ExperimentConfig::record_every)},
      {"kernel_every", field(&ExperimentConfig::kernel_every)},
      {"diverge_threshold", field(&ExperimentConfig::diverge_threshold)},
      {"ntk_cos_threshold", field(&ExperimentConfig::ntk_cos_threshold)},
      {"action_cos_threshold", field(&ExperimentConfig::action_cos_threshold)},
      {"consecutive", field(&ExperimentConfig::consecutive)},
      {"lambdas", field(&ExperimentConfig::lambdas)},
      {"x0", field(&ExperimentConfig::x0)},
      {"grid_lo", field(&ExperimentConfig::grid_lo)},
      {"grid_hi", field(&ExperimentConfig::grid_hi)},
      {"grid_points", field(&ExperimentConfig::grid_points)},
      {"checkpoint",
       [](ExperimentConfig& c, const json& v, const std::string& k) {
         if (v.is_null()) {
           c.checkpoint.reset();
         } else {
           c.checkpoint = get_as<std::string>(v, k);
         }
       }},
      {"trace",
       [](ExperimentConfig& c, const json& v, const std::string& k) {
         if (v.is_null()) {
           c.trace.reset();
         } else {
           c.trace = get_as<std::string>(v, k);
         }
       }},
      {"out",
       [](ExperimentConfig& c, const json& v, const std::string& k) {
         c.out = get_as<std::string>(v, k);
       }},
      {"emit_svg", field(&ExperimentConfig::emit_svg)},
  };
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  for (std::size_t h : hidden) {
    if (h == 0) fail("hidden widths must be positive");
  }
  if (dataset_size == 0) fail("dataset_size must be positive");
  if (!(dataset_fraction > 0.0 && dataset_fraction <= 1.0)) fail("dataset_fraction must be in (0, 1]");
  for (double g : gammas()) {
    if (!(g >= 0.0 && g < 1.0)) fail("gamma values must be in [0, 1)");
  }
  if (seeds.empty()) fail("seeds must be nonempty");
  if (!(eta > 0.0)) fail("eta must be positive");
  if (record_every == 0) fail("record_every must be positive");
  if (!(diverge_threshold > 0.0)) fail("diverge_threshold must be positive");
  if (consecutive == 0) fail("consecutive must be positive");
  if (x0.size() != 2) fail("x0 must have two entries");
  if (grid_points == 0 || !(grid_hi >= grid_lo)) fail("invalid grid");
  if (out.empty()) fail("out must be nonempty");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  const auto& table = setters();
  for (const auto& [key, value] : j.items()) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(c, value, key);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str());
}

std::string to_json(const ExperimentConfig& c) {
  json j;
  j["scenario"] = std::string(to_string(c.scenario));
  j["hidden"] = c.hidden;
  j["norm"] = std::string(to_string(c.norm));
  j["input_norm"] = std::string(to_string(c.input_norm));
  j["bias_scale"] = c.bias_scale;
  j["dataset_size"] = c.dataset_size;
  j["dataset_fraction"] = c.dataset_fraction;
  j["gamma"] = c.gamma;
  j["sweep"] = c.sweep;
  j["seeds"] = c.seeds;
  j["optimizer"] = std::string(to_string(c.optimizer));
  j["eta"] = c.eta;
  j["steps"] = c.steps;
  j["weight_decay"] = c.weight_decay;
  j["use_ema"] = c.use_ema;
  j["ema_tau"] = c.ema_tau;
  j["batch_size"] = c.batch_size;
  j["record_every"] = c.record_every;
  j["kernel_every"] = c.kernel_every;
  j["diverge_threshold"] = c.diverge_threshold;
  j["ntk_cos_threshold"] = c.ntk_cos_threshold;
  j["action_cos_threshold"] = c.action_cos_threshold;
  j["consecutive"] = c.consecutive;
  j["lambdas"] = c.lambdas;
  j["x0"] = c.x0;
  j["grid_lo"] = c.grid_lo;
  j["grid_hi"] = c.grid_hi;
  j["grid_points"] = c.grid_points;
  j["checkpoint"] = c.checkpoint ? json(c.checkpoint->string()) : json(nullptr);
  j["trace"] = c.trace ? json(c.trace->string()) : json(nullptr);
  j["out"] = c.out.string();
  j["emit_svg"] = c.emit_svg;
  return j.dump(2);
}

MLPSpec make_spec(const ExperimentConfig& c, std::optional<std::size_t> input_dim) {
  std::size_t in = 0;
  if (input_dim) {
    in = *input_dim;
  } else if (c.scenario == Scenario::baird) {
    in = BairdInstance::kFeatures;
  } else {
    in = toy_nav_env().input_dim();
  }
  MLPSpec spec;
  spec.layer_dims.push_back(in);
  spec.layer_dims.insert(spec.layer_dims.end(), c.hidden.begin(), c.hidden.end());
  spec.layer_dims.push_back(1);
  spec.norm = c.norm;
  spec.input_norm = c.input_norm;
  spec.validate();
  return spec;
}

TrainConfig make_train_config(const ExperimentConfig& c, double gamma, std::uint64_t seed) {
  TrainConfig t;
  t.spec = make_spec(c);
  t.gamma = gamma;
  t.eta = c.eta;
  t.optimizer = c.optimizer;
  t.steps = c.steps;
  t.seed = seed;
  t.weight_decay = c.weight_decay;
  t.use_ema = c.use_ema;
  t.ema_tau = c.ema_tau;
  t.batch_size = c.batch_size;
  t.record_every = c.record_every;
  t.kernel_every = c.kernel_every;
  t.diverge_threshold = c.diverge_threshold;
  t.init.bias_scale = c.bias_scale;
  t.validate();
  return t;
}

Dataset make_dataset(const ExperimentConfig& c, std::uint64_t seed) {
  Dataset d = c.scenario == Scenario::baird ? baird_dataset(BairdInstance{})
                                            : toy_nav_dataset(c.dataset_size, seed);
  if (c.dataset_fraction < 1.0) d = subsample(d, c.dataset_fraction, seed);
  return d;
}

CriticalPointThresholds make_thresholds(const ExperimentConfig& c) {
  return CriticalPointThresholds{c.ntk_cos_threshold, c.action_cos_threshold, c.consecutive};
}

}  // namespace seemlab::cli
