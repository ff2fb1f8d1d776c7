#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seemlab/cli/commands.hpp"
#include "seemlab/cli/config.hpp"
#include "seemlab/errors.hpp"

namespace {

using namespace seemlab;
using namespace seemlab::cli;

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<double> gammas;
  std::optional<std::string> norm;
  std::optional<std::string> optimizer;
  std::optional<std::size_t> steps;
  std::optional<double> eta;
  std::optional<std::string> trace;
  std::optional<std::string> checkpoint;
  bool emit_svg = false;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config_path, "JSON config file");
  sub->add_option("--seed", o.seed, "single seed, replaces the config's seed list");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--gamma", o.gammas, "discount; repeat to sweep")->take_all()->expected(1, -1);
  sub->add_option("--norm", o.norm, "none, layernorm, layernorm-no-affine or weightnorm");
  sub->add_option("--optimizer", o.optimizer, "sgd or adam");
  sub->add_option("--steps", o.steps, "training steps");
  sub->add_option("--eta", o.eta, "learning rate");
  sub->add_option("--trace", o.trace, "trace CSV to analyze instead of training");
  sub->add_option("--checkpoint", o.checkpoint, "checkpoint JSON to analyze instead of training");
  sub->add_flag("--svg", o.emit_svg, "also write SVG plots");
}

// Flags win over the config file.
ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  if (o.seed) c.seeds = {*o.seed};
  if (o.out) c.out = *o.out;
  if (!o.gammas.empty()) {
    c.gamma = o.gammas.front();
    c.sweep = o.gammas;
  }
  if (o.norm) c.norm = parse_norm(*o.norm);
  if (o.optimizer) c.optimizer = parse_optimizer(*o.optimizer);
  if (o.steps) c.steps = *o.steps;
  if (o.eta) c.eta = *o.eta;
  if (o.trace) c.trace = *o.trace;
  if (o.checkpoint) c.checkpoint = *o.checkpoint;
  if (o.emit_svg) c.emit_svg = true;
  c.validate();
  return c;
}

void print_summary(const RunSummary& s) {
  for (const RunResult& r : s.runs) {
    std::cout << "gamma " << r.gamma << " seed " << r.seed << ": "
              << (r.diverged ? "diverged at step " + std::to_string(*r.crash_step) : "stable");
    if (r.seem) std::cout << ", SEEM " << *r.seem;
    if (r.predicted_t) std::cout << ", predicted crash " << *r.predicted_t;
    std::cout << '\n';
  }
  if (s.aggregate.sign_agreement) {
    std::cout << "SEEM sign agreement: " << *s.aggregate.sign_agreement << '\n';
  }
}

int dispatch(const std::string& name, const ExperimentConfig& c) {
  if (name == "run" || name == "seem-sweep") {
    print_summary(name == "run" ? cmd_run(c) : cmd_seem_sweep(c));
  } else if (name == "predict-crash") {
    const CrashPrediction p = cmd_predict_crash(c);
    std::cout << "predicted crash step " << p.fit.predicted_t << " (R^2 " << p.fit.fit.r_squared
              << ", window " << p.fit.t_start << ".." << p.fit.t_end << ")";
    if (p.observed_crash) std::cout << ", observed " << *p.observed_crash;
    std::cout << '\n';
  } else if (name == "adam-check") {
    const AdamCheck a = cmd_adam_check(c);
    std::cout << "t0 " << a.t0 << ": ||theta|| slope " << a.report.theta_slope << " (expected "
              << a.report.theta_slope_expected << "), log Q / log t slope "
              << a.report.q_loglog_slope << " (expected " << a.report.q_slope_expected << ")\n";
  } else if (name == "homogeneity") {
    for (const HomogeneityRow& r : cmd_homogeneity(c)) {
      std::cout << "lambda " << r.lambda << ": output " << r.output_ratio << ", grad "
                << r.grad_scale << ", ntk " << r.ntk_scale << ", cosine " << r.ntk_cos << '\n';
    }
  } else if (name == "ntk-map") {
    const NtkMap m = cmd_ntk_map(c);
    std::cout << "wrote " << m.axis.size() * m.axis.size() << " grid values, k(x0,x0) = "
              << m.self_value << " of max\n";
  } else if (name == "baird") {
    for (const BairdVariant& v : cmd_baird(c)) {
      std::cout << v.name << ": " << (v.diverged ? "diverged" : "stable") << ", ||theta|| "
                << v.final_theta_norm << ", TD error " << v.final_td_error << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seemlab: divergence diagnostics for offline Q-value iteration"};
  app.require_subcommand(1);
  Overrides o;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"run", "train every (gamma, seed) pair and write traces plus summary.json"},
      {"seem-sweep", "sweep gamma and compare SEEM sign with divergence"},
      {"predict-crash", "fit the SGD terminal-time law"},
      {"adam-check", "fit the Adam growth laws after the critical point"},
      {"homogeneity", "check output, gradient and NTK scaling under theta -> lambda theta"},
      {"ntk-map", "NTK k(x0, x) over a 2-D grid"},
      {"baird", "Baird counterexample with and without LayerNorm"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const ExperimentConfig config = resolve(o);
    return dispatch(app.get_subcommands().front()->get_name(), config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  }
}
