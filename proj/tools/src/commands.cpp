#include "seemlab/cli/commands.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "seemlab/checkpoint.hpp"
#include "seemlab/cli/pool.hpp"
#include "seemlab/errors.hpp"
#include "seemlab/svg.hpp"

namespace seemlab::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_for_write(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_for_write(path);
  out << text;
}

TrainTrace load_trace(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace " + path.string());
  return read_trace_csv(in);
}

void write_trace(const fs::path& path, const TrainTrace& trace) {
  auto out = open_for_write(path);
  write_trace_csv(out, trace);
}

void write_trace_svg(const fs::path& path, const TrainTrace& trace, const std::string& title) {
  PlotSeries q{"mean |Q|", {}, {}};
  PlotSeries u{"||u||", {}, {}};
  for (const TrainRecord& r : trace.records) {
    if (r.crashed) continue;
    q.xs.push_back(static_cast<double>(r.step));
    q.ys.push_back(r.q_abs_mean);
    u.xs.push_back(static_cast<double>(r.step));
    u.ys.push_back(r.u_norm);
  }
  PlotOptions o;
  o.title = title;
  o.x_label = "step";
  o.y_label = "log10 value";
  o.log_y = true;
  write_text(path, line_plot_svg({q, u}, o));
}

struct Job {
  double gamma;
  std::uint64_t seed;
};

std::vector<Job> jobs_for(const ExperimentConfig& config) {
  std::vector<Job> jobs;
  for (double g : config.gammas()) {
    for (std::uint64_t s : config.seeds) jobs.push_back({g, s});
  }
  return jobs;
}

TrainTrace train_one(const ExperimentConfig& config, double gamma, std::uint64_t seed,
                     TrainConfig* used = nullptr) {
  TrainConfig tc = make_train_config(config, gamma, seed);
  const Dataset d = make_dataset(config, seed);
  TrainTrace trace = run(tc, d);
  if (used) *used = std::move(tc);
  return trace;
}

RunSummary run_jobs(const ExperimentConfig& config, const std::string& command) {
  config.validate();
  ensure_dir(config.out);
  const auto jobs = jobs_for(config);
  std::vector<RunResult> results(jobs.size());
  parallel_for(jobs.size(), thread_budget(), [&](std::size_t i) {
    const Job& job = jobs[i];
    TrainConfig tc;
    const TrainTrace trace = train_one(config, job.gamma, job.seed, &tc);
    const std::string stem = run_stem(job.gamma, job.seed);
    RunResult r = summarize_run(trace, job.gamma, job.seed, tc, make_thresholds(config));
    r.trace_file = "trace_" + stem + ".csv";
    write_trace(config.out / r.trace_file, trace);
    save_checkpoint(Checkpoint{tc.spec, trace.final_params, trace.final_step, ""},
                    config.out / ("checkpoint_" + stem + ".json"));
    if (config.emit_svg) {
      write_trace_svg(config.out / ("trace_" + stem + ".svg"), trace, stem);
    }
    results[i] = std::move(r);
  });
  RunSummary s;
  s.command = command;
  s.runs = std::move(results);
  s.aggregate = aggregate(s.runs);
  write_text(config.out / "summary.json", to_json(s));
  return s;
}

json fit_json(const LineFit& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"r_squared", f.r_squared}};
}

}  // namespace

std::string run_stem(double gamma, std::uint64_t seed) {
  std::ostringstream os;
  os << "gamma" << gamma << "_seed" << seed;
  return os.str();
}

RunSummary cmd_run(const ExperimentConfig& config) { return run_jobs(config, "run"); }

RunSummary cmd_seem_sweep(const ExperimentConfig& config) {
  if (config.sweep.empty()) throw ConfigError("seem-sweep: the sweep list is empty");
  RunSummary s = run_jobs(config, "seem-sweep");
  auto out = open_for_write(config.out / "seem_sweep.csv");
  out.precision(17);
  out << "gamma,seed,seem,seem_norm,seem_step,t0,diverged\n";
  for (const RunResult& r : s.runs) {
    out << r.gamma << ',' << r.seed << ',';
    if (r.seem) out << *r.seem;
    out << ',';
    if (r.seem_norm) out << *r.seem_norm;
    out << ',';
    if (r.seem_step) out << *r.seem_step;
    out << ',';
    if (r.t0) out << *r.t0;
    out << ',' << (r.diverged ? 1 : 0) << '\n';
  }
  return s;
}

CrashPrediction cmd_predict_crash(const ExperimentConfig& config) {
  config.validate();
  ensure_dir(config.out);
  const std::size_t layers = make_spec(config).layers();
  TrainTrace trace;
  if (config.trace) {
    trace = load_trace(*config.trace);
  } else {
    if (config.optimizer != OptimizerKind::sgd) {
      throw ConfigError("predict-crash: the terminal-time law applies to SGD runs");
    }
    trace = train_one(config, config.gammas().front(), config.seeds.front());
    write_trace(config.out / "predict_crash_trace.csv", trace);
  }
  CrashPrediction p;
  p.observed_crash = trace.crash_step;
  p.fit = predict_crash_sgd(trace, layers);

  const json j = {{"layers", layers},
                  {"exponent", p.fit.exponent},
                  {"t_start", p.fit.t_start},
                  {"t_end", p.fit.t_end},
                  {"points", p.fit.points},
                  {"fit", fit_json(p.fit.fit)},
                  {"predicted_t", p.fit.predicted_t},
                  {"observed_crash", p.observed_crash ? json(*p.observed_crash) : json(nullptr)}};
  write_text(config.out / "crash_fit.json", j.dump(2) + "\n");

  if (config.emit_svg) {
    PlotSeries data{"||u||^-e", {}, {}};
    PlotSeries line{"fit", {}, {}};
    for (const TrainRecord& r : trace.records) {
      if (r.crashed || r.step < p.fit.t_start) continue;
      data.xs.push_back(static_cast<double>(r.step));
      data.ys.push_back(std::pow(r.u_norm, -p.fit.exponent));
    }
    for (double t : {static_cast<double>(p.fit.t_start), p.fit.predicted_t}) {
      line.xs.push_back(t);
      line.ys.push_back(p.fit.fit(t));
    }
    PlotOptions o;
    o.title = "terminal-time fit";
    o.x_label = "step";
    o.y_label = "||u||^-e";
    write_text(config.out / "crash_fit.svg", line_plot_svg({data, line}, o));
  }
  return p;
}

AdamCheck cmd_adam_check(const ExperimentConfig& config) {
  config.validate();
  ensure_dir(config.out);
  const MLPSpec spec = make_spec(config);
  TrainTrace trace;
  if (config.trace) {
    trace = load_trace(*config.trace);
    trace.param_count = spec.param_count();
  } else {
    if (config.optimizer != OptimizerKind::adam) {
      throw ConfigError("adam-check: the growth laws apply to Adam runs");
    }
    trace = train_one(config, config.gammas().front(), config.seeds.front());
    write_trace(config.out / "adam_check_trace.csv", trace);
  }
  const CriticalPoint cp = detect_critical_point(trace, make_thresholds(config));
  if (!cp.t0) throw FitError("adam-check: the critical point was not reached");
  AdamCheck c;
  c.t0 = *cp.t0;
  c.report = adam_growth_check(trace, config.eta, spec.param_count(), spec.layers(), {}, cp.t0);
  const AdamGrowthReport& r = c.report;
  const json j = {{"t0", c.t0},
                  {"t_start", r.t_start},
                  {"t_end", r.t_end},
                  {"theta_slope", r.theta_slope},
                  {"theta_slope_expected", r.theta_slope_expected},
                  {"q_loglog_slope", r.q_loglog_slope},
                  {"q_slope_expected", r.q_slope_expected},
                  {"theta_fit", fit_json(r.theta_fit)},
                  {"q_fit", fit_json(r.q_fit)}};
  write_text(config.out / "adam_check.json", j.dump(2) + "\n");
  return c;
}

std::vector<HomogeneityRow> cmd_homogeneity(const ExperimentConfig& config) {
  config.validate();
  ensure_dir(config.out);
  MLPSpec spec;
  Params params;
  if (config.checkpoint) {
    const Checkpoint ck = load_checkpoint(*config.checkpoint);
    spec = ck.spec;
    params = ck.params;
  } else {
    TrainConfig tc;
    const TrainTrace trace = train_one(config, config.gammas().front(), config.seeds.front(), &tc);
    spec = tc.spec;
    params = trace.final_params;
  }
  const Dataset d = make_dataset(config, config.seeds.front());
  if (d.env.input_dim() != spec.input_dim()) {
    throw ConfigError("homogeneity: checkpoint input width does not match the scenario");
  }
  const auto rows = homogeneity_check(spec, params, d.inputs(), config.lambdas);
  auto out = open_for_write(config.out / "homogeneity.csv");
  write_homogeneity_csv(out, rows);
  return rows;
}

NtkMap cmd_ntk_map(const ExperimentConfig& config) {
  config.validate();
  ensure_dir(config.out);
  MLPSpec spec;
  Params params;
  if (config.checkpoint) {
    const Checkpoint ck = load_checkpoint(*config.checkpoint);
    spec = ck.spec;
    params = ck.params;
  } else {
    spec = make_spec(config, 2);
    InitOptions io;
    io.bias_scale = config.bias_scale;
    params = init(spec, config.seeds.front(), io);
  }
  if (spec.input_dim() != 2) throw ConfigError("ntk-map: the network input must be 2-D");
  const NtkMap map =
      ntk_map(spec, params, config.x0, GridSpec{config.grid_lo, config.grid_hi, config.grid_points});
  const std::string stem = "ntk_map_" + std::string(to_string(spec.norm));
  {
    auto out = open_for_write(config.out / (stem + ".csv"));
    write_ntk_map_csv(out, map);
  }
  if (config.emit_svg) {
    write_text(config.out / (stem + ".svg"),
               heatmap_svg(map, "NTK k(x0, x), norm " + std::string(to_string(spec.norm))));
  }
  return map;
}

std::vector<BairdVariant> cmd_baird(const ExperimentConfig& config) {
  config.validate();
  ensure_dir(config.out);
  const BairdInstance inst;
  const Dataset d = baird_dataset(inst);
  std::vector<BairdVariant> out;
  json variants = json::array();
  for (const bool ln : {false, true}) {
    TrainConfig tc = baird_config(inst, ln, config.eta, config.steps);
    tc.gamma = config.gammas().front();
    BairdVariant v;
    v.name = ln ? "layernorm" : "plain";
    v.trace = run(tc, d);
    v.diverged = v.trace.diverged();
    v.crash_step = v.trace.crash_step;
    // The crashed row carries NaNs, so report the last finite one.
    for (auto it = v.trace.records.rbegin(); it != v.trace.records.rend(); ++it) {
      if (it->crashed) continue;
      v.final_theta_norm = it->theta_norm;
      v.final_td_error = it->u_norm;
      break;
    }
    if (v.crash_step && std::isfinite(v.trace.records.back().theta_norm)) {
      v.final_theta_norm = v.trace.records.back().theta_norm;
    }
    write_trace(config.out / ("baird_" + v.name + ".csv"), v.trace);
    variants.push_back({{"name", v.name},
                        {"diverged", v.diverged},
                        {"crash_step", v.crash_step ? json(*v.crash_step) : json(nullptr)},
                        {"final_theta_norm", v.final_theta_norm},
                        {"final_td_error", v.final_td_error}});
    out.push_back(std::move(v));
  }
  const json j = {{"format", "seemlab.baird"},
                  {"version", 1},
                  {"gamma", config.gammas().front()},
                  {"eta", config.eta},
                  {"steps", config.steps},
                  {"variants", variants}};
  write_text(config.out / "baird.json", j.dump(2) + "\n");
  if (config.emit_svg) {
    std::vector<PlotSeries> series;
    for (const BairdVariant& v : out) {
      PlotSeries s{v.name, {}, {}};
      for (const TrainRecord& r : v.trace.records) {
        s.xs.push_back(static_cast<double>(r.step));
        s.ys.push_back(r.theta_norm);
      }
      series.push_back(std::move(s));
    }
    PlotOptions o;
    o.title = "Baird: ||theta||";
    o.x_label = "step";
    o.y_label = "log10 ||theta||";
    o.log_y = true;
    write_text(config.out / "baird.svg", line_plot_svg(series, o));
  }
  return out;
}

}  // namespace seemlab::cli
