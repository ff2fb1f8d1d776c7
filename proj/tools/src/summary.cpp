#include "seemlab/cli/summary.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "seemlab/errors.hpp"

namespace seemlab::cli {

using nlohmann::json;

RunResult summarize_run(const TrainTrace& trace, double gamma, std::uint64_t seed,
                        const TrainConfig& config, const CriticalPointThresholds& thresholds) {
  RunResult r;
  r.gamma = gamma;
  r.seed = seed;
  r.optimizer = std::string(to_string(config.optimizer));
  r.diverged = trace.diverged();
  r.crash_step = trace.crash_step;
  r.final_step = trace.final_step;
  for (auto it = trace.records.rbegin(); it != trace.records.rend(); ++it) {
    if (!it->crashed) {
      r.final_q_abs_mean = it->q_abs_mean;
      break;
    }
  }

  const CriticalPoint cp = detect_critical_point(trace, thresholds);
  r.t0 = cp.t0;
  const TrainRecord* at = nullptr;
  if (cp.record_index) {
    at = &trace.records[*cp.record_index];
  } else {
    for (auto it = trace.records.rbegin(); it != trace.records.rend(); ++it) {
      if (it->seem_raw) {
        at = &*it;
        break;
      }
    }
  }
  if (at && at->seem_raw) {
    r.seem = at->seem_raw;
    r.seem_norm = at->seem_norm;
    r.seem_step = at->step;
  }

  if (config.optimizer == OptimizerKind::sgd && r.diverged) {
    try {
      const CrashFit fit = predict_crash_sgd(trace, trace.layers);
      r.predicted_t = fit.predicted_t;
      r.crash_fit_r2 = fit.fit.r_squared;
    } catch (const FitError& e) {
      r.crash_fit_error = e.what();
    }
  }
  if (config.optimizer == OptimizerKind::adam && r.diverged && cp.t0) {
    try {
      const AdamGrowthReport rep =
          adam_growth_check(trace, config.eta, trace.param_count, trace.layers, {}, cp.t0);
      r.adam = AdamSlopes{rep.theta_slope, rep.theta_slope_expected, rep.q_loglog_slope,
                          rep.q_slope_expected};
    } catch (const FitError&) {
      r.adam.reset();
    }
  }
  return r;
}

Aggregate aggregate(const std::vector<RunResult>& runs) {
  Aggregate a;
  a.runs = runs.size();
  std::size_t with_seem = 0;
  std::size_t agree = 0;
  std::vector<double> errors;
  for (const RunResult& r : runs) {
    if (r.diverged) ++a.diverged;
    if (r.seem) {
      ++with_seem;
      if ((*r.seem > 0.0) == r.diverged) ++agree;
    }
    if (r.diverged && r.predicted_t && r.crash_step && *r.crash_step > 0) {
      const double crash = static_cast<double>(*r.crash_step);
      errors.push_back(std::abs(*r.predicted_t - crash) / crash);
    }
  }
  if (with_seem > 0) a.sign_agreement = static_cast<double>(agree) / static_cast<double>(with_seem);
  if (!errors.empty()) {
    double sum = 0.0;
    for (double e : errors) sum += e;
    a.prediction_error_mean = sum / static_cast<double>(errors.size());
    a.prediction_error_max = *std::max_element(errors.begin(), errors.end());
  }
  return a;
}

namespace {

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

const json& need(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError(std::string("summary: missing field '") + key + "'");
  }
  return j.at(key);
}

template <class T>
T need_as(const json& j, const char* key) {
  try {
    return need(j, key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("summary: field '") + key + "' has the wrong type");
  }
}

template <class T>
std::optional<T> need_opt(const json& j, const char* key) {
  const json& v = need(j, key);
  if (v.is_null()) return std::nullopt;
  return need_as<T>(j, key);
}

}  // namespace

std::string to_json(const RunSummary& s) {
  json runs = json::array();
  for (const RunResult& r : s.runs) {
    json adam = nullptr;
    if (r.adam) {
      adam = {{"theta_slope", r.adam->theta_slope},
              {"theta_slope_expected", r.adam->theta_slope_expected},
              {"q_loglog_slope", r.adam->q_loglog_slope},
              {"q_slope_expected", r.adam->q_slope_expected}};
    }
    runs.push_back({{"gamma", r.gamma},
                    {"seed", r.seed},
                    {"optimizer", r.optimizer},
                    {"diverged", r.diverged},
                    {"crash_step", opt(r.crash_step)},
                    {"final_step", r.final_step},
                    {"final_q_abs_mean", r.final_q_abs_mean},
                    {"t0", opt(r.t0)},
                    {"seem", opt(r.seem)},
                    {"seem_norm", opt(r.seem_norm)},
                    {"seem_step", opt(r.seem_step)},
                    {"predicted_t", opt(r.predicted_t)},
                    {"crash_fit_r2", opt(r.crash_fit_r2)},
                    {"crash_fit_error", opt(r.crash_fit_error)},
                    {"adam", adam},
                    {"trace_file", r.trace_file}});
  }
  const Aggregate& a = s.aggregate;
  json j = {{"format", kSummaryFormat},
            {"version", kSummaryVersion},
            {"command", s.command},
            {"runs", runs},
            {"aggregate",
             {{"runs", a.runs},
              {"diverged", a.diverged},
              {"sign_agreement", opt(a.sign_agreement)},
              {"prediction_error_mean", opt(a.prediction_error_mean)},
              {"prediction_error_max", opt(a.prediction_error_max)}}}};
  return j.dump(2) + "\n";
}

RunSummary summary_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("summary: invalid JSON: ") + e.what());
  }
  if (need_as<std::string>(j, "format") != kSummaryFormat) {
    throw ConfigError("summary: unexpected format tag");
  }
  if (need_as<int>(j, "version") != kSummaryVersion) {
    throw ConfigError("summary: unsupported version");
  }
  RunSummary s;
  s.command = need_as<std::string>(j, "command");
  const json& runs = need(j, "runs");
  if (!runs.is_array()) throw ConfigError("summary: 'runs' must be an array");
  for (const json& rj : runs) {
    RunResult r;
    r.gamma = need_as<double>(rj, "gamma");
    r.seed = need_as<std::uint64_t>(rj, "seed");
    r.optimizer = need_as<std::string>(rj, "optimizer");
    r.diverged = need_as<bool>(rj, "diverged");
    r.crash_step = need_opt<std::size_t>(rj, "crash_step");
    r.final_step = need_as<std::size_t>(rj, "final_step");
    r.final_q_abs_mean = need_as<double>(rj, "final_q_abs_mean");
    r.t0 = need_opt<std::size_t>(rj, "t0");
    r.seem = need_opt<double>(rj, "seem");
    r.seem_norm = need_opt<double>(rj, "seem_norm");
    r.seem_step = need_opt<std::size_t>(rj, "seem_step");
    r.predicted_t = need_opt<double>(rj, "predicted_t");
    r.crash_fit_r2 = need_opt<double>(rj, "crash_fit_r2");
    r.crash_fit_error = need_opt<std::string>(rj, "crash_fit_error");
    const json& aj = need(rj, "adam");
    if (!aj.is_null()) {
      r.adam = AdamSlopes{need_as<double>(aj, "theta_slope"),
                          need_as<double>(aj, "theta_slope_expected"),
                          need_as<double>(aj, "q_loglog_slope"),
                          need_as<double>(aj, "q_slope_expected")};
    }
    r.trace_file = need_as<std::string>(rj, "trace_file");
    if (r.diverged != r.crash_step.has_value()) {
      throw ConfigError("summary: diverged flag disagrees with crash_step");
    }
    s.runs.push_back(std::move(r));
  }
  const json& aj = need(j, "aggregate");
  s.aggregate.runs = need_as<std::size_t>(aj, "runs");
  s.aggregate.diverged = need_as<std::size_t>(aj, "diverged");
  s.aggregate.sign_agreement = need_opt<double>(aj, "sign_agreement");
  s.aggregate.prediction_error_mean = need_opt<double>(aj, "prediction_error_mean");
  s.aggregate.prediction_error_max = need_opt<double>(aj, "prediction_error_max");
  return s;
}

}  // namespace seemlab::cli
