#include "seemlab/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "seemlab/diagnostics.hpp"
#include "seemlab/errors.hpp"

namespace seemlab {

std::string_view to_string(OptimizerKind kind) noexcept {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "sgd") return OptimizerKind::sgd;
  if (text == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + std::string(text) + "' (expected sgd or adam)");
}

void TrainConfig::validate() const {
  spec.validate();
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (!(eta > 0.0)) throw ConfigError("eta must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (use_ema && !(ema_tau > 0.0 && ema_tau <= 1.0)) throw ConfigError("ema_tau must lie in (0, 1]");
  if (record_every == 0) throw ConfigError("record_every must be >= 1");
  if (!(diverge_threshold > 0.0)) throw ConfigError("diverge_threshold must be positive");
  if (adam.beta1 < 0.0 || adam.beta1 >= 1.0 || adam.beta2 < 0.0 || adam.beta2 >= 1.0 ||
      !(adam.eps > 0.0)) {
    throw ConfigError("adam settings out of range");
  }
  if (initial_params && initial_params->size() != spec.param_count()) {
    throw ConfigError("initial_params length does not match spec");
  }
}

TargetVector compute_targets(const Network& net, std::span<const double> theta, const Dataset& d,
                             double gamma) {
  const EnvInfo& env = d.env;
  if (env.input_dim() != net.input_dim()) {
    throw DimensionError("compute_targets: dataset input dim does not match network");
  }
  for (double v : theta) {
    if (!std::isfinite(v)) throw CrashError("compute_targets: non-finite parameters");
  }
  TargetVector t;
  t.q_bar.resize(d.size());
  t.actions.resize(d.size());
  t.next_inputs = Mat(d.size(), env.input_dim());
  auto ws = net.make_workspace();
  std::vector<double> x(env.input_dim());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Transition& tr = d.transitions[i];
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_a = 0;
    for (std::size_t a = 0; a < env.action_count; ++a) {
      env.write_input(tr.s_next, a, x);
      const double q = net.forward(theta, x, ws);
      if (!std::isfinite(q)) throw CrashError("compute_targets: non-finite Q value");
      if (q > best) {
        best = q;
        best_a = a;
      }
      if (env.action_dim == 0) break;
    }
    t.q_bar[i] = tr.r + gamma * best;
    t.actions[i] = best_a;
    env.write_input(tr.s_next, best_a, t.next_inputs.row(i));
  }
  return t;
}

TargetVector compute_targets(const MLPSpec& spec, const Params& params, const Dataset& d,
                             double gamma) {
  return compute_targets(Network(spec), params.theta, d, gamma);
}

Optimizer::Optimizer(const TrainConfig& config, std::size_t param_count)
    : kind_(config.optimizer),
      adam_(config.adam),
      eta_(config.eta),
      weight_decay_(config.weight_decay) {
  if (kind_ == OptimizerKind::adam) {
    m_.assign(param_count, 0.0);
    v_.assign(param_count, 0.0);
  }
}

void Optimizer::apply(std::span<double> theta, std::span<const double> grad) {
  ++t_;
  const std::size_t n = theta.size();
  if (weight_decay_ > 0.0) {
    const double keep = 1.0 - eta_ * weight_decay_;
    for (double& v : theta) v *= keep;
  }
  if (kind_ == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < n; ++i) theta[i] -= eta_ * grad[i];
    return;
  }
  const double b1 = adam_.beta1;
  const double b2 = adam_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    theta[i] -= eta_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + adam_.eps);
  }
}

TdGradient td_gradient(const Network& net, std::span<const double> theta,
                       const TargetVector& targets, const Mat& inputs,
                       std::span<const std::size_t> batch) {
  const std::size_t count = batch.empty() ? inputs.rows() : batch.size();
  if (count == 0) throw DimensionError("td_gradient: empty batch");
  if (targets.q_bar.size() != inputs.rows()) {
    throw DimensionError("td_gradient: targets and inputs differ in length");
  }
  TdGradient out;
  out.grad.assign(net.param_count(), 0.0);
  out.q.resize(count);
  auto ws = net.make_workspace();
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = batch.empty() ? k : batch[k];
    const double f = net.forward(theta, inputs.row(i), ws);
    out.q[k] = f;
    const double u = f - targets.q_bar[i];
    if (u != 0.0) net.backward(theta, u * inv, out.grad, ws);
  }
  return out;
}

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Params td_step(const Network& net, const Params& params, const TargetVector& targets,
               const Mat& inputs, Optimizer& optimizer, std::span<const std::size_t> batch) {
  const TdGradient g = td_gradient(net, params.theta, targets, inputs, batch);
  if (!all_finite(g.grad)) throw CrashError("td_step: non-finite gradient");
  Params next = params;
  optimizer.apply(next.theta, g.grad);
  return next;
}

Params td_step(const MLPSpec& spec, const Params& params, const TargetVector& targets,
               const Dataset& d, const TrainConfig& config) {
  const Network net(spec);
  Optimizer opt(config, net.param_count());
  return td_step(net, params, targets, d.inputs(), opt);
}

namespace {

std::vector<double> action_vector(const EnvInfo& env, std::span<const std::size_t> actions) {
  std::vector<double> v;
  v.reserve(actions.size() * env.action_dim);
  for (std::size_t a : actions) {
    const auto e = env.encoding(a);
    v.insert(v.end(), e.begin(), e.end());
  }
  return v;
}

std::optional<double> extreme_ratio(const EnvInfo& env, std::span<const std::size_t> actions) {
  if (env.action_dim == 0) return std::nullopt;
  double widest = 0.0;
  for (std::size_t a = 0; a < env.action_count; ++a) widest = std::max(widest, norm2(env.encoding(a)));
  if (widest == 0.0) return std::nullopt;
  double sum = 0.0;
  for (std::size_t a : actions) sum += norm2(env.encoding(a));
  return sum / (static_cast<double>(actions.size()) * widest);
}

double mean_abs(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s / static_cast<double>(v.size());
}

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

TrainTrace run(const TrainConfig& config, const Dataset& d, const Observer& observer) {
  config.validate();
  if (d.size() == 0) throw ConfigError("run: empty dataset");
  const Network net(config.spec);
  if (d.env.input_dim() != net.input_dim()) {
    throw ConfigError("run: dataset input dim does not match the network's first layer");
  }

  TrainTrace trace;
  trace.param_count = net.param_count();
  trace.layers = config.spec.layers();

  Params theta = config.initial_params ? *config.initial_params : init(config.spec, config.seed, config.init);
  Params target_theta = theta;
  Optimizer opt(config, net.param_count());
  Rng batch_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  const Mat inputs = d.inputs();
  const std::size_t m = d.size();
  const bool minibatch = config.batch_size > 0 && config.batch_size < m;

  std::optional<std::vector<double>> prev_actions;
  std::optional<Mat> prev_gram;
  std::vector<std::size_t> batch;
  auto ws = net.make_workspace();

  trace.final_params = theta;
  for (std::size_t t = 0;; ++t) {
    TargetVector targets;
    std::vector<double> q(m);
    std::optional<TdGradient> grad;
    bool crashed = !theta.all_finite();
    if (!crashed) {
      try {
        targets = compute_targets(net, config.use_ema ? target_theta.theta : theta.theta, d,
                                  config.gamma);
      } catch (const CrashError&) {
        crashed = true;
      }
    }
    if (!crashed && t < config.steps) {
      batch.clear();
      if (minibatch) {
        for (std::size_t k = 0; k < config.batch_size; ++k) batch.push_back(batch_rng.index(m));
        for (std::size_t i = 0; i < m; ++i) q[i] = net.forward(theta.theta, inputs.row(i), ws);
      }
      grad = td_gradient(net, theta.theta, targets, inputs, batch);
      if (!minibatch) q = grad->q;
    } else if (!crashed) {
      for (std::size_t i = 0; i < m; ++i) q[i] = net.forward(theta.theta, inputs.row(i), ws);
    }

    TrainRecord rec;
    rec.step = t;
    rec.theta_norm = theta.norm();
    if (!crashed) {
      rec.q_mean = mean(q);
      rec.q_abs_mean = mean_abs(q);
      std::vector<double> u(m);
      for (std::size_t i = 0; i < m; ++i) u[i] = q[i] - targets.q_bar[i];
      rec.u_norm = norm2(u);
      crashed = !all_finite(q) || !std::isfinite(rec.u_norm) || !std::isfinite(rec.theta_norm) ||
                rec.q_abs_mean > config.diverge_threshold || (grad && !all_finite(grad->grad));
    } else {
      rec.q_mean = rec.q_abs_mean = rec.u_norm = std::numeric_limits<double>::quiet_NaN();
    }

    if (crashed) {
      rec.crashed = true;
      trace.records.push_back(rec);
      trace.crash_step = t;
      break;
    }

    trace.final_params = theta;
    trace.final_step = t;

    const bool last = t == config.steps;
    if (t % config.record_every == 0 || last) {
      const auto acts = action_vector(d.env, targets.actions);
      if (prev_actions) rec.action_cos = cosine(acts, *prev_actions);
      prev_actions = acts;
      rec.extreme_ratio = extreme_ratio(d.env, targets.actions);
      if (config.kernel_every > 0 && t % config.kernel_every == 0) {
        const SeemReport sr =
            seem_at(net, theta.theta, inputs, targets.next_inputs, config.gamma);
        rec.seem_raw = sr.seem_raw;
        rec.seem_norm = sr.seem_norm;
        if (prev_gram) rec.ntk_cos = cosine(sr.gram_xx.data(), prev_gram->data());
        prev_gram = sr.gram_xx;
      }
      trace.records.push_back(rec);
      if (observer) observer(Snapshot{t, theta.theta, targets, q});
    }
    if (last) break;

    opt.apply(theta.theta, grad->grad);
    if (config.use_ema) {
      for (std::size_t i = 0; i < theta.size(); ++i) {
        target_theta.theta[i] += config.ema_tau * (theta.theta[i] - target_theta.theta[i]);
      }
    }
  }
  return trace;
}

namespace {

constexpr const char* kTraceHeader =
    "step,q_mean,u_norm,theta_norm,seem_raw,seem_norm,ntk_cos,action_cos,crashed";

void put(std::ostream& out, double v) { out << v; }

void put(std::ostream& out, const std::optional<double>& v) {
  if (v) out << *v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ConfigError("trace: malformed number '" + s + "'");
  return v;
}

std::optional<double> parse_optional(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s);
}

}  // namespace

TrainConfig baird_config(const BairdInstance& inst, bool front_layernorm, double eta,
                         std::size_t steps) {
  TrainConfig c;
  c.spec = MLPSpec{{BairdInstance::kFeatures, 1}, Norm::none,
                   front_layernorm ? Norm::layernorm : Norm::none};
  c.gamma = BairdInstance::kGamma;
  c.eta = eta;
  c.optimizer = OptimizerKind::sgd;
  c.steps = steps;
  c.record_every = std::max<std::size_t>(1, steps / 200);
  c.diverge_threshold = 1e12;

  const Layout lay = make_layout(c.spec);
  Params p;
  p.theta.assign(lay.total, 0.0);
  const auto w = inst.initial_weights();
  std::copy(w.begin(), w.end(), p.theta.begin() + static_cast<std::ptrdiff_t>(lay.layers[0].weight));
  if (front_layernorm) {
    for (std::size_t i = 0; i < BairdInstance::kFeatures; ++i) p.theta[lay.input_gain + i] = 1.0;
  }
  c.initial_params = std::move(p);
  return c;
}

void write_trace_csv(std::ostream& out, const TrainTrace& trace, bool with_extreme_ratio) {
  out << kTraceHeader;
  if (with_extreme_ratio) out << ",extreme_ratio";
  out << '\n';
  const auto old_precision = out.precision(17);
  for (const TrainRecord& r : trace.records) {
    out << r.step << ',';
    put(out, r.q_mean);
    out << ',';
    put(out, r.u_norm);
    out << ',';
    put(out, r.theta_norm);
    out << ',';
    put(out, r.seem_raw);
    out << ',';
    put(out, r.seem_norm);
    out << ',';
    put(out, r.ntk_cos);
    out << ',';
    put(out, r.action_cos);
    out << ',' << (r.crashed ? 1 : 0);
    if (with_extreme_ratio) {
      out << ',';
      put(out, r.extreme_ratio);
    }
    out << '\n';
  }
  out.precision(old_precision);
}

TrainTrace read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("trace: empty file");
  const std::string base = kTraceHeader;
  const bool extended = line == base + ",extreme_ratio";
  if (line != base && !extended) throw ConfigError("trace: unexpected header '" + line + "'");
  const std::size_t ncols = extended ? 10 : 9;

  TrainTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != ncols) throw ConfigError("trace: wrong column count in '" + line + "'");
    TrainRecord r;
    r.step = static_cast<std::size_t>(parse_double(c[0]));
    r.q_mean = parse_double(c[1]);
    r.q_abs_mean = std::abs(r.q_mean);
    r.u_norm = parse_double(c[2]);
    r.theta_norm = parse_double(c[3]);
    r.seem_raw = parse_optional(c[4]);
    r.seem_norm = parse_optional(c[5]);
    r.ntk_cos = parse_optional(c[6]);
    r.action_cos = parse_optional(c[7]);
    r.crashed = c[8] == "1";
    if (extended) r.extreme_ratio = parse_optional(c[9]);
    if (!trace.records.empty() && r.step <= trace.records.back().step) {
      throw ConfigError("trace: steps must be strictly increasing");
    }
    if (trace.crash_step) throw ConfigError("trace: records after the crashed row");
    if (r.crashed) trace.crash_step = r.step;
    trace.records.push_back(r);
  }
  return trace;
}

}  // namespace seemlab
