#include "seemlab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "seemlab/errors.hpp"

namespace seemlab {

Mat seem_matrix(const GradientFeatures& at_inputs, const GradientFeatures& at_next, double gamma) {
  if (at_inputs.samples() != at_next.samples() || at_inputs.params() != at_next.params()) {
    throw DimensionError("seem_matrix: feature sets differ in shape");
  }
  const Mat g_xx = gram(at_inputs, at_inputs);
  const Mat g_sx = gram(at_next, at_inputs);
  return gamma * g_sx - g_xx;
}

SeemReport seem_at(const Network& net, std::span<const double> theta, const Mat& inputs,
                   const Mat& next_inputs, double gamma, bool with_eigenvector) {
  if (!std::all_of(theta.begin(), theta.end(), [](double v) { return std::isfinite(v); })) {
    throw CrashError("seem: parameters are not finite");
  }
  if (inputs.rows() != next_inputs.rows()) {
    throw DimensionError("seem: X and X* have different lengths");
  }
  const GradientFeatures fx = gradient_features(net, theta, inputs);
  const GradientFeatures fs = gradient_features(net, theta, next_inputs);

  SeemReport r;
  r.gram_xx = gram(fx, fx);
  r.a = gamma * gram(fs, fx) - r.gram_xx;
  if (!r.a.all_finite()) throw CrashError("seem: kernel has non-finite entries");
  r.seem_raw = max_real_eigenvalue(r.a);
  r.gram_trace = r.gram_xx.trace();
  const double scale = r.gram_trace / static_cast<double>(inputs.rows());
  r.seem_norm = scale > 0.0 ? r.seem_raw / scale : 0.0;
  if (with_eigenvector) r.dominant = dominant_eigenvector(r.a);
  return r;
}

SeemReport seem(const MLPSpec& spec, const Params& params, const Dataset& d, double gamma,
                bool with_eigenvector) {
  if (!params.all_finite()) throw CrashError("seem: parameters are not finite");
  const Network net(spec);
  const TargetVector t = compute_targets(net, params.theta, d, gamma);
  return seem_at(net, params.theta, d.inputs(), t.next_inputs, gamma, with_eigenvector);
}

CriticalPoint detect_critical_point(const TrainTrace& trace, CriticalPointThresholds th) {
  CriticalPoint cp;
  if (th.consecutive == 0 || trace.records.size() < th.consecutive + 1) return cp;
  std::size_t run = 0;
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const TrainRecord& r = trace.records[i];
    if (r.crashed) break;
    if (!r.ntk_cos) continue;
    const bool ok = r.action_cos && *r.ntk_cos >= th.ntk_cos && *r.action_cos >= th.action_cos;
    run = ok ? run + 1 : 0;
    if (run == th.consecutive) {
      cp.t0 = r.step;
      cp.record_index = i;
      cp.ntk_cos = *r.ntk_cos;
      cp.action_cos = *r.action_cos;
      return cp;
    }
  }
  return cp;
}

double crash_law_exponent(std::size_t layers) {
  if (layers < 2) throw FitError("crash law needs L >= 2");
  return static_cast<double>(2 * layers - 2) / static_cast<double>(layers);
}

CrashFit fit_crash_law(std::span<const double> steps, std::span<const double> u_norms,
                       std::size_t layers) {
  if (steps.size() != u_norms.size()) throw FitError("fit_crash_law: length mismatch");
  CrashFit cf;
  cf.exponent = crash_law_exponent(layers);
  std::vector<double> ys(u_norms.size());
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (!(u_norms[i] > 0.0) || !std::isfinite(u_norms[i])) {
      throw FitError("fit_crash_law: ||u|| must be positive and finite");
    }
    ys[i] = std::pow(u_norms[i], -cf.exponent);
  }
  cf.fit = fit_line(steps, ys);
  if (!(cf.fit.slope < 0.0)) {
    throw FitError("fit_crash_law: fitted slope is not negative, the series is not diverging");
  }
  cf.predicted_t = cf.fit.root();
  cf.points = steps.size();
  cf.t_start = static_cast<std::size_t>(steps.front());
  cf.t_end = static_cast<std::size_t>(steps.back());
  return cf;
}

namespace {

std::vector<const TrainRecord*> window_records(const TrainTrace& trace, const FitWindow& w) {
  std::vector<const TrainRecord*> out;
  for (const TrainRecord& r : trace.records) {
    if (r.crashed) break;
    if (w.t_start && r.step < *w.t_start) continue;
    if (w.t_end && r.step > *w.t_end) continue;
    out.push_back(&r);
  }
  return out;
}

}  // namespace

CrashFit predict_crash_sgd(const TrainTrace& trace, std::size_t layers, FitWindow window) {
  auto recs = window_records(trace, window);
  const auto want = std::max(
      window.min_points,
      static_cast<std::size_t>(std::ceil(window.tail_fraction * static_cast<double>(recs.size()))));
  if (recs.size() > want) recs.erase(recs.begin(), recs.end() - static_cast<std::ptrdiff_t>(want));
  if (recs.size() < std::max<std::size_t>(2, window.min_points)) {
    throw FitError("predict_crash_sgd: only " + std::to_string(recs.size()) +
                   " records in the window");
  }
  std::vector<double> ts;
  std::vector<double> us;
  for (const TrainRecord* r : recs) {
    ts.push_back(static_cast<double>(r->step));
    us.push_back(r->u_norm);
  }
  return fit_crash_law(ts, us, layers);
}

AdamGrowthReport adam_growth_check(const TrainTrace& trace, double eta, std::size_t param_count,
                                   std::size_t layers, FitWindow window,
                                   std::optional<std::size_t> t0) {
  if (t0 && window.t_start && *window.t_start < *t0) {
    throw FitError("adam_growth_check: window starts before the critical point");
  }
  if (t0 && !window.t_start) window.t_start = t0;
  const auto recs = window_records(trace, window);
  std::vector<double> ts;
  std::vector<double> thetas;
  std::vector<double> log_t;
  std::vector<double> log_q;
  for (const TrainRecord* r : recs) {
    if (r->step == 0) continue;
    ts.push_back(static_cast<double>(r->step));
    thetas.push_back(r->theta_norm);
    if (r->q_abs_mean > 0.0) {
      log_t.push_back(std::log(static_cast<double>(r->step)));
      log_q.push_back(std::log(r->q_abs_mean));
    }
  }
  if (ts.size() < 2 || log_t.size() < 2) {
    throw FitError("adam_growth_check: fewer than two usable records in the window");
  }
  AdamGrowthReport rep;
  rep.t_start = static_cast<std::size_t>(ts.front());
  rep.t_end = static_cast<std::size_t>(ts.back());
  rep.theta_fit = fit_line(ts, thetas);
  rep.q_fit = fit_line(log_t, log_q);
  rep.theta_slope = rep.theta_fit.slope;
  rep.theta_slope_expected = eta * std::sqrt(static_cast<double>(param_count));
  rep.q_loglog_slope = rep.q_fit.slope;
  rep.q_slope_expected = static_cast<double>(layers);
  return rep;
}

std::vector<HomogeneityRow> homogeneity_check(const MLPSpec& spec, const Params& params,
                                              const Mat& inputs, std::span<const double> lambdas) {
  const Network net(spec);
  const std::vector<double> f = forward_batch(spec, params, inputs);
  const GradientFeatures phi = gradient_features(net, params.theta, inputs);
  const Mat g = gram(phi, phi);
  const double ff = dot(f, f);
  const double phi_norm = norm2(phi.data());
  const double g_norm = g.norm();
  const double L = static_cast<double>(spec.layers());

  std::vector<HomogeneityRow> rows;
  for (double lambda : lambdas) {
    const Params scaled = scale_params(params, lambda);
    const std::vector<double> fl = forward_batch(spec, scaled, inputs);
    const GradientFeatures phil = gradient_features(net, scaled.theta, inputs);
    const Mat gl = gram(phil, phil);
    HomogeneityRow row;
    row.lambda = lambda;
    row.output_ratio = dot(fl, f) / ff;
    row.grad_scale = norm2(phil.data()) / phi_norm;
    row.ntk_scale = gl.norm() / g_norm;
    row.ntk_cos = cosine(phil.data(), phi.data());
    const double expect = std::pow(lambda, L);
    double worst = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (f[i] == 0.0) continue;
      worst = std::max(worst, std::abs(fl[i] / f[i] - expect) / expect);
    }
    row.max_output_deviation = worst;
    rows.push_back(row);
  }
  return rows;
}

void write_homogeneity_csv(std::ostream& out, std::span<const HomogeneityRow> rows) {
  const auto old = out.precision(17);
  out << "lambda,output_ratio,grad_scale,ntk_scale,ntk_cos\n";
  for (const HomogeneityRow& r : rows) {
    out << r.lambda << ',' << r.output_ratio << ',' << r.grad_scale << ',' << r.ntk_scale << ','
        << r.ntk_cos << '\n';
  }
  out.precision(old);
}

NtkMap ntk_map(const MLPSpec& spec, const Params& params, std::span<const double> x0,
               GridSpec grid) {
  if (spec.input_dim() != 2 || x0.size() != 2) {
    throw DimensionError("ntk_map: needs a network with 2-D input and a 2-D reference point");
  }
  if (grid.points == 0 || !(grid.hi >= grid.lo)) throw ConfigError("ntk_map: invalid grid");
  const Network net(spec);
  auto ws = net.make_workspace();
  std::vector<double> g0(net.param_count(), 0.0);
  net.accumulate_gradient(params.theta, x0, 1.0, g0, ws);

  NtkMap map;
  map.x0.assign(x0.begin(), x0.end());
  map.axis.resize(grid.points);
  for (std::size_t i = 0; i < grid.points; ++i) {
    map.axis[i] = grid.points == 1
                      ? grid.lo
                      : grid.lo + (grid.hi - grid.lo) * static_cast<double>(i) /
                                      static_cast<double>(grid.points - 1);
  }
  map.values.resize(grid.points * grid.points);
  std::vector<double> g(net.param_count());
  double biggest = 0.0;
  for (std::size_t iy = 0; iy < grid.points; ++iy) {
    for (std::size_t ix = 0; ix < grid.points; ++ix) {
      std::fill(g.begin(), g.end(), 0.0);
      const double x[2] = {map.axis[ix], map.axis[iy]};
      net.accumulate_gradient(params.theta, x, 1.0, g, ws);
      const double k = dot(g0, g);
      map.values[iy * grid.points + ix] = k;
      biggest = std::max(biggest, std::abs(k));
    }
  }
  map.scale = biggest > 0.0 ? biggest : 1.0;
  for (double& v : map.values) v /= map.scale;
  map.self_value = dot(g0, g0) / map.scale;
  return map;
}

void write_ntk_map_csv(std::ostream& out, const NtkMap& map) {
  const auto old = out.precision(17);
  out << "x,y,value\n";
  const std::size_t n = map.axis.size();
  for (std::size_t iy = 0; iy < n; ++iy) {
    for (std::size_t ix = 0; ix < n; ++ix) {
      out << map.axis[ix] << ',' << map.axis[iy] << ',' << map.at(ix, iy) << '\n';
    }
  }
  out.precision(old);
}

Rollout linearized_rollout(const Mat& a, std::span<const double> u0, double eta, std::size_t steps) {
  if (!a.square() || a.rows() != u0.size()) {
    throw DimensionError("linearized_rollout: A must be square and match u0");
  }
  if (!a.all_finite()) throw Error("linearized_rollout: A has non-finite entries");
  const auto dominant = dominant_eigenvector(a);
  Rollout r;
  std::vector<double> u(u0.begin(), u0.end());
  auto record = [&](const std::vector<double>& v) {
    r.norms.push_back(norm2(v));
    if (dominant) r.alignment.push_back(std::abs(cosine(v, *dominant)));
    r.u.push_back(v);
  };
  record(u);
  for (std::size_t t = 0; t < steps; ++t) {
    const std::vector<double> au = matvec(a, u);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += eta * au[i];
    record(u);
  }
  return r;
}

LinearizationCheck linearization_check(const Network& net, std::span<const double> theta,
                                       const Dataset& d, double gamma, double eta) {
  const Mat inputs = d.inputs();
  const std::size_t m = d.size();
  const TargetVector before = compute_targets(net, theta, d, gamma);
  const SeemReport sr = seem_at(net, theta, inputs, before.next_inputs, gamma);

  const TdGradient g = td_gradient(net, theta, before, inputs);
  std::vector<double> u(m);
  for (std::size_t i = 0; i < m; ++i) u[i] = g.q[i] - before.q_bar[i];

  std::vector<double> next(theta.begin(), theta.end());
  for (std::size_t k = 0; k < next.size(); ++k) next[k] -= eta * g.grad[k];
  const TargetVector after = compute_targets(net, next, d, gamma);
  auto ws = net.make_workspace();
  std::vector<double> u_next(m);
  for (std::size_t i = 0; i < m; ++i) {
    u_next[i] = net.forward(next, inputs.row(i), ws) - after.q_bar[i];
  }

  LinearizationCheck out;
  out.argmax_unchanged = before.actions == after.actions;
  out.eta_effective = eta / static_cast<double>(m);
  const std::vector<double> au = matvec(sr.a, u);
  std::vector<double> diff(m);
  for (std::size_t i = 0; i < m; ++i) diff[i] = u_next[i] - (u[i] + out.eta_effective * au[i]);
  const double denom = out.eta_effective * norm2(au);
  out.residual = denom > 0.0 ? norm2(diff) / denom : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace seemlab
