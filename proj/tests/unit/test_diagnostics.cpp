#include <cmath>
#include <sstream>
#include <vector>

#include <doctest.h>

#include "seemlab/diagnostics.hpp"
#include "seemlab/errors.hpp"
#include "support/oracles.hpp"

using namespace seemlab;

namespace {

TrainRecord kernel_record(std::size_t step, double ntk_cos, double action_cos) {
  TrainRecord r;
  r.step = step;
  r.seem_raw = 0.0;
  r.seem_norm = 0.0;
  r.ntk_cos = ntk_cos;
  r.action_cos = action_cos;
  return r;
}

// Records with ||u_t|| following `law` at steps 0, 5, ..., last.
template <class Law>
TrainTrace synthetic_u_trace(std::size_t last, Law law) {
  TrainTrace tr;
  for (std::size_t t = 0; t <= last; t += 5) {
    TrainRecord r;
    r.step = t;
    r.u_norm = law(static_cast<double>(t));
    tr.records.push_back(r);
  }
  tr.layers = 2;
  return tr;
}

}  // namespace

TEST_CASE("zero discount gives nonpositive SEEM") {
  const Dataset d = toy_nav_dataset(30, 2);
  for (Norm n : {Norm::none, Norm::layernorm}) {
    const MLPSpec spec{{4, 32, 32, 1}, n};
    const Params p = init(spec, 1, InitOptions{1.0});
    const SeemReport r = seem(spec, p, d, 0.0);
    CHECK(r.seem_raw <= 1e-9 * r.gram_trace);
    CHECK((r.a + r.gram_xx).norm() == 0.0);
  }
}

TEST_CASE("on-policy case gives nonpositive SEEM") {
  const Dataset d = toy_nav_dataset(25, 4);
  const MLPSpec spec{{4, 32, 1}};
  const Network net(spec);
  const Params p = init(spec, 2, InitOptions{1.0});
  const Mat x = d.inputs();
  const SeemReport r = seem_at(net, p.theta, x, x, 0.9);
  CHECK(r.seem_raw <= 1e-9 * r.gram_trace);
  CHECK((r.a - (-0.1) * r.gram_xx).norm() <= 1e-12 * r.gram_xx.norm());
}

TEST_CASE("SEEM is bit-identical on repeat and consistent with its matrix") {
  const Dataset d = toy_nav_dataset(30, 2);
  const MLPSpec spec{{4, 32, 1}};
  const Params p = init(spec, 3);
  const SeemReport a = seem(spec, p, d, 0.99, true);
  const SeemReport b = seem(spec, p, d, 0.99, true);
  CHECK(a.seem_raw == b.seem_raw);
  CHECK(a.seem_norm == b.seem_norm);
  CHECK(a.a == b.a);
  CHECK(a.seem_raw == max_real_eigenvalue(a.a));
  CHECK(a.gram_trace == doctest::Approx(a.gram_xx.trace()));
  CHECK(a.seem_norm == doctest::Approx(a.seem_raw / (a.gram_trace / 30.0)));
  const TargetVector t = compute_targets(spec, p, d, 0.99);
  const Network net(spec);
  const Mat manual = seem_matrix(gradient_features(net, p.theta, d.inputs()),
                                 gradient_features(net, p.theta, t.next_inputs), 0.99);
  CHECK(manual == a.a);
}

TEST_CASE("SEEM rejects crashed parameters") {
  const Dataset d = toy_nav_dataset(5, 2);
  const MLPSpec spec{{4, 8, 1}};
  Params p = init(spec, 3);
  p.theta[2] = INFINITY;
  CHECK_THROWS_AS(seem(spec, p, d, 0.9), CrashError);
}

TEST_CASE("SEEM sign and normalized value survive parameter scaling") {
  const Dataset d = toy_nav_dataset(30, 2);
  for (std::size_t width : {16, 32}) {
    // Weights far above init make the bias gradients negligible.
    const MLPSpec spec{{4, width, width, 1}};
    const Params p = scale_params(init(spec, width), 30.0);
    const SeemReport base = seem(spec, p, d, 0.99);
    for (double lambda : {5.0, 10.0}) {
      const SeemReport s = seem(spec, scale_params(p, lambda), d, 0.99);
      CHECK((s.seem_raw > 0) == (base.seem_raw > 0));
      CHECK(std::abs(s.seem_norm - base.seem_norm) <= 0.05 * std::abs(base.seem_norm));
    }
  }
}

TEST_CASE("SEEM is monotone in the discount when X* is fixed") {
  // gamma G(X*, X) need not have a PSD symmetric part, so near-zero SEEM can
  // dip slightly as gamma grows; the tolerance is 1e-3 of the mean kernel diagonal.
  const Dataset d = toy_nav_dataset(30, 7);
  const MLPSpec spec{{4, 32, 1}};
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Params p = init(spec, seed, InitOptions{1.0});
    double prev = -INFINITY;
    std::vector<std::size_t> actions;
    for (double gamma : {0.1, 0.5, 0.9, 0.99}) {
      const TargetVector t = compute_targets(spec, p, d, gamma);
      if (actions.empty()) actions = t.actions;
      if (t.actions != actions) continue;
      const SeemReport s = seem(spec, p, d, gamma);
      CHECK(s.seem_raw >= prev - 1e-3 * s.gram_trace / 30.0);
      prev = s.seem_raw;
    }
  }
}

TEST_CASE("critical point detection") {
  TrainTrace steady;
  for (std::size_t i = 0; i < 12; ++i) steady.records.push_back(kernel_record(10 * (i + 1), 0.999, 1.0));
  const CriticalPoint cp = detect_critical_point(steady);
  REQUIRE(cp.reached());
  CHECK(*cp.t0 == 50);
  CHECK(*cp.record_index == 4);

  TrainTrace alternating;
  for (std::size_t i = 0; i < 40; ++i)
    alternating.records.push_back(kernel_record(10 * (i + 1), 0.999, i % 2 == 0 ? 1.0 : 0.5));
  CHECK_FALSE(detect_critical_point(alternating).reached());

  // Non-kernel records between kernel records do not break a run.
  TrainTrace sparse;
  for (std::size_t i = 0; i < 10; ++i) {
    TrainRecord plain;
    plain.step = 20 * i + 10;
    sparse.records.push_back(plain);
    sparse.records.push_back(kernel_record(20 * i + 20, 0.995, 0.9995));
  }
  const CriticalPoint sp = detect_critical_point(sparse);
  REQUIRE(sp.reached());
  CHECK(*sp.t0 == 100);
  CHECK_FALSE(detect_critical_point(sparse, {0.999, 0.999, 5}).reached());
  CHECK_FALSE(detect_critical_point(TrainTrace{}).reached());
}

TEST_CASE("crash law on exact synthetic series") {
  std::vector<double> ts, us;
  for (int t = 0; t <= 500; t += 5) {
    ts.push_back(t);
    us.push_back(1.0 / (0.87 - 1.44e-3 * t));
  }
  const CrashFit two = fit_crash_law(ts, us, 2);
  CHECK(two.exponent == 1.0);
  CHECK(std::abs(two.predicted_t - 0.87 / 1.44e-3) <= 1e-6 * (0.87 / 1.44e-3));
  CHECK(two.predicted_t == doctest::Approx(604.2).epsilon(1e-4));

  std::vector<double> u3;
  for (double t : ts) u3.push_back(std::pow(1.0 - t / 1000.0, -0.75));
  const CrashFit three = fit_crash_law(ts, u3, 3);
  CHECK(three.exponent == doctest::Approx(4.0 / 3.0));
  CHECK(three.fit.r_squared >= 1.0 - 1e-10);
  CHECK(std::abs(three.predicted_t - 1000.0) <= 1e-6 * 1000.0);
  CHECK(crash_law_exponent(4) == doctest::Approx(1.5));
}

TEST_CASE("crash law rejects a non-diverging series") {
  std::vector<double> ts, us;
  for (int t = 0; t < 50; ++t) {
    ts.push_back(t);
    us.push_back(1.0 / (1.0 + 0.01 * t));
  }
  CHECK_THROWS_AS(fit_crash_law(ts, us, 2), FitError);
}

TEST_CASE("crash prediction from a trace uses the late window") {
  TrainTrace tr = synthetic_u_trace(500, [](double t) { return 1.0 / (0.87 - 1.44e-3 * t); });
  tr.crash_step = 600;
  const CrashFit f = predict_crash_sgd(tr, 2);
  CHECK(f.points >= 10);
  CHECK(f.t_end == 500);
  CHECK(f.t_start >= 395);
  CHECK(f.predicted_t > f.t_end);
  CHECK(std::abs(f.predicted_t - 604.1666666) <= 1e-6 * 604.17);

  const CrashFit w = predict_crash_sgd(tr, 2, FitWindow{100, 300, 1.0, 10});
  CHECK(w.t_start == 100);
  CHECK(w.t_end == 300);
  CHECK(w.predicted_t == doctest::Approx(604.1666666).epsilon(1e-6));
  CHECK_THROWS_AS(predict_crash_sgd(tr, 2, FitWindow{100, 120, 1.0, 10}), FitError);
}

TEST_CASE("Adam growth fit on synthetic series") {
  const double eta = 3e-4;
  const std::size_t params = 801;
  TrainTrace tr;
  for (std::size_t t = 100; t <= 5000; t += 50) {
    TrainRecord r;
    r.step = t;
    r.theta_norm = eta * std::sqrt(static_cast<double>(params)) * static_cast<double>(t) + 100.0;
    r.q_abs_mean = 2e-6 * std::pow(static_cast<double>(t), 3.0);
    r.q_mean = r.q_abs_mean;
    tr.records.push_back(r);
  }
  const AdamGrowthReport rep = adam_growth_check(tr, eta, params, 3, FitWindow{100, 5000, 1.0, 10});
  CHECK(rep.theta_slope == doctest::Approx(eta * std::sqrt(801.0)).epsilon(1e-10));
  CHECK(rep.theta_slope_expected == doctest::Approx(eta * std::sqrt(801.0)));
  CHECK(rep.q_loglog_slope == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(rep.q_slope_expected == 3.0);
  CHECK_THROWS_AS(adam_growth_check(tr, eta, params, 3, FitWindow{100, 5000, 1.0, 10}, 1000),
                  FitError);
}

TEST_CASE("homogeneity on a bias-free network") {
  const MLPSpec spec{{4, 16, 16, 1}};
  const Mat x = toy_nav_dataset(20, 1).inputs();
  const std::vector<double> lambdas{1.0, 5.0, 10.0};
  const auto at_init = homogeneity_check(spec, init(spec, 6), x, lambdas);
  REQUIRE(at_init.size() == 3);
  CHECK(at_init[0].output_ratio == 1.0);
  CHECK(at_init[0].grad_scale == 1.0);
  CHECK(at_init[0].ntk_scale == 1.0);
  CHECK(at_init[0].ntk_cos == 1.0);
  CHECK(at_init[0].max_output_deviation == 0.0);
  // Zero biases keep the output exactly homogeneous.
  CHECK(at_init[1].output_ratio == doctest::Approx(125.0).epsilon(1e-10));
  CHECK(at_init[2].output_ratio == doctest::Approx(1000.0).epsilon(1e-10));

  // Bias gradients stop mattering once the weights are large.
  const auto rows = homogeneity_check(spec, scale_params(init(spec, 6), 300.0), x, lambdas);
  CHECK(rows[1].grad_scale == doctest::Approx(25.0).epsilon(1e-2));
  CHECK(rows[1].ntk_scale == doctest::Approx(625.0).epsilon(1e-2));
  CHECK(rows[1].ntk_cos >= 1.0 - 1e-5);
  CHECK(rows[2].ntk_scale == doctest::Approx(1e4).epsilon(1e-2));

  std::ostringstream os;
  write_homogeneity_csv(os, rows);
  CHECK(os.str().rfind("lambda,output_ratio,grad_scale,ntk_scale,ntk_cos", 0) == 0);
}

TEST_CASE("NTK map") {
  const MLPSpec spec{{2, 64, 1}};
  const Params p = init(spec, 3, InitOptions{1.0});
  const std::vector<double> x0{0.1, 0.2};
  const NtkMap m = ntk_map(spec, p, x0, GridSpec{-1.0, 1.0, 3});
  REQUIRE(m.axis.size() == 3);
  REQUIRE(m.values.size() == 9);
  CHECK(m.axis == std::vector<double>{-1.0, 0.0, 1.0});
  CHECK(m.self_value > 0.0);
  double peak = 0.0;
  for (double v : m.values) peak = std::max(peak, std::abs(v));
  CHECK(peak == doctest::Approx(1.0));
  const std::vector<double> corner{1.0, -1.0};
  CHECK(m.at(2, 0) == doctest::Approx(ntk(spec, p, x0, corner) / m.scale).epsilon(1e-12));

  std::ostringstream os;
  write_ntk_map_csv(os, m);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "x,y,value");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 9);

  const MLPSpec wide{{3, 8, 1}};
  CHECK_THROWS_AS(ntk_map(wide, init(wide, 0), x0), DimensionError);
}

TEST_CASE("linearized rollout on a decoupled system") {
  const Mat a = Mat::from_rows({{1, 0}, {0, -1}});
  const std::vector<double> u0{1.0, 1.0};
  const Rollout r = linearized_rollout(a, u0, 0.01, 300);
  REQUIRE(r.u.size() == 301);
  CHECK(r.u[300][0] == doctest::Approx(std::pow(1.01, 300)).epsilon(1e-12));
  CHECK(r.u[300][1] == doctest::Approx(std::pow(0.99, 300)).epsilon(1e-12));
  REQUIRE(r.alignment.size() == 301);
  CHECK(r.alignment.back() > 0.999);
  CHECK(r.alignment.back() > r.alignment.front());
}

TEST_CASE("linearized rollout of a stable system decays monotonically") {
  const Mat a = Mat::from_rows({{-1.0, 0.5, 0.0}, {-0.5, -1.0, 0.2}, {0.0, 0.1, -2.0}});
  const Rollout r = linearized_rollout(a, std::vector<double>{1.0, -2.0, 0.5}, 0.01, 2000);
  for (std::size_t t = 1; t < r.norms.size(); ++t) CHECK(r.norms[t] < r.norms[t - 1]);
  CHECK(r.norms.back() < 1e-6 * r.norms.front());
}

TEST_CASE("linearized rollout matches repeated squaring") {
  Rng rng(5);
  Mat a(6, 6);
  for (double& v : a.data()) v = rng.uniform(-1.0, 1.0);
  const std::vector<double> u0{1, 2, 3, -1, 0.5, 0};
  const double eta = 0.05;
  const std::size_t steps = 257;
  const Rollout r = linearized_rollout(a, u0, eta, steps);
  const Mat step = Mat::identity(6) + eta * a;
  const auto want = matvec(oracle::matpow(step, steps), u0);
  double diff = 0.0;
  for (std::size_t i = 0; i < 6; ++i) diff = std::max(diff, std::abs(r.u[steps][i] - want[i]));
  CHECK(diff <= 1e-8 * norm2(want));
}

TEST_CASE("rollout aligns with the dominant eigenvector of a real SEEM matrix") {
  const Dataset d = toy_nav_dataset(30, 2);
  const MLPSpec spec{{4, 64, 1}};
  const Params p = init(spec, 1, InitOptions{1.0});
  const SeemReport s = seem(spec, p, d, 0.99, true);
  REQUIRE(s.dominant.has_value());
  const Rollout r = linearized_rollout(s.a, std::vector<double>(30, 1.0), 0.1 / s.a.norm(), 1000);
  CHECK(r.alignment.back() >= 0.99);
}

TEST_CASE("one small SGD step follows the linearized dynamics") {
  const Dataset d = toy_nav_dataset(40, 3);
  const MLPSpec spec{{4, 64, 1}};
  const Network net(spec);
  const Params p = init(spec, 2, InitOptions{1.0});
  const LinearizationCheck c = linearization_check(net, p.theta, d, 0.99, 1e-5);
  CHECK(c.argmax_unchanged);
  CHECK(c.eta_effective == doctest::Approx(1e-5 / 40.0));
  CHECK(c.residual <= 0.05);
}
