#include <algorithm>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "seemlab/checkpoint.hpp"
#include "seemlab/errors.hpp"
#include "seemlab/net.hpp"
#include "seemlab/rng.hpp"
#include "support/oracles.hpp"

using namespace seemlab;
using namespace seemlab::oracle;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

}  // namespace

TEST_CASE("parameter counts") {
  CHECK(MLPSpec{{3, 4, 1}}.param_count() == 21);
  CHECK(MLPSpec{{2, 200, 1}}.param_count() == 801);
  CHECK(init(MLPSpec{{2, 200, 1}}, 0).size() == 801);
  // LayerNorm adds gain and shift per hidden unit; WeightNorm one scale per output unit.
  CHECK(MLPSpec{{3, 4, 1}, Norm::layernorm}.param_count() == 21 + 8);
  CHECK(MLPSpec{{3, 4, 1}, Norm::layernorm_no_affine}.param_count() == 21);
  CHECK(MLPSpec{{3, 4, 1}, Norm::weightnorm}.param_count() == 22);
  CHECK(MLPSpec{{8, 1}, Norm::none, Norm::layernorm}.param_count() == 9 + 16);
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS((MLPSpec{{3}}.validate()), ConfigError);
  CHECK_THROWS_AS((MLPSpec{{3, 4, 2}}.validate()), ConfigError);
  CHECK_THROWS_AS((MLPSpec{{3, 0, 1}}.validate()), ConfigError);
  CHECK_NOTHROW((MLPSpec{{3, 1}}.validate()));
  CHECK(parse_norm("layernorm-no-affine") == Norm::layernorm_no_affine);
  CHECK(parse_norm("layernorm_no_affine") == Norm::layernorm_no_affine);
  CHECK_THROWS_AS(parse_norm("batchnorm"), ConfigError);
}

TEST_CASE("layout blocks tile the parameter vector") {
  for (Norm n : {Norm::none, Norm::layernorm, Norm::layernorm_no_affine, Norm::weightnorm}) {
    const MLPSpec spec{{3, 5, 4, 1}, n, Norm::layernorm};
    const Layout lay = make_layout(spec);
    std::vector<int> hits(lay.total, 0);
    auto mark = [&](std::size_t off, std::size_t len) {
      if (off == npos) return;
      for (std::size_t i = 0; i < len; ++i) ++hits.at(off + i);
    };
    mark(lay.input_gain, 3);
    mark(lay.input_shift, 3);
    for (const LayerSlice& s : lay.layers) {
      mark(s.weight, s.in * s.out);
      mark(s.bias, s.out);
      mark(s.gain, s.out);
      mark(s.shift, s.out);
      mark(s.scale, s.out);
    }
    CHECK(lay.total == spec.param_count());
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  }
}

TEST_CASE("init is deterministic and fan-in scaled") {
  const MLPSpec spec{{4, 16, 16, 1}, Norm::layernorm};
  const Params a = init(spec, 5);
  CHECK(a == init(spec, 5));
  CHECK_FALSE(a == init(spec, 6));
  const Layout lay = make_layout(spec);
  for (const LayerSlice& s : lay.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.in));
    for (std::size_t i = 0; i < s.in * s.out; ++i) CHECK(std::abs(a.theta[s.weight + i]) <= bound);
    for (std::size_t i = 0; i < s.out; ++i) {
      CHECK(a.theta[s.bias + i] == 0.0);
      if (s.gain != npos) CHECK(a.theta[s.gain + i] == 1.0);
      if (s.shift != npos) CHECK(a.theta[s.shift + i] == 0.0);
    }
  }
  const Params b = init(spec, 5, InitOptions{1.0});
  CHECK(b.theta[lay.layers[0].bias] != 0.0);
}

TEST_CASE("weightnorm scale starts at the row norm") {
  const MLPSpec spec{{3, 6, 1}, Norm::weightnorm};
  const Params p = init(spec, 2);
  const LayerSlice& out = make_layout(spec).layers.back();
  REQUIRE(out.scale != npos);
  const std::span<const double> row(p.theta.data() + out.weight, out.in);
  CHECK(p.theta[out.scale] == doctest::Approx(norm2(row)));
  // Same function as the unnormalized net with identical weights.
  const MLPSpec plain{{3, 6, 1}};
  Params q = init(plain, 2);
  const Layout pl = make_layout(plain);
  std::copy(p.theta.begin(), p.theta.begin() + static_cast<long>(pl.total), q.theta.begin());
  const std::vector<double> x{0.3, -0.2, 0.9};
  CHECK(forward(spec, p, x) == doctest::Approx(forward(plain, q, x)).epsilon(1e-12));
}

TEST_CASE("zero parameters give zero output") {
  for (Norm n : {Norm::none, Norm::layernorm, Norm::layernorm_no_affine}) {
    const MLPSpec spec{{3, 7, 5, 1}, n};
    const Params z{std::vector<double>(spec.param_count(), 0.0)};
    CHECK(forward(spec, z, std::vector<double>{1.0, -2.0, 0.5}) == 0.0);
  }
}

TEST_CASE("single hidden unit hand trace") {
  const MLPSpec spec{{2, 1, 1}};
  const Layout lay = make_layout(spec);
  Params p{std::vector<double>(spec.param_count(), 0.0)};
  p.theta[lay.layers[0].weight] = 1.0;
  p.theta[lay.layers[1].weight] = 1.0;
  CHECK(forward(spec, p, std::vector<double>{2.0, 5.0}) == 2.0);
  CHECK(forward(spec, p, std::vector<double>{-2.0, 5.0}) == 0.0);
}

TEST_CASE("forward rejects wrong input size") {
  const MLPSpec spec{{3, 4, 1}};
  CHECK_THROWS_AS(forward(spec, init(spec, 0), std::vector<double>{1.0, 2.0}), DimensionError);
  CHECK_THROWS_AS(forward(spec, Params{{1.0}}, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST_CASE("linear network gradient is (x, 1)") {
  const MLPSpec spec{{3, 1}};
  const Params p = init(spec, 9);
  const Mat x = Mat::from_rows({{0.5, -1.0, 2.0}, {3.0, 0.0, -0.25}});
  const GradientFeatures phi = gradient_features(spec, p, x);
  REQUIRE(phi.params() == 4);
  REQUIRE(phi.samples() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto col = phi.column(i);
    for (std::size_t j = 0; j < 3; ++j) CHECK(col[j] == x(i, j));
    CHECK(col[3] == 1.0);
  }
  CHECK_THROWS_AS(gradient_features(spec, p, Mat(0, 3)), DimensionError);
}

TEST_CASE("reverse-mode gradients match central differences") {
  const std::vector<MLPSpec> archs = {
      {{3, 1}},
      {{4, 8, 1}},
      {{4, 6, 5, 1}},
      {{4, 8, 1}, Norm::layernorm},
      {{3, 6, 5, 1}, Norm::layernorm},
      {{4, 8, 1}, Norm::layernorm_no_affine},
      {{4, 8, 1}, Norm::weightnorm},
      {{8, 1}, Norm::none, Norm::layernorm},
      {{5, 7, 1}, Norm::layernorm, Norm::layernorm},
      {{4, 6, 6, 1}, Norm::weightnorm},
  };
  Rng rng(42);
  std::size_t checked = 0;
  double worst = 0.0;
  for (std::size_t c = 0; c < 100; ++c) {
    const MLPSpec& spec = archs[c % archs.size()];
    const Network net(spec);
    Params p = init(spec, c, InitOptions{1.0});
    // Move LayerNorm gains and shifts off their init so they carry gradient signal.
    for (double& v : p.theta) v += rng.uniform(-0.1, 0.1);
    auto ws = net.make_workspace();
    std::vector<double> x;
    for (int tries = 0; tries < 50; ++tries) {
      x = random_vec(spec.input_dim(), rng, 2.0);
      net.forward(p.theta, x, ws);
      if (kink_margin(net, ws) > 1e-3) break;
    }
    std::vector<double> g(p.size(), 0.0);
    net.accumulate_gradient(p.theta, x, 1.0, g, ws);
    worst = std::max(worst, relative_gradient_error(g, fd_gradient(net, p.theta, x)));
    ++checked;
  }
  CHECK(checked == 100);
  CHECK(worst <= 1e-5);
}

TEST_CASE("layernorm is scale invariant") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    for (double spread : {1.0, 1e3}) {
      const auto z = random_vec(16, rng, spread);
      const auto base = layernorm(z);
      double centered = 0.0;
      double mean = 0.0;
      for (double v : z) mean += v / 16.0;
      for (double v : z) centered += (v - mean) * (v - mean);
      centered = std::sqrt(centered);
      for (double lambda : {2.0, 10.0, 100.0}) {
        std::vector<double> zs = z;
        for (double& v : zs) v *= lambda;
        const auto scaled = layernorm(zs);
        double diff = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) diff += std::pow(scaled[i] - base[i], 2);
        diff = std::sqrt(diff);
        // The epsilon guard is the only scale-dependent term.
        CHECK(diff <= norm2(base) * (kLayerNormEps / centered + 1e-14));
        if (centered >= 100.0) CHECK(diff <= 1e-10 * norm2(base));
      }
      double out_mean = 0.0;
      for (double v : base) out_mean += v / 16.0;
      CHECK(std::abs(out_mean) <= 1e-12);
      CHECK(norm2(base) == doctest::Approx(4.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("kernel is symmetric with nonnegative diagonal") {
  const MLPSpec spec{{3, 32, 32, 1}, Norm::layernorm};
  const Params p = init(spec, 1, InitOptions{1.0});
  Rng rng(8);
  for (int i = 0; i < 10; ++i) {
    const auto x = random_vec(3, rng);
    const auto y = random_vec(3, rng);
    CHECK(ntk(spec, p, x, y) == doctest::Approx(ntk(spec, p, y, x)).epsilon(1e-12));
    CHECK(ntk(spec, p, x, x) >= 0.0);
  }
  Mat xs(6, 3);
  for (double& v : xs.data()) v = rng.uniform(-1.0, 1.0);
  const auto phi = gradient_features(spec, p, xs);
  const Mat g = gram(phi, phi);
  CHECK((g - g.transposed()).norm() <= 1e-12 * g.norm());
  for (auto z : eigenvalues(g).eigenvalues) CHECK(z.real() >= -1e-9 * g.norm());
}

TEST_CASE("plain network kernel grows linearly along a ray") {
  const MLPSpec spec{{2, 64, 1}};
  const Params p = init(spec, 4, InitOptions{1.0});
  const std::vector<double> x{0.3, -0.7};
  auto ratio = [&](double lambda) {
    return ntk(spec, p, x, std::vector<double>{lambda * x[0], lambda * x[1]}) / lambda;
  };
  const double r3 = ratio(1e3), r4 = ratio(1e4);
  CHECK(r4 > 0.0);
  CHECK(r3 == doctest::Approx(r4).epsilon(1e-2));
}

TEST_CASE("scaled parameters scale weight gradients by lambda^(L-1)") {
  const MLPSpec spec{{3, 16, 16, 1}};
  const Params p = init(spec, 12);
  const Mat x = Mat::from_rows({{0.1, 0.4, -0.3}, {1.0, -1.0, 0.5}});
  const auto base = gradient_features(spec, p, x);
  const auto scaled = gradient_features(spec, scale_params(p, 3.0), x);
  for (const LayerSlice& s : make_layout(spec).layers) {
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t k = s.weight; k < s.weight + s.in * s.out; ++k) {
        CHECK(scaled.column(i)[k] == doctest::Approx(9.0 * base.column(i)[k]).epsilon(1e-12));
      }
    }
  }
  CHECK(scale_params(p, 1.0) == p);
}

TEST_CASE("checkpoint round trip is exact") {
  const MLPSpec spec{{4, 8, 1}, Norm::layernorm, Norm::layernorm};
  Checkpoint c{spec, init(spec, 3, InitOptions{1.0}), 1234, Rng(5).state()};
  c.params.theta[0] = 1.0 / 3.0;
  const Checkpoint back = checkpoint_from_json(to_json(c));
  CHECK(back == c);
  CHECK_THROWS_AS(checkpoint_from_json("{\"format\":\"other\"}"), ConfigError);
  Checkpoint bad = c;
  bad.params.theta[1] = NAN;
  CHECK_THROWS_AS(save_checkpoint(bad, "unused.json"), CrashError);
}

TEST_CASE("layernorm kernel flattens along a ray") {
  const MLPSpec spec{{2, 64, 1}, Norm::layernorm};
  const Params p = init(spec, 4, InitOptions{1.0});
  const std::vector<double> x{0.3, -0.7}, v{0.8, 0.6};
  std::vector<double> ks;
  for (double lambda : {10.0, 1e2, 1e3, 1e4}) {
    ks.push_back(ntk(spec, p, x, std::vector<double>{x[0] + lambda * v[0], x[1] + lambda * v[1]}));
  }
  double sup = 0.0;
  for (double k : ks) sup = std::max(sup, std::abs(k));
  CHECK(std::abs(ks[2] - ks[3]) <= 0.05 * sup);
}
