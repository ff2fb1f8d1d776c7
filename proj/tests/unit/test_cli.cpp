#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include <doctest.h>

#include "seemlab/checkpoint.hpp"
#include "seemlab/cli/commands.hpp"
#include "seemlab/cli/config.hpp"
#include "seemlab/cli/summary.hpp"
#include "seemlab/errors.hpp"

using namespace seemlab;
using namespace seemlab::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() /
                     ("seemlab_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Small SGD config that crashes within a few hundred steps at gamma 0.99.
ExperimentConfig small_sgd(const fs::path& out) {
  ExperimentConfig c;
  c.hidden = {32};
  c.dataset_size = 20;
  c.optimizer = OptimizerKind::sgd;
  c.eta = 0.05;
  c.steps = 3000;
  c.record_every = 2;
  c.kernel_every = 20;
  c.sweep = {0.1, 0.99};
  c.seeds = {0, 1, 2};
  c.out = out;
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SEEMLAB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config(R"({"hidden":[64,64],"norm":"layernorm","sweep":[0.1,0.9],
      "seeds":[3,4],"optimizer":"sgd","eta":0.01,"scenario":"toy-nav"})");
  CHECK(c.hidden == std::vector<std::size_t>{64, 64});
  CHECK(c.norm == Norm::layernorm);
  CHECK(c.gammas() == std::vector<double>{0.1, 0.9});
  CHECK(c.seeds == std::vector<std::uint64_t>{3, 4});
  CHECK(c.optimizer == OptimizerKind::sgd);
  CHECK(c.scenario == Scenario::toy_nav);
  CHECK(parse_config("{}").gammas() == std::vector<double>{0.99});

  CHECK_THROWS_AS(parse_config(R"({"hiden":[64]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"eta":"fast"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"hidden":[64,-1]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"seeds":[0.5]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"norm":"batchnorm"})"), ConfigError);
  CHECK_THROWS_AS(parse_config("[1,2]"), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"gamma":1.0})").validate(), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("config round trip") {
  ExperimentConfig c = parse_config(R"({"hidden":[8],"lambdas":[1,2],"trace":"t.csv","emit_svg":true})");
  const ExperimentConfig back = parse_config(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.trace == c.trace);
  CHECK(back.hidden == c.hidden);
  CHECK(back.emit_svg);
}

TEST_CASE("shipped configs parse") {
  for (const auto& entry : fs::directory_iterator(SEEMLAB_CONFIG_DIR)) {
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path()).validate());
  }
}

TEST_CASE("derived training settings") {
  ExperimentConfig c;
  c.hidden = {16, 16};
  const MLPSpec spec = make_spec(c);
  CHECK(spec.layer_dims == std::vector<std::size_t>{4, 16, 16, 1});
  CHECK(make_spec(c, 2).layer_dims.front() == 2);
  const TrainConfig tc = make_train_config(c, 0.5, 7);
  CHECK(tc.gamma == 0.5);
  CHECK(tc.seed == 7);
  CHECK(tc.spec == spec);
  c.dataset_fraction = 0.5;
  CHECK(make_dataset(c, 1).size() == 50);
}

TEST_CASE("summary JSON round trip and strictness") {
  RunSummary s;
  s.command = "run";
  RunResult r;
  r.gamma = 0.99;
  r.seed = 2;
  r.optimizer = "sgd";
  r.diverged = true;
  r.crash_step = 412;
  r.final_step = 411;
  r.final_q_abs_mean = 8.5e5;
  r.t0 = 120;
  r.seem = 0.25;
  r.seem_norm = 0.01;
  r.seem_step = 120;
  r.predicted_t = 420.5;
  r.crash_fit_r2 = 0.998;
  r.trace_file = "trace_gamma0.99_seed2.csv";
  s.runs.push_back(r);
  RunResult stable;
  stable.gamma = 0.1;
  stable.optimizer = "adam";
  stable.adam = AdamSlopes{0.1, 0.11, 2.5, 3.0};
  s.runs.push_back(stable);
  s.aggregate = aggregate(s.runs);
  CHECK(s.aggregate.runs == 2);
  CHECK(s.aggregate.diverged == 1);

  const std::string text = to_json(s);
  CHECK(summary_from_json(text) == s);

  // Dropping any field, even a null one, is an error.
  for (const std::string key : {"\"t0\"", "\"predicted_t\"", "\"aggregate\"", "\"crash_fit_error\""}) {
    CAPTURE(key);
    std::string broken = text;
    const auto pos = broken.find(key);
    REQUIRE(pos != std::string::npos);
    broken.replace(pos, key.size(), "\"renamed\"");
    CHECK_THROWS_AS(summary_from_json(broken), ConfigError);
  }
  std::string inconsistent = text;
  inconsistent.replace(inconsistent.find("412"), 3, "null");
  CHECK_THROWS_AS(summary_from_json(inconsistent), ConfigError);
}

TEST_CASE("run writes one trace per (gamma, seed) and is deterministic") {
  const fs::path out = scratch_dir("run");
  const ExperimentConfig c = small_sgd(out);
  const RunSummary s = cmd_run(c);
  REQUIRE(s.runs.size() == 6);
  for (double g : {0.1, 0.99}) {
    for (std::uint64_t seed : {0, 1, 2}) {
      CHECK(fs::exists(out / ("trace_" + run_stem(g, seed) + ".csv")));
      const Checkpoint ck = load_checkpoint(out / ("checkpoint_" + run_stem(g, seed) + ".json"));
      CHECK(ck.spec == make_spec(c));
    }
  }
  CHECK(fs::exists(out / "summary.json"));
  for (const RunResult& r : s.runs) {
    if (r.gamma == 0.1) CHECK_FALSE(r.diverged);
    if (r.gamma == 0.99) {
      CHECK(r.diverged);
      CHECK((r.predicted_t.has_value() || r.crash_fit_error.has_value()));
    }
  }
  CHECK(summary_from_json(slurp(out / "summary.json")) == s);

  const std::string first = slurp(out / "summary.json");
  const std::string trace = slurp(out / ("trace_" + run_stem(0.99, 1) + ".csv"));
  CHECK(cmd_run(c) == s);
  CHECK(slurp(out / "summary.json") == first);
  CHECK(slurp(out / ("trace_" + run_stem(0.99, 1) + ".csv")) == trace);
  fs::remove_all(out);
}

TEST_CASE("seem sweep table") {
  const fs::path out = scratch_dir("sweep");
  ExperimentConfig c = small_sgd(out);
  c.sweep = {0.0, 0.99};
  c.seeds = {0};
  const RunSummary s = cmd_seem_sweep(c);
  REQUIRE(s.runs.size() == 2);
  CHECK(s.runs[0].gamma == 0.0);
  REQUIRE(s.runs[0].seem.has_value());
  CHECK(*s.runs[0].seem <= 0.0);
  CHECK_FALSE(s.runs[0].diverged);
  std::ifstream in(out / "seem_sweep.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "gamma,seed,seem,seem_norm,seem_step,t0,diverged");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 2);

  c.sweep.clear();
  CHECK_THROWS_AS(cmd_seem_sweep(c), ConfigError);
  fs::remove_all(out);
}

TEST_CASE("crash prediction from a fresh run and from a trace file") {
  const fs::path out = scratch_dir("crash");
  ExperimentConfig c = small_sgd(out);
  c.sweep.clear();
  c.gamma = 0.99;
  c.seeds = {2};
  const CrashPrediction p = cmd_predict_crash(c);
  REQUIRE(p.observed_crash.has_value());
  CHECK(p.fit.predicted_t > p.fit.t_end);
  CHECK(fs::exists(out / "crash_fit.json"));

  cmd_run(c);
  c.trace = out / ("trace_" + run_stem(0.99, 2) + ".csv");
  const CrashPrediction q = cmd_predict_crash(c);
  CHECK(q.fit.predicted_t == doctest::Approx(p.fit.predicted_t).epsilon(1e-9));
  fs::remove_all(out);
}

TEST_CASE("homogeneity from a checkpoint") {
  const fs::path out = scratch_dir("homog");
  ExperimentConfig c = small_sgd(out);
  c.sweep.clear();
  c.seeds = {0};
  cmd_run(c);
  c.checkpoint = out / ("checkpoint_" + run_stem(0.99, 0) + ".json");
  const auto rows = cmd_homogeneity(c);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].output_ratio == 1.0);
  CHECK(fs::exists(out / "homogeneity.csv"));
  fs::remove_all(out);
}

TEST_CASE("NTK map smoke test") {
  const fs::path out = scratch_dir("map");
  ExperimentConfig c;
  c.hidden = {64};
  c.grid_points = 3;
  c.grid_lo = -1.0;
  c.grid_hi = 1.0;
  c.out = out;
  c.emit_svg = true;
  const NtkMap m = cmd_ntk_map(c);
  CHECK(m.values.size() == 9);
  const fs::path csv = out / "ntk_map_none.csv";
  const std::string first = slurp(csv);
  std::size_t lines = 0;
  for (char ch : first) lines += ch == '\n';
  CHECK(lines == 10);
  CHECK(fs::exists(out / "ntk_map_none.svg"));
  cmd_ntk_map(c);
  CHECK(slurp(csv) == first);

  c.norm = Norm::layernorm;
  cmd_ntk_map(c);
  CHECK(fs::exists(out / "ntk_map_layernorm.csv"));
  fs::remove_all(out);
}

TEST_CASE("Baird command") {
  const fs::path out = scratch_dir("baird");
  ExperimentConfig c;
  c.scenario = Scenario::baird;
  c.eta = 0.01;
  c.steps = 20000;
  c.out = out;
  const auto variants = cmd_baird(c);
  REQUIRE(variants.size() == 2);
  CHECK(variants[0].name == "plain");
  CHECK(variants[0].final_theta_norm > 1e6);
  CHECK(variants[1].name == "layernorm");
  CHECK_FALSE(variants[1].diverged);
  CHECK(variants[1].final_td_error < 1e-3);
  CHECK(fs::exists(out / "baird_plain.csv"));
  CHECK(fs::exists(out / "baird_layernorm.csv"));
  CHECK(fs::exists(out / "baird.json"));

  c.gamma = 0.0;
  const auto regression = cmd_baird(c);
  CHECK_FALSE(regression[0].diverged);
  CHECK(regression[0].final_td_error < 1e-3);
  fs::remove_all(out);
}

TEST_CASE("command-line exit codes") {
  const fs::path out = scratch_dir("exit");
  fs::create_directories(out);
  const fs::path bad = out / "bad.json";
  std::ofstream(bad) << R"({"learning_rate": 0.1})";
  CHECK(run_cli("run --config " + bad.string() + " --out " + out.string()) == 2);
  CHECK(run_cli("run --norm batchnorm --out " + out.string()) == 2);
  CHECK(run_cli("run --config /nonexistent.json") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("baird --steps 200 --eta 0.01 --out " + out.string()) == 0);
  CHECK(fs::exists(out / "baird.json"));
  fs::remove_all(out.parent_path());
}
