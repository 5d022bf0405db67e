#include <gtest/gtest.h>

#include <filesystem>
#include <map>

#include "test_support.hpp"

using namespace cmdp;
using namespace cmdp::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cmdp_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::map<std::string, std::string> directory_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = read_text(e.path());
  return out;
}

void expect_parse_error(const std::string& text, const std::string& fragment) {
  try {
    model_from_json(nlohmann::json::parse(text));
    FAIL() << "expected an error for " << text;
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

ExperimentConfig small_suite(const fs::path& out, int workers) {
  ExperimentConfig c;
  c.model.generated = true;
  c.model.states = 2;
  c.model.actions = 2;
  c.model.seed = 59;
  c.algorithms = {"ergodic-po", "fh-opt1", "fh-opt2"};
  c.T = 240;
  c.seeds = {1, 2, 3};
  c.checkpoints = default_checkpoints(c.T);
  c.output_dir = out;
  c.max_workers = workers;
  return c;
}

}  // namespace

TEST(LoadModel, ShippedModelsValidate) {
  for (const char* name : {"two_state_constrained.json", "four_state_ergodic.json", "single_state.json",
                           "two_state_symmetric.json"}) {
    const CmdpModel m = load_model(data_path(std::string("models/") + name));
    EXPECT_TRUE(m.ergodic) << name;
    EXPECT_TRUE(every_policy_ergodic(m.transition)) << name;
  }
}

TEST(LoadModel, RoundTripsThroughJson) {
  const CmdpModel m = load_model(data_path("models/four_state_ergodic.json"));
  const CmdpModel again = model_from_json(model_to_json(m));
  EXPECT_EQ(again.transition, m.transition);
  EXPECT_EQ(again.reward, m.reward);
  EXPECT_EQ(again.cost, m.cost);
  EXPECT_EQ(again.threshold, m.threshold);
  EXPECT_EQ(again.c0, m.c0);
}

TEST(LoadModel, ReportsErrors) {
  const std::string ok_tail = R"("threshold": 0.5, "transition": [[[1.0]]]})";
  expect_parse_error(R"({"num_states": 1, "num_actions": 1, "reward": [[2.0]], "cost": [[0.0]], )" + ok_tail,
                     "reward range");
  expect_parse_error(R"({"num_states": 1, "num_actions": 1, "reward": [[0.5]], "cost": [[-0.1]], )" + ok_tail,
                     "cost range");
  expect_parse_error(
      R"({"num_states": 1, "num_actions": 1, "reward": [[0.5]], "cost": [[0.1]], "threshold": 0.5, "transition": [[[0.9]]]})",
      "transition row (0,0) sums to");
  expect_parse_error(R"({"num_states": 1, "num_actions": 1, "reward": [[0.5]], "cost": [[0.1]]})", "threshold");
  expect_parse_error(R"({"num_states": 2, "num_actions": 1, "reward": [[0.5]], "cost": [[0.1]], )" + ok_tail,
                     "ParseError");
  try {
    load_model(data_path("models/does_not_exist.json"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
  }
}

TEST(Generator, ProducesFeasibleErgodicModels) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const int S = 1 + static_cast<int>(seed % 4), A = 1 + static_cast<int>((seed / 4) % 3);
    const CmdpModel m = generate_random_ergodic(S, A, seed);
    EXPECT_NO_THROW(validate(m));
    EXPECT_TRUE(every_policy_ergodic(m.transition));
    ASSERT_TRUE(m.c0.has_value());
    EXPECT_LE(*m.c0, m.threshold);
    const ConstrainedOptimum opt = optimal_constrained(m, 0.0);
    EXPECT_LE(opt.j_star_cost, m.threshold + 1e-9);
    const double safe = average_utility(stationary_distribution(StationaryPolicy(*m.safe_policy), m), m.cost);
    EXPECT_NEAR(safe, *m.c0, 1e-9);
  }
}

TEST(Generator, DeterministicPerSeed) {
  const CmdpModel a = generate_random_ergodic(3, 2, 77), b = generate_random_ergodic(3, 2, 77);
  EXPECT_EQ(a.transition, b.transition);
  EXPECT_EQ(a.reward, b.reward);
  EXPECT_NE(generate_random_ergodic(3, 2, 78).reward, a.reward);
}

TEST(Metrics, Example) {
  const std::vector<StepRecord> steps{{0, 0, 1.0, 0.0}, {0, 0, 0.0, 1.0}, {0, 0, 0.5, 0.5}, {0, 0, 0.25, 0.0}};
  const MetricCurves m = compute_metrics(steps, 0.5, 0.25, {1, 2, 4});
  EXPECT_EQ(m.regret, (std::vector<double>{-0.5, 0.0, 0.25}));
  EXPECT_EQ(m.violation, (std::vector<double>{-0.25, 0.5, 0.5}));
  EXPECT_THROW(compute_metrics(steps, 0.5, 0.25, {0, 2}), Error);
  EXPECT_THROW(compute_metrics(steps, 0.5, 0.25, {5}), Error);
  EXPECT_THROW(compute_metrics(steps, 0.5, 0.25, {3, 2}), Error);
}

TEST(Metrics, CsvRoundTrip) {
  MetricCurves m;
  m.checkpoints = {10, 20};
  m.regret = {0.1, -1.0 / 3.0};
  m.violation = {2.5e-17, 4.0};
  const fs::path dir = scratch_dir("metrics");
  write_text(dir / "m.csv", metrics_csv(m));
  const MetricCurves back = read_metrics_csv(dir / "m.csv");
  EXPECT_EQ(back.checkpoints, m.checkpoints);
  EXPECT_EQ(back.regret, m.regret);
  EXPECT_EQ(back.violation, m.violation);
}

TEST(Quantile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(quantile({3.0, 1.0, 2.0, 4.0}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({3.0, 1.0, 2.0, 4.0}, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile({7.0}, 0.75), 7.0);
  EXPECT_THROW(quantile({}, 0.5), Error);
}

TEST(Plot, SingleCurveIsItsOwnBand) {
  MetricCurves m;
  m.checkpoints = {1, 2, 3};
  m.regret = {0.5, 1.0, 1.5};
  m.violation = {-1.0, 0.0, 2.0};
  const PlotTable p = plot_table({m});
  EXPECT_EQ(p.regret_median, m.regret);
  EXPECT_EQ(p.regret_q25, m.regret);
  EXPECT_EQ(p.regret_q75, m.regret);
  EXPECT_EQ(p.violation_median, m.violation);
  const fs::path dir = scratch_dir("plot");
  emit_plot_data({m}, dir, "x");
  EXPECT_TRUE(fs::exists(dir / "x_plot.csv"));
  EXPECT_NE(read_text(dir / "x_regret.svg").find("<svg"), std::string::npos);
  EXPECT_NE(read_text(dir / "x_violation.svg").find("<polyline"), std::string::npos);
}

TEST(Toml, ParsesSupportedSubset) {
  const auto j = toml::parse(R"(# comment
algorithm = "fh-opt1"
T = 1_000
delta = 0.05
flag = true
seeds = [1, 2,
         3]   # trailing
[model]
path = "m.json"
[params]
mode = 'practical'
point = { x = 1.5, y = -2e3 }
[a.b]
c.d = "nested"
)");
  EXPECT_EQ(j.at("algorithm"), "fh-opt1");
  EXPECT_EQ(j.at("T"), 1000);
  EXPECT_DOUBLE_EQ(j.at("delta").get<double>(), 0.05);
  EXPECT_EQ(j.at("flag"), true);
  EXPECT_EQ(j.at("seeds"), nlohmann::json({1, 2, 3}));
  EXPECT_EQ(j.at("model").at("path"), "m.json");
  EXPECT_EQ(j.at("params").at("mode"), "practical");
  EXPECT_DOUBLE_EQ(j.at("params").at("point").at("y").get<double>(), -2000.0);
  EXPECT_EQ(j.at("a").at("b").at("c").at("d"), "nested");
}

TEST(Toml, ReportsLineOfError) {
  try {
    toml::parse("a = 1\nb = \n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(toml::parse("a = 1\na = 2\n"), Error);
}

TEST(Config, ReadsShippedConfigs) {
  int seen = 0;
  for (const auto& e : fs::directory_iterator(data_path("configs"))) {
    const ExperimentConfig c = load_config(e.path());
    EXPECT_FALSE(c.algorithms.empty()) << e.path();
    EXPECT_NO_THROW(check_config(c));
    ++seen;
  }
  EXPECT_GE(seen, 4);
}

TEST(Config, RejectsBadValues) {
  const nlohmann::json base = {{"algorithm", "fh-opt1"}, {"T", 100}, {"seeds", {1}},
                               {"model", {{"generator", "random_ergodic"}}}};
  EXPECT_NO_THROW(config_from_json(base, "."));
  auto bad = base;
  bad["algorithm"] = "nope";
  EXPECT_THROW(config_from_json(bad, "."), Error);
  bad = base;
  bad["checkpoints"] = {50, 200};
  EXPECT_THROW(config_from_json(bad, "."), Error);
  bad = base;
  bad["seeds"] = nlohmann::json::array();
  EXPECT_THROW(config_from_json(bad, "."), Error);
  bad = base;
  bad["params"] = {{"mode", "fast"}};
  EXPECT_THROW(config_from_json(bad, "."), Error);
  bad = base;
  bad.erase("T");
  EXPECT_THROW(config_from_json(bad, "."), Error);
}

TEST(Suite, WritesEveryFile) {
  const fs::path dir = scratch_dir("suite_files");
  const SuiteReport r = run_suite(small_suite(dir, 1));
  for (const auto& run : r.runs) EXPECT_TRUE(run.ok) << run.algorithm << " " << run.reason;
  const auto files = directory_contents(dir);
  EXPECT_EQ(files.size(), 3u * 3u * 3u + 3u * 3u + 1u);
  EXPECT_EQ(files.count("summary.json"), 1u);
  EXPECT_EQ(files.count("fh-opt2_seed3_episodes.csv"), 1u);
  EXPECT_EQ(files.count("ergodic-po_regret.svg"), 1u);
  const auto summary = nlohmann::json::parse(files.at("summary.json"));
  EXPECT_EQ(summary.at("T"), 240);
  EXPECT_EQ(summary.at("algorithms").at("fh-opt1").at("runs").size(), 3u);
  const MetricCurves m = read_metrics_csv(dir / "ergodic-po_seed2_metrics.csv");
  EXPECT_EQ(m.checkpoints, default_checkpoints(240));
  const auto log = files.at("fh-opt1_seed1_log.csv");
  EXPECT_EQ(log.rfind("t,state,action,reward,cost\n", 0), 0u);
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 241);
}

TEST(Suite, ByteIdenticalAcrossReruns) {
  const fs::path a = scratch_dir("suite_a"), b = scratch_dir("suite_b");
  run_suite(small_suite(a, 1));
  run_suite(small_suite(b, 3));
  const auto fa = directory_contents(a), fb = directory_contents(b);
  ASSERT_EQ(fa.size(), fb.size());
  for (const auto& [name, text] : fa) {
    ASSERT_EQ(fb.count(name), 1u) << name;
    const std::string other = fb.at(name);
    if (name == "summary.json") continue;  // output_dir differs only there
    EXPECT_EQ(text, other) << name;
  }
  EXPECT_EQ(nlohmann::json::parse(fa.at("summary.json")), nlohmann::json::parse(fb.at("summary.json")));
}

TEST(Suite, FailedRunIsRecorded) {
  ExperimentConfig c = small_suite(scratch_dir("suite_fail"), 1);
  c.algorithms = {"ergodic-po"};
  c.T = 10;  // shorter than one episode
  c.checkpoints = {10};
  const SuiteReport r = run_suite(c);
  ASSERT_EQ(r.runs.size(), 3u);
  EXPECT_FALSE(r.runs[0].ok);
  EXPECT_NE(r.runs[0].reason.find("InvalidHorizon"), std::string::npos) << r.runs[0].reason;
  EXPECT_EQ(r.summary.at("algorithms").at("ergodic-po").at("runs")[0].at("status"), "failed");
}
