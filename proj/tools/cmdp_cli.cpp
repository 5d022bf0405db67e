#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "cmdp/cmdp.hpp"

namespace {

int cmd_solve(const std::string& path, double epsilon) {
  const cmdp::CmdpModel model = cmdp::load_model(path);
  const cmdp::ConstrainedOptimum opt = cmdp::optimal_constrained(model, epsilon);
  std::cout << "J_star " << cmdp::format_double(opt.j_star) << "\n";
  std::cout << "J_star_cost " << cmdp::format_double(opt.j_star_cost) << "\n";
  std::cout << "tau " << cmdp::format_double(model.threshold) << "\n";
  for (int s = 0; s < model.num_states; ++s) {
    std::cout << "pi[" << s << "]";
    for (int a = 0; a < model.num_actions; ++a) std::cout << ' ' << cmdp::format_double(opt.policy(s, a));
    std::cout << "\n";
  }
  return 0;
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, std::optional<std::string> algorithm) {
  cmdp::ExperimentConfig config = cmdp::load_config(path);
  if (seed) config.seeds = {*seed};
  config.seeds.resize(1);
  if (algorithm) config.algorithms = {*algorithm};
  config.algorithms.resize(1);
  cmdp::check_config(config);
  const cmdp::SuiteContext ctx = cmdp::prepare_suite(config);
  const cmdp::RunOutcome out = cmdp::execute_run(config, ctx, config.algorithms[0], config.seeds[0]);
  if (!out.ok) {
    std::cerr << "run failed: " << out.reason << "\n";
    return 1;
  }
  std::cout << "wrote " << (config.output_dir / cmdp::run_prefix(out.algorithm, out.seed)).string() << "_*.csv\n";
  std::cout << "R_T " << cmdp::format_double(out.curves.regret.back()) << "\n";
  std::cout << "C_T " << cmdp::format_double(out.curves.violation.back()) << "\n";
  return 0;
}

int cmd_suite(const std::string& path) {
  const cmdp::ExperimentConfig config = cmdp::load_config(path);
  const cmdp::SuiteReport report = cmdp::run_suite(config);
  int failed = 0;
  for (const auto& r : report.runs) {
    if (r.ok) continue;
    ++failed;
    std::cerr << r.algorithm << " seed " << r.seed << " failed: " << r.reason << "\n";
  }
  std::cout << "wrote " << (config.output_dir / "summary.json").string() << " (" << report.runs.size() - failed
            << " ok, " << failed << " failed)\n";
  return failed == 0 ? 0 : 2;
}

int cmd_plot(const std::vector<std::string>& files, const std::string& out_dir, const std::string& prefix) {
  std::vector<cmdp::MetricCurves> curves;
  for (const auto& f : files) curves.push_back(cmdp::read_metrics_csv(f));
  cmdp::emit_plot_data(curves, out_dir, prefix);
  std::cout << "wrote " << (std::filesystem::path(out_dir) / prefix).string() << "_{plot.csv,regret.svg,violation.svg}\n";
  return 0;
}

int cmd_gen(int states, int actions, std::uint64_t seed, double min_self_loop, const std::string& out) {
  const cmdp::CmdpModel model = cmdp::generate_random_ergodic(states, actions, seed, min_self_loop);
  if (out.empty())
    std::cout << cmdp::model_to_json(model).dump(2) << "\n";
  else
    cmdp::save_model(model, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained MDP learning toolkit"};
  app.require_subcommand(1);

  std::string model_path;
  double epsilon = 0.0;
  auto* solve = app.add_subcommand("solve", "Print the constrained-optimal policy of a model");
  solve->add_option("model", model_path, "Model JSON file")->required();
  solve->add_option("--epsilon", epsilon, "Tighten the threshold by this slack");

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> algorithm;
  auto* run = app.add_subcommand("run", "Run one seed of a config");
  run->add_option("config", config_path, "TOML config")->required();
  run->add_option("--seed", seed, "Override the seed");
  run->add_option("--algorithm", algorithm, "Override the algorithm");

  auto* suite = app.add_subcommand("suite", "Run every algorithm and seed of a config");
  suite->add_option("config", config_path, "TOML config")->required();

  std::vector<std::string> metric_files;
  std::string out_dir = ".";
  std::string prefix = "plot";
  auto* plot = app.add_subcommand("plot", "Aggregate metrics CSVs into plot data and SVG charts");
  plot->add_option("metrics", metric_files, "Metrics CSV files")->required();
  plot->add_option("--out", out_dir, "Output directory");
  plot->add_option("--prefix", prefix, "Output file prefix");

  int states = 2, actions = 2;
  std::uint64_t gen_seed = 0;
  double min_self_loop = 0.5;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Write a random ergodic model");
  gen->add_option("--states", states, "Number of states")->required();
  gen->add_option("--actions", actions, "Number of actions")->required();
  gen->add_option("--seed", gen_seed, "Generator seed")->required();
  gen->add_option("--min-self-loop", min_self_loop, "Transition floor times S");
  gen->add_option("--out", gen_out, "Output path (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*solve) return cmd_solve(model_path, epsilon);
    if (*run) return cmd_run(config_path, seed, algorithm);
    if (*suite) return cmd_suite(config_path);
    if (*plot) return cmd_plot(metric_files, out_dir, prefix);
    if (*gen) return cmd_gen(states, actions, gen_seed, min_self_loop, gen_out);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
