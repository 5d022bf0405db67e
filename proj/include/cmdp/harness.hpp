#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmdp/ergodic_po.hpp"
#include "cmdp/fh_learner.hpp"
#include "cmdp/io.hpp"
#include "cmdp/planning.hpp"
#include "cmdp/toml.hpp"

namespace cmdp {

/// Random model whose transition entries are all at least min_self_loop / S,
/// so every policy induces an irreducible aperiodic chain. The threshold sits
/// midway between the smallest and largest achievable average cost.
inline CmdpModel generate_random_ergodic(int S, int A, std::uint64_t seed, double min_self_loop = 0.5) {
  require(S >= 1 && A >= 1, ErrorCode::kInvalidArgument, "sizes must be positive");
  require(min_self_loop > 0.0 && min_self_loop < 1.0, ErrorCode::kInvalidArgument,
          "min_self_loop must lie in (0, 1)");
  Rng rng(seed);
  CmdpModel m;
  m.num_states = S;
  m.num_actions = A;
  m.transition = TransitionTensor(S, A);
  const double floor = min_self_loop / S;
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      std::vector<double> w(static_cast<std::size_t>(S));
      double total = 0.0;
      for (double& v : w) total += (v = rng.uniform() + 1e-12);
      double sum = 0.0;
      for (int n = 0; n < S; ++n)
        sum += (m.transition(s, a, n) = floor + (1.0 - min_self_loop) * w[static_cast<std::size_t>(n)] / total);
      // Fold the rounding residue into the largest entry.
      auto row = m.transition.row(s, a);
      *std::max_element(row.begin(), row.end()) += 1.0 - sum;
    }
  m.reward.resize(S, A);
  m.cost.resize(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) m.reward(s, a) = rng.uniform();
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) m.cost(s, a) = rng.uniform();
  m.ergodic = true;
  m.threshold = 1.0;
  const ConstrainedOptimum low = extreme_cost(m, true);
  const ConstrainedOptimum high = extreme_cost(m, false);
  const double cmin = low.j_star_cost;
  const double cmax = high.j_star_cost;
  m.threshold = cmax - cmin > 1e-9 ? 0.5 * (cmin + cmax) : std::min(1.0, cmin + 0.5 * (1.0 - cmin));
  m.c0 = cmin;
  m.safe_policy = low.policy.probs();
  validate(m);
  return m;
}

struct ModelSource {
  std::filesystem::path path;
  bool generated = false;
  int states = 2;
  int actions = 2;
  std::uint64_t seed = 0;
  double min_self_loop = 0.5;
};

struct ExperimentConfig {
  ModelSource model;
  std::vector<std::string> algorithms;
  std::int64_t T = 0;
  double delta = 0.1;
  std::vector<std::uint64_t> seeds;
  ParameterMode mode = ParameterMode::kPractical;
  PracticalKnobs knobs;
  std::optional<int> t_mix;
  std::optional<double> t_hit;
  int sample_policies = 100;
  std::optional<double> c0;
  std::optional<SpanBudget> span;
  FhOptions fh;
  std::filesystem::path output_dir = "results";
  std::vector<std::int64_t> checkpoints;
  int start_state = 0;
  int max_workers = 1;
  bool write_step_logs = true;
};

inline std::vector<std::int64_t> default_checkpoints(std::int64_t T) {
  std::vector<std::int64_t> out;
  for (std::int64_t div : {16, 8, 4, 2, 1}) {
    const std::int64_t t = T / div;
    if (t >= 1 && (out.empty() || out.back() != t)) out.push_back(t);
  }
  return out;
}

inline void check_config(const ExperimentConfig& c) {
  require(c.T >= 1, ErrorCode::kInvalidArgument, "T must be >= 1");
  require(!c.seeds.empty(), ErrorCode::kInvalidArgument, "seeds must be nonempty");
  require(!c.algorithms.empty(), ErrorCode::kInvalidArgument, "no algorithm given");
  for (const auto& a : c.algorithms)
    require(a == "ergodic-po" || a == "fh-opt1" || a == "fh-opt2", ErrorCode::kInvalidArgument,
            "unknown algorithm '" + a + "'");
  require(!c.checkpoints.empty(), ErrorCode::kInvalidArgument, "checkpoints must be nonempty");
  require(std::is_sorted(c.checkpoints.begin(), c.checkpoints.end()) && c.checkpoints.front() >= 1 &&
              c.checkpoints.back() <= c.T,
          ErrorCode::kInvalidArgument, "checkpoints must be sorted and lie in [1, T]");
  require(c.max_workers >= 1, ErrorCode::kInvalidArgument, "max_workers must be >= 1");
}

/// Reads a config document; relative model paths resolve against base_dir.
inline ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  try {
    if (j.contains("algorithms")) c.algorithms = j.at("algorithms").get<std::vector<std::string>>();
    if (j.contains("algorithm")) c.algorithms.push_back(j.at("algorithm").get<std::string>());
    c.T = j.at("T").get<std::int64_t>();
    c.delta = j.value("delta", c.delta);
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.output_dir = j.value("output_dir", std::string("results"));
    if (c.output_dir.is_relative()) c.output_dir = base_dir / c.output_dir;
    c.checkpoints = j.contains("checkpoints") ? j.at("checkpoints").get<std::vector<std::int64_t>>()
                                              : default_checkpoints(c.T);
    c.start_state = j.value("start_state", 0);
    c.max_workers = j.value("max_workers", 1);
    c.write_step_logs = j.value("write_step_logs", true);

    const auto& m = j.at("model");
    if (m.contains("path")) {
      c.model.path = m.at("path").get<std::string>();
      if (c.model.path.is_relative()) c.model.path = base_dir / c.model.path;
    } else {
      require(m.value("generator", std::string()) == "random_ergodic", ErrorCode::kParseError,
              "model needs a path or generator = \"random_ergodic\"");
      c.model.generated = true;
      c.model.states = m.value("states", 2);
      c.model.actions = m.value("actions", 2);
      c.model.seed = m.value("seed", std::uint64_t{0});
      c.model.min_self_loop = m.value("min_self_loop", 0.5);
    }

    if (j.contains("params")) {
      const auto& p = j.at("params");
      const std::string mode = p.value("mode", std::string("practical"));
      require(mode == "practical" || mode == "theory", ErrorCode::kParseError, "mode must be practical or theory");
      c.mode = mode == "theory" ? ParameterMode::kTheory : ParameterMode::kPractical;
      c.knobs.horizon = p.value("horizon", c.knobs.horizon);
      c.knobs.interval = p.value("interval", c.knobs.interval);
      c.knobs.learning_rate = p.value("learning_rate", c.knobs.learning_rate);
      c.knobs.scaling = p.value("scaling", c.knobs.scaling);
      c.knobs.dual_cap = p.value("dual_cap", c.knobs.dual_cap);
      c.knobs.bonus = p.value("bonus", c.knobs.bonus);
      if (p.contains("t_mix")) c.t_mix = p.at("t_mix").get<int>();
      if (p.contains("t_hit")) c.t_hit = p.at("t_hit").get<double>();
      if (p.contains("c0")) c.c0 = p.at("c0").get<double>();
      c.sample_policies = p.value("sample_policies", c.sample_policies);
    }
    if (j.contains("span")) {
      const auto& s = j.at("span");
      c.span = SpanBudget{s.at("sp_r_star").get<double>(), s.at("sp_c_star").get<double>()};
    }
    if (j.contains("fh")) {
      const auto& f = j.at("fh");
      const std::string backend = f.value("backend", std::string("lagrangian"));
      require(backend == "lagrangian" || backend == "simplex", ErrorCode::kParseError,
              "fh.backend must be lagrangian or simplex");
      c.fh.backend = backend == "simplex" ? Opt1Backend::kSimplex : Opt1Backend::kLagrangian;
      c.fh.opt2.restarts = f.value("restarts", c.fh.opt2.restarts);
      c.fh.opt2.seed = f.value("search_seed", c.fh.opt2.seed);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseError, std::string("config: ") + e.what());
  }
  check_config(c);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_json(toml::parse(read_text(path)), path.parent_path());
}

/// Everything a run needs that does not depend on the seed.
struct SuiteContext {
  CmdpModel model;
  ConstrainedOptimum optimum;
  std::optional<PoParams> po_params;
  std::optional<SpanBudget> span;
  std::string po_error;
  std::string span_error;
};

inline CmdpModel resolve_model(const ModelSource& src) {
  if (src.generated) return generate_random_ergodic(src.states, src.actions, src.seed, src.min_self_loop);
  return load_model(src.path);
}

/// Spans of the reward and cost bias of the constrained-optimal policy.
inline SpanBudget optimal_span_budget(const CmdpModel& model, const ConstrainedOptimum& opt) {
  return SpanBudget{span(solve_bias(opt.policy, model, model.reward).bias_v),
                    span(solve_bias(opt.policy, model, model.cost).bias_v)};
}

inline SuiteContext prepare_suite(const ExperimentConfig& c) {
  SuiteContext ctx;
  ctx.model = resolve_model(c.model);
  require(c.start_state >= 0 && c.start_state < ctx.model.num_states, ErrorCode::kInvalidArgument,
          "start_state out of range");
  ctx.optimum = optimal_constrained(ctx.model, 0.0);
  const bool wants_po = std::count(c.algorithms.begin(), c.algorithms.end(), "ergodic-po") > 0;
  const bool wants_fh = std::count(c.algorithms.begin(), c.algorithms.end(), "fh-opt1") +
                            std::count(c.algorithms.begin(), c.algorithms.end(), "fh-opt2") >
                        0;
  if (wants_po) {
    try {
      std::optional<int> t_mix = c.t_mix ? c.t_mix : ctx.model.t_mix;
      std::optional<double> t_hit = c.t_hit ? c.t_hit : ctx.model.t_hit;
      if (!t_mix || !t_hit) {
        const MixingProfile prof = estimate_mixing_time(ctx.model, c.sample_policies, 0);
        if (!t_mix) t_mix = prof.t_mix;
        if (!t_hit) t_hit = prof.t_hit;
      }
      const double c0 = c.c0 ? *c.c0 : safe_policy_cost(ctx.model);
      ctx.po_params = derive_parameters(c.T, *t_mix, *t_hit, ctx.model.num_states, ctx.model.num_actions,
                                        ctx.model.threshold, c0, c.delta, c.mode, c.knobs);
    } catch (const Error& e) {
      ctx.po_error = e.what();
    }
  }
  if (wants_fh) {
    try {
      ctx.span = c.span ? *c.span : optimal_span_budget(ctx.model, ctx.optimum);
    } catch (const Error& e) {
      ctx.span_error = e.what();
    }
  }
  return ctx;
}

inline ExperimentLog run_one(const ExperimentConfig& c, const SuiteContext& ctx, const std::string& algorithm,
                             std::uint64_t seed) {
  if (algorithm == "ergodic-po") {
    require(ctx.po_params.has_value(), ErrorCode::kInvalidArgument, ctx.po_error);
    return run_ergodic_po(ctx.model, *ctx.po_params, seed, c.start_state);
  }
  require(ctx.span.has_value(), ErrorCode::kInvalidArgument, ctx.span_error);
  const FhVariant v = algorithm == "fh-opt1" ? FhVariant::kOpt1 : FhVariant::kOpt2;
  return run_finite_horizon(ctx.model, v, *ctx.span, c.T, c.delta, seed, c.start_state, c.fh);
}

struct RunOutcome {
  std::string algorithm;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string reason;
  MetricCurves curves;
  /// Kept without per-step records.
  ExperimentLog episodes;
};

struct SuiteReport {
  SuiteContext context;
  std::vector<RunOutcome> runs;
  nlohmann::json summary;
};

/// Type-7 quantile (linear interpolation between order statistics).
inline double quantile(std::vector<double> v, double q) {
  require(!v.empty(), ErrorCode::kInvalidArgument, "quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct PlotTable {
  std::vector<std::int64_t> t;
  std::vector<double> regret_median, regret_q25, regret_q75;
  std::vector<double> violation_median, violation_q25, violation_q75;
};

inline PlotTable plot_table(const std::vector<MetricCurves>& curves) {
  require(!curves.empty(), ErrorCode::kInvalidArgument, "no curves to plot");
  PlotTable out;
  out.t = curves.front().checkpoints;
  for (const auto& c : curves)
    require(c.checkpoints == out.t && c.regret.size() == out.t.size() && c.violation.size() == out.t.size(),
            ErrorCode::kInvalidArgument, "curves must share their checkpoints");
  for (std::size_t i = 0; i < out.t.size(); ++i) {
    std::vector<double> r, v;
    for (const auto& c : curves) {
      r.push_back(c.regret[i]);
      v.push_back(c.violation[i]);
    }
    out.regret_median.push_back(quantile(r, 0.5));
    out.regret_q25.push_back(quantile(r, 0.25));
    out.regret_q75.push_back(quantile(r, 0.75));
    out.violation_median.push_back(quantile(v, 0.5));
    out.violation_q25.push_back(quantile(v, 0.25));
    out.violation_q75.push_back(quantile(v, 0.75));
  }
  return out;
}

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string svg_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

/// Line chart of the median with a shaded interquartile band.
inline std::string svg_chart(const std::string& title, const std::vector<std::int64_t>& t,
                             const std::vector<double>& median, const std::vector<double>& q25,
                             const std::vector<double>& q75) {
  const double W = 640, H = 400, left = 70, right = 20, top = 40, bottom = 50;
  const double x0 = 0.0;
  const double x1 = static_cast<double>(std::max<std::int64_t>(1, t.back()));
  double y0 = std::min(0.0, *std::min_element(q25.begin(), q25.end()));
  double y1 = std::max(0.0, *std::max_element(q75.begin(), q75.end()));
  if (y1 - y0 < 1e-12) y1 = y0 + 1.0;
  const auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (W - left - right); };
  const auto py = [&](double y) { return H - bottom - (y - y0) / (y1 - y0) * (H - top - bottom); };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  s += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  s += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" + title +
       "</text>\n";
  s += "<line x1=\"" + svg_num(left) + "\" y1=\"" + svg_num(H - bottom) + "\" x2=\"" + svg_num(W - right) +
       "\" y2=\"" + svg_num(H - bottom) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + svg_num(left) + "\" y1=\"" + svg_num(top) + "\" x2=\"" + svg_num(left) + "\" y2=\"" +
       svg_num(H - bottom) + "\" stroke=\"black\"/>\n";
  if (y0 < 0.0 && y1 > 0.0)
    s += "<line x1=\"" + svg_num(left) + "\" y1=\"" + svg_num(py(0.0)) + "\" x2=\"" + svg_num(W - right) +
         "\" y2=\"" + svg_num(py(0.0)) + "\" stroke=\"#999999\" stroke-dasharray=\"4 4\"/>\n";
  const auto text = [&](double x, double y, const char* anchor, const std::string& body) {
    s += "<text x=\"" + svg_num(x) + "\" y=\"" + svg_num(y) + "\" text-anchor=\"" + anchor +
         "\" font-family=\"sans-serif\" font-size=\"12\">" + body + "</text>\n";
  };
  text(left, H - bottom + 18, "middle", "0");
  text(W - right, H - bottom + 18, "end", svg_label(x1));
  text(left - 6, py(y0) + 4, "end", svg_label(y0));
  text(left - 6, py(y1) + 4, "end", svg_label(y1));
  text((left + W - right) / 2, H - 12, "middle", "t");

  std::string band;
  for (std::size_t i = 0; i < t.size(); ++i)
    band += svg_num(px(static_cast<double>(t[i]))) + "," + svg_num(py(q75[i])) + " ";
  for (std::size_t i = t.size(); i-- > 0;)
    band += svg_num(px(static_cast<double>(t[i]))) + "," + svg_num(py(q25[i])) + (i ? " " : "");
  s += "<polygon points=\"" + band + "\" fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\"/>\n";
  std::string line;
  for (std::size_t i = 0; i < t.size(); ++i)
    line += svg_num(px(static_cast<double>(t[i]))) + "," + svg_num(py(median[i])) + (i + 1 < t.size() ? " " : "");
  s += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\"/>\n";
  for (std::size_t i = 0; i < t.size(); ++i)
    s += "<circle cx=\"" + svg_num(px(static_cast<double>(t[i]))) + "\" cy=\"" + svg_num(py(median[i])) +
         "\" r=\"3\" fill=\"#08519c\"/>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace detail

inline std::string plot_csv(const PlotTable& p) {
  std::string out = "t,regret_median,regret_q25,regret_q75,violation_median,violation_q25,violation_q75\n";
  for (std::size_t i = 0; i < p.t.size(); ++i)
    out += std::to_string(p.t[i]) + ',' + format_double(p.regret_median[i]) + ',' + format_double(p.regret_q25[i]) +
           ',' + format_double(p.regret_q75[i]) + ',' + format_double(p.violation_median[i]) + ',' +
           format_double(p.violation_q25[i]) + ',' + format_double(p.violation_q75[i]) + '\n';
  return out;
}

/// Writes <prefix>_plot.csv, <prefix>_regret.svg and <prefix>_violation.svg.
inline PlotTable emit_plot_data(const std::vector<MetricCurves>& curves, const std::filesystem::path& dir,
                                const std::string& prefix) {
  const PlotTable p = plot_table(curves);
  write_text(dir / (prefix + "_plot.csv"), plot_csv(p));
  write_text(dir / (prefix + "_regret.svg"),
             detail::svg_chart(prefix + ": regret", p.t, p.regret_median, p.regret_q25, p.regret_q75));
  write_text(dir / (prefix + "_violation.svg"), detail::svg_chart(prefix + ": constraint violation", p.t,
                                                                  p.violation_median, p.violation_q25,
                                                                  p.violation_q75));
  return p;
}

inline std::string run_prefix(const std::string& algorithm, std::uint64_t seed) {
  return algorithm + "_seed" + std::to_string(seed);
}

/// Executes one (algorithm, seed) pair and writes its files.
inline RunOutcome execute_run(const ExperimentConfig& c, const SuiteContext& ctx, const std::string& algorithm,
                              std::uint64_t seed) {
  RunOutcome out;
  out.algorithm = algorithm;
  out.seed = seed;
  try {
    ExperimentLog log = run_one(c, ctx, algorithm, seed);
    require(static_cast<std::int64_t>(log.steps.size()) == c.T, ErrorCode::kInvariantViolation,
            "log length differs from T");
    out.curves = compute_metrics(log, ctx.optimum.j_star, ctx.model.threshold, c.checkpoints);
    out.curves.j_star_cost = ctx.optimum.j_star_cost;
    const std::string prefix = run_prefix(algorithm, seed);
    if (c.write_step_logs) write_text(c.output_dir / (prefix + "_log.csv"), step_log_csv(log));
    write_text(c.output_dir / (prefix + "_episodes.csv"), episodes_csv(log));
    write_text(c.output_dir / (prefix + "_metrics.csv"), metrics_csv(out.curves));
    log.steps.clear();
    log.steps.shrink_to_fit();
    out.episodes = std::move(log);
    out.ok = true;
  } catch (const std::exception& e) {
    out.reason = e.what();
  }
  return out;
}

/// Runs every (algorithm, seed) pair, possibly on several threads, then writes
/// summary.json and plot files. Failures are recorded, not thrown.
inline SuiteReport run_suite(const ExperimentConfig& c) {
  check_config(c);
  SuiteReport report;
  report.context = prepare_suite(c);
  const SuiteContext& ctx = report.context;
  std::filesystem::create_directories(c.output_dir);

  std::vector<std::pair<std::string, std::uint64_t>> jobs;
  for (const auto& a : c.algorithms)
    for (auto s : c.seeds) jobs.emplace_back(a, s);
  report.runs.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++)
      report.runs[i] = execute_run(c, ctx, jobs[i].first, jobs[i].second);
  };
  const int workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(c.max_workers), jobs.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  nlohmann::json summary;
  summary["T"] = c.T;
  summary["delta"] = c.delta;
  summary["tau"] = ctx.model.threshold;
  summary["j_star"] = ctx.optimum.j_star;
  summary["j_star_cost"] = ctx.optimum.j_star_cost;
  summary["checkpoints"] = c.checkpoints;
  summary["start_state"] = c.start_state;
  summary["seeds"] = c.seeds;
  summary["algorithms"] = nlohmann::json::object();
  for (const auto& a : c.algorithms) {
    nlohmann::json entry;
    std::vector<MetricCurves> curves;
    auto runs = nlohmann::json::array();
    for (const auto& r : report.runs) {
      if (r.algorithm != a) continue;
      nlohmann::json run;
      run["seed"] = r.seed;
      run["status"] = r.ok ? "ok" : "failed";
      run["reason"] = r.reason;
      if (r.ok) {
        run["regret_T"] = r.curves.regret.back();
        run["violation_T"] = r.curves.violation.back();
        curves.push_back(r.curves);
      }
      runs.push_back(std::move(run));
    }
    entry["runs"] = std::move(runs);
    if (a == "ergodic-po" && ctx.po_params) {
      nlohmann::json params;
      for (const auto& [k, v] : ctx.po_params->record()) params[k] = v;
      params["violations"] = ctx.po_params->violations;
      entry["parameters"] = std::move(params);
    }
    if (a != "ergodic-po" && ctx.span) {
      entry["parameters"] = {{"sp_r_star", ctx.span->sp_r_star},
                             {"sp_c_star", ctx.span->sp_c_star},
                             {"H", fh_horizon(a == "fh-opt1" ? FhVariant::kOpt1 : FhVariant::kOpt2, c.T,
                                              ctx.model.num_states, ctx.model.num_actions)}};
    }
    auto points = nlohmann::json::array();
    if (!curves.empty()) {
      const PlotTable p = emit_plot_data(curves, c.output_dir, a);
      for (std::size_t i = 0; i < p.t.size(); ++i)
        points.push_back({{"t", p.t[i]},
                          {"regret", {{"median", p.regret_median[i]}, {"q25", p.regret_q25[i]}, {"q75", p.regret_q75[i]}}},
                          {"violation",
                           {{"median", p.violation_median[i]}, {"q25", p.violation_q25[i]}, {"q75", p.violation_q75[i]}}}});
    }
    entry["checkpoints"] = std::move(points);
    summary["algorithms"][a] = std::move(entry);
  }
  write_text(c.output_dir / "summary.json", summary.dump(2) + "\n");
  report.summary = std::move(summary);
  return report;
}

}  // namespace cmdp
