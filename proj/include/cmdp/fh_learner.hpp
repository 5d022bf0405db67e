#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>

#include "cmdp/experiment.hpp"
#include "cmdp/opt2.hpp"
#include "cmdp/simulation.hpp"

namespace cmdp {

enum class FhVariant { kOpt1, kOpt2 };

inline const char* to_string(FhVariant v) { return v == FhVariant::kOpt1 ? "fh-opt1" : "fh-opt2"; }

struct FhOptions {
  Opt1Backend backend = Opt1Backend::kLagrangian;
  Opt2Options opt2;
};

/// Episode length: ceil((T/S^2A)^(1/3)) with the plain occupancy program,
/// round(sqrt(T/S^2A)) (at least one) with span constraints.
inline int fh_horizon(FhVariant variant, std::int64_t T, int S, int A) {
  const double ratio = static_cast<double>(T) / (static_cast<double>(S) * S * A);
  if (variant == FhVariant::kOpt1) {
    double h = std::cbrt(ratio);
    // cbrt of a perfect cube can land a hair above the integer.
    const double rounded = std::round(h);
    if (std::abs(h - rounded) < 1e-9 * rounded) h = rounded;
    return std::max(1, static_cast<int>(std::ceil(h)));
  }
  return std::max(1, static_cast<int>(std::lround(std::sqrt(ratio))));
}

struct FhObservation {
  int k = 0;
  int start_state = 0;
  const VisitCounts* counts = nullptr;
  const BernsteinSet* confidence = nullptr;
};

using FhObserver = std::function<void(const FhObservation&)>;

/// Online run of the finite-horizon approximation learner for exactly T steps:
/// K = floor(T/H) episodes of H steps and a final partial episode. Each
/// episode plans from its observed start state against the current Bernstein
/// set and plays the extracted step-indexed policy.
inline ExperimentLog run_finite_horizon(const CmdpModel& model, FhVariant variant, SpanBudget budget,
                                        std::int64_t T, double delta, std::uint64_t seed, int start_state = 0,
                                        const FhOptions& options = {}, const FhObserver& observer = {}) {
  const int S = model.num_states;
  const int A = model.num_actions;
  require(T >= static_cast<std::int64_t>(S) * S * A, ErrorCode::kInvalidArgument, "T must be at least S^2 A");
  require(delta > 0.0 && delta < 1.0, ErrorCode::kInvalidArgument, "delta must lie in (0, 1)");
  const int H = fh_horizon(variant, T, S, A);
  const std::int64_t K = T / H;

  Environment env(model, start_state, Rng(seed).fork(0x656E76));
  Rng agent = Rng(seed).fork(0x6167656E74);

  ExperimentLog log;
  log.algorithm = to_string(variant);
  log.seed = seed;
  log.start_state = start_state;
  log.parameters = {{"T", static_cast<double>(T)},
                    {"H", H},
                    {"K", static_cast<double>(K)},
                    {"delta", delta},
                    {"tau", model.threshold},
                    {"sp_r_star", budget.sp_r_star},
                    {"sp_c_star", budget.sp_c_star}};
  log.steps.reserve(static_cast<std::size_t>(T));

  VisitCounts counts(S, A);
  std::vector<std::array<int, 3>> transitions;
  const std::int64_t episodes = K + (T % H != 0 ? 1 : 0);
  for (std::int64_t k = 1; k <= episodes; ++k) {
    const int s1 = env.state();
    const BernsteinSet conf = bernstein_confidence(counts, S, A, T, delta);
    if (observer) observer({static_cast<int>(k), s1, &counts, &conf});

    FhEpisode e;
    e.k = static_cast<int>(k);
    e.start_state = s1;
    e.horizon = H;
    e.cost_rhs = H * model.threshold + budget.sp_c_star;
    FiniteHorizonPolicy plan;
    if (variant == FhVariant::kOpt1) {
      const Opt1Result res = solve_opt1(conf, s1, H, model.threshold, budget.sp_c_star, model.reward, model.cost,
                                        options.backend);
      plan = extract_policy_transition(res.occupancy);
      e.lp_objective = res.objective;
      e.cost_lhs = res.cost;
      e.span_r_max = fh_values(plan.policy, plan.transition, model.reward).max_span();
      e.span_c_max = fh_values(plan.policy, plan.transition, model.cost).max_span();
      e.feasible = e.cost_lhs <= e.cost_rhs + Tolerances::kLpFeasibility;
    } else {
      Opt2Options o = options.opt2;
      o.backend = options.backend;
      Opt2Result res = solve_opt2(conf, s1, H, model.threshold, budget, model.reward, model.cost, o);
      plan = std::move(res.witness);
      e.lp_objective = res.objective;
      e.cost_lhs = res.cost;
      e.span_r_max = res.span_r_max;
      e.span_c_max = res.span_c_max;
      e.feasible = e.cost_lhs <= e.cost_rhs + Tolerances::kLpFeasibility &&
                   e.span_r_max <= 2.0 * budget.sp_r_star + Tolerances::kSpanFeasibility &&
                   e.span_c_max <= 2.0 * budget.sp_c_star + Tolerances::kSpanFeasibility;
    }

    const int steps = static_cast<int>(std::min<std::int64_t>(H, T - static_cast<std::int64_t>(log.steps.size())));
    e.steps_played = steps;
    transitions.clear();
    for (int h = 0; h < steps; ++h) {
      const int s = env.state();
      const int a = sample_index(plan.policy.row(s, h), agent.uniform());
      log.steps.push_back({s, a, model.reward(s, a), model.cost(s, a)});
      transitions.push_back({s, a, env.step(a)});
    }
    for (const auto& [s, a, n] : transitions) counts.add(s, a, n);
    log.fh_episodes.push_back(e);
  }
  return log;
}

}  // namespace cmdp
