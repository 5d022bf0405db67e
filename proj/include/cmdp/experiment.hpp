#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cmdp/error.hpp"
#include "cmdp/simulation.hpp"

namespace cmdp {

/// Per-episode record of the ergodic policy-optimization learner.
struct PoEpisode {
  int k = 0;
  double lambda_before = 0.0;
  double lambda_after = 0.0;
  double j_hat = 0.0;
  long evi_iterations = 0;
  double evi_gain = 0.0;
  double evi_gain_spread = 0.0;
  double evi_increment_span = 0.0;
  double bonus_max = 0.0;
  double policy_delta = 0.0;
  double score_max = 0.0;
  double q_max = 0.0;
  double adjusted_reward_max = 0.0;
  /// theta * |beta_hat + u| <= 1 entrywise.
  bool stability_premise = false;
  /// |pi_{k+1} - pi_k| <= 8 theta H iota pi_k entrywise.
  bool stability_bound = false;
  double min_policy_entry = 0.0;
  double cumulative_reward = 0.0;
  double cumulative_cost = 0.0;
};

/// Per-episode record of the finite-horizon learners.
struct FhEpisode {
  int k = 0;
  int start_state = 0;
  int horizon = 0;
  double lp_objective = 0.0;
  double cost_lhs = 0.0;
  double cost_rhs = 0.0;
  double span_r_max = 0.0;
  double span_c_max = 0.0;
  bool feasible = false;
  /// Steps of this episode actually played (H except for a final partial one).
  int steps_played = 0;
};

struct ExperimentLog {
  std::string algorithm;
  std::uint64_t seed = 0;
  int start_state = 0;
  std::vector<StepRecord> steps;
  std::vector<PoEpisode> po_episodes;
  std::vector<FhEpisode> fh_episodes;
  /// Name/value pairs of every parameter in force.
  std::vector<std::pair<std::string, double>> parameters;
};

struct MetricCurves {
  std::vector<std::int64_t> checkpoints;
  std::vector<double> regret;
  std::vector<double> violation;
  double j_star = 0.0;
  double j_star_cost = 0.0;
  double tau = 0.0;
};

/// R_t = sum_{u<=t} (J* - r_u) and C_t = sum_{u<=t} (c_u - tau) at each
/// checkpoint, accumulated in step order.
inline MetricCurves compute_metrics(const std::vector<StepRecord>& steps, double j_star, double tau,
                                    const std::vector<std::int64_t>& checkpoints) {
  require(std::is_sorted(checkpoints.begin(), checkpoints.end()), ErrorCode::kInvalidArgument,
          "checkpoints must be sorted");
  require(checkpoints.empty() || (checkpoints.front() >= 1 &&
                                  checkpoints.back() <= static_cast<std::int64_t>(steps.size())),
          ErrorCode::kInvalidArgument, "checkpoints must lie in [1, T]");
  MetricCurves out;
  out.checkpoints = checkpoints;
  out.j_star = j_star;
  out.tau = tau;
  double regret = 0.0;
  double violation = 0.0;
  std::size_t next = 0;
  for (std::size_t t = 0; t < steps.size() && next < checkpoints.size(); ++t) {
    regret += j_star - steps[t].reward;
    violation += steps[t].cost - tau;
    while (next < checkpoints.size() && checkpoints[next] == static_cast<std::int64_t>(t + 1)) {
      out.regret.push_back(regret);
      out.violation.push_back(violation);
      ++next;
    }
  }
  return out;
}

inline MetricCurves compute_metrics(const ExperimentLog& log, double j_star, double tau,
                                    const std::vector<std::int64_t>& checkpoints) {
  return compute_metrics(log.steps, j_star, tau, checkpoints);
}

}  // namespace cmdp
