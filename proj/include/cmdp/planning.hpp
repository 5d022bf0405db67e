#pragma once

#include "cmdp/lp.hpp"
#include "cmdp/markov.hpp"

namespace cmdp {

/// Constrained-optimal stationary policy with its average reward and cost.
struct ConstrainedOptimum {
  StationaryPolicy policy;
  double j_star = 0.0;
  double j_star_cost = 0.0;
  OccupancyMeasure occupancy;
};

namespace detail {

/// Stationary occupancy polytope: flow balance and unit mass over mu(s, a),
/// variable s * A + a.
inline LinearProgram occupancy_polytope(const CmdpModel& model) {
  const int S = model.num_states;
  const int A = model.num_actions;
  LinearProgram lp(S * A);
  for (int next = 0; next < S; ++next) {
    LinearProgram::Terms terms;
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        double coef = -model.transition(s, a, next);
        if (s == next) coef += 1.0;
        if (coef != 0.0) terms.emplace_back(s * A + a, coef);
      }
    lp.add_equality(std::move(terms), 0.0);
  }
  LinearProgram::Terms mass;
  for (int i = 0; i < S * A; ++i) mass.emplace_back(i, 1.0);
  lp.add_equality(std::move(mass), 1.0);
  return lp;
}

inline Matrix occupancy_from_values(const std::vector<double>& values, int S, int A) {
  Matrix mu(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) mu(s, a) = std::max(0.0, values[static_cast<std::size_t>(s * A + a)]);
  return mu;
}

/// pi(a|s) = mu(s, a) / mu(s) where mu(s) > kSupport, uniform elsewhere.
inline StationaryPolicy policy_from_occupancy(const Matrix& mu) {
  const int S = static_cast<int>(mu.rows());
  const int A = static_cast<int>(mu.cols());
  Matrix probs(S, A);
  for (int s = 0; s < S; ++s) {
    const double mass = mu.row(s).sum();
    if (mass > Tolerances::kSupport)
      probs.row(s) = mu.row(s) / mass;
    else
      probs.row(s).setConstant(1.0 / A);
    probs.row(s) /= probs.row(s).sum();
  }
  return StationaryPolicy(std::move(probs));
}

}  // namespace detail

/// max <mu, r> s.t. <mu, c> <= tau - slack over stationary occupancy measures.
/// Exact for ergodic models. Throws Infeasible when no occupancy measure meets
/// the tightened threshold.
inline ConstrainedOptimum optimal_constrained(const CmdpModel& model, double slack = 0.0) {
  require(slack >= 0.0 && slack < model.threshold, ErrorCode::kInvalidArgument, "slack must lie in [0, tau)");
  const int S = model.num_states;
  const int A = model.num_actions;
  LinearProgram lp = detail::occupancy_polytope(model);
  LinearProgram::Terms cost_terms;
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      lp.objective[static_cast<std::size_t>(s * A + a)] = model.reward(s, a);
      cost_terms.emplace_back(s * A + a, model.cost(s, a));
    }
  lp.add_inequality(std::move(cost_terms), model.threshold - slack);
  const LpSolution sol = solve_lp(lp);
  require(sol.status != LpStatus::kInfeasible, ErrorCode::kInfeasible,
          "no occupancy measure has average cost <= " + std::to_string(model.threshold - slack));
  require(sol.status == LpStatus::kOptimal, ErrorCode::kNumericalFailure, "occupancy LP unbounded");

  ConstrainedOptimum out;
  out.occupancy.mu = detail::occupancy_from_values(sol.values, S, A);
  out.policy = detail::policy_from_occupancy(out.occupancy.mu);
  out.j_star = average_utility(out.occupancy, model.reward);
  out.j_star_cost = average_utility(out.occupancy, model.cost);
  return out;
}

/// Smallest (or largest) average cost achievable by any stationary policy.
inline ConstrainedOptimum extreme_cost(const CmdpModel& model, bool minimize) {
  const int S = model.num_states;
  const int A = model.num_actions;
  LinearProgram lp = detail::occupancy_polytope(model);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) lp.objective[static_cast<std::size_t>(s * A + a)] = (minimize ? -1.0 : 1.0) * model.cost(s, a);
  const LpSolution sol = solve_lp(lp);
  require(sol.status == LpStatus::kOptimal, ErrorCode::kNumericalFailure, "occupancy LP not solved");
  ConstrainedOptimum out;
  out.occupancy.mu = detail::occupancy_from_values(sol.values, S, A);
  out.policy = detail::policy_from_occupancy(out.occupancy.mu);
  out.j_star = average_utility(out.occupancy, model.reward);
  out.j_star_cost = average_utility(out.occupancy, model.cost);
  return out;
}

/// c0 of a strictly safe policy: the model's stated value, else the cost of its
/// safe policy, else the smallest achievable average cost.
inline double safe_policy_cost(const CmdpModel& model) {
  if (model.c0) return *model.c0;
  if (model.safe_policy)
    return average_utility(stationary_distribution(StationaryPolicy(*model.safe_policy), model), model.cost);
  return extreme_cost(model, /*minimize=*/true).j_star_cost;
}

}  // namespace cmdp
