#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "cmdp/error.hpp"

namespace cmdp {

/// argmax p.u over {p in simplex : ||p - p_hat||_1 <= budget}, by the greedy
/// rule of extended value iteration: move up to budget/2 of mass onto the best
/// state, taking it from the worst states first. Ties go to the smallest index.
///
/// p_hat may have total mass below one (an unvisited row). The missing mass is
/// then added to the best state; if the budget cannot even cover that deficit
/// the ball misses the simplex and the nearest distribution (deficit on the best
/// state) is returned.
inline std::vector<double> inner_max_l1(std::span<const double> p_hat, double budget, std::span<const double> u) {
  const std::size_t S = p_hat.size();
  require(S > 0 && u.size() == S, ErrorCode::kInvalidArgument, "inner_max_l1: size mismatch");
  require(budget >= 0.0, ErrorCode::kInvalidArgument, "inner_max_l1: negative budget");
  std::vector<double> p(p_hat.begin(), p_hat.end());
  const double mass = std::accumulate(p.begin(), p.end(), 0.0);
  require(mass <= 1.0 + 1e-12, ErrorCode::kInvalidArgument, "inner_max_l1: p_hat mass exceeds one");
  const double deficit = std::max(0.0, 1.0 - mass);

  std::size_t best = 0;
  for (std::size_t s = 1; s < S; ++s)
    if (u[s] > u[best]) best = s;

  const double add = std::min(1.0 - p[best], std::max(deficit, 0.5 * (budget + deficit)));
  p[best] += add;

  std::vector<std::size_t> order(S);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return u[a] < u[b]; });

  double excess = std::accumulate(p.begin(), p.end(), 0.0) - 1.0;
  for (std::size_t s : order) {
    if (excess <= 0.0) break;
    if (s == best) continue;
    const double take = std::min(p[s], excess);
    p[s] -= take;
    excess -= take;
  }
  return p;
}

}  // namespace cmdp
