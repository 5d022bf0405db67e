#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "cmdp/error.hpp"

namespace cmdp {

namespace detail {

inline void check_floor(std::size_t n, double floor) {
  require(n > 0, ErrorCode::kInvalidArgument, "empty weight vector");
  require(floor > 0.0, ErrorCode::kInvalidArgument, "floor must be positive");
  require(static_cast<double>(n) * floor <= 1.0 + 1e-12, ErrorCode::kInfeasibleFloor,
          "number of actions times floor exceeds one");
}

}  // namespace detail

/// KL projection onto {p in simplex : p >= floor} from log-weights. The answer
/// is p(a) = max(floor, w(a) / Z) with Z found by sorted water-filling.
inline std::vector<double> kl_project_capped_simplex_log(std::span<const double> log_weights, double floor) {
  const std::size_t A = log_weights.size();
  detail::check_floor(A, floor);
  if (static_cast<double>(A) * floor >= 1.0 - 1e-15) return std::vector<double>(A, 1.0 / static_cast<double>(A));

  const double top = *std::max_element(log_weights.begin(), log_weights.end());
  require(std::isfinite(top), ErrorCode::kInvalidArgument, "weights must be finite");
  std::vector<double> w(A);
  for (std::size_t a = 0; a < A; ++a) w[a] = std::exp(log_weights[a] - top);

  std::vector<std::size_t> order(A);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });

  double normalizer = 0.0;
  double free_mass = 0.0;
  for (std::size_t k = 1; k <= A; ++k) {
    free_mass += w[order[k - 1]];
    const double z = free_mass / (1.0 - static_cast<double>(A - k) * floor);
    const bool last_free = w[order[k - 1]] / z >= floor;
    const bool next_floored = k == A || w[order[k]] / z <= floor;
    if (last_free && next_floored) {
      normalizer = z;
      break;
    }
  }
  require(normalizer > 0.0, ErrorCode::kNumericalFailure, "water-filling found no normalizer");
  std::vector<double> p(A);
  for (std::size_t a = 0; a < A; ++a) p[a] = std::max(floor, w[a] / normalizer);
  return p;
}

/// argmin over {p in simplex, p >= floor} of sum_a p(a) ln(p(a) / w(a)).
inline std::vector<double> kl_project_capped_simplex(std::span<const double> weights, double floor) {
  detail::check_floor(weights.size(), floor);
  std::vector<double> logs(weights.size());
  for (std::size_t a = 0; a < weights.size(); ++a) {
    require(weights[a] > 0.0 && std::isfinite(weights[a]), ErrorCode::kInvalidArgument,
            "weights must be positive and finite");
    logs[a] = std::log(weights[a]);
  }
  return kl_project_capped_simplex_log(logs, floor);
}

/// Largest violation of the KKT conditions of the projection at p: primal
/// feasibility, equal log-ratio ln(p/w) on free coordinates, and nonnegative
/// multipliers ln(floor/w) - ln(p/w)_free on coordinates at the floor.
inline double kl_projection_kkt_violation(std::span<const double> weights, double floor, std::span<const double> p) {
  const std::size_t A = weights.size();
  double worst = std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0);
  double kappa_lo = std::numeric_limits<double>::infinity();
  double kappa_hi = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < A; ++a) {
    worst = std::max(worst, floor - p[a]);
    if (p[a] > floor * (1.0 + 1e-9)) {
      const double kappa = std::log(p[a] / weights[a]);
      kappa_lo = std::min(kappa_lo, kappa);
      kappa_hi = std::max(kappa_hi, kappa);
    }
  }
  if (kappa_hi >= kappa_lo) {
    worst = std::max(worst, kappa_hi - kappa_lo);
    for (std::size_t a = 0; a < A; ++a)
      if (p[a] <= floor * (1.0 + 1e-9)) worst = std::max(worst, kappa_hi - std::log(floor / weights[a]));
  }
  return std::max(worst, 0.0);
}

}  // namespace cmdp
