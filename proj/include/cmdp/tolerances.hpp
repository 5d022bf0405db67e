#pragma once

namespace cmdp {

/// Every numerical tolerance used by the library, in one place.
struct Tolerances {
  /// Probability rows (transitions, policies) must sum to one within this.
  static constexpr double kRowSum = 1e-12;
  /// Edges of a transition digraph below this are treated as absent.
  static constexpr double kEdge = 1e-12;
  /// Residual of mu = mu P^pi for stationary distributions.
  static constexpr double kStationaryResidual = 1e-10;
  /// Bellman residual and bias normalization.
  static constexpr double kBellmanResidual = 1e-9;
  /// Flow balance of a stationary occupancy measure.
  static constexpr double kFlowBalance = 1e-9;
  /// Mass below this is treated as zero when extracting policies.
  static constexpr double kSupport = 1e-12;
  /// Constraint residual accepted from the LP solver.
  static constexpr double kLpFeasibility = 1e-8;
  /// Finite-horizon occupancy polytope conditions.
  static constexpr double kPolytope = 1e-8;
  /// Span constraints of the span-restricted program.
  static constexpr double kSpanFeasibility = 1e-6;
  /// Backward recursion residual of finite-horizon value tables.
  static constexpr double kValueRecursion = 1e-10;
  /// Round-trip of policy extraction and stationary recomputation.
  static constexpr double kRoundTrip = 1e-8;
};

}  // namespace cmdp
