#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "cmdp/model.hpp"
#include "cmdp/rng.hpp"

namespace cmdp {

/// Stationary state-action distribution mu(s, a) = mu(s) pi(a|s).
struct OccupancyMeasure {
  Matrix mu;

  Vector state_marginal() const { return mu.rowwise().sum(); }
};

/// Gain, bias q(s, a) and v(s) of a (policy, transition, utility) triple.
struct BiasSolution {
  double gain = 0.0;
  Matrix bias_q;
  Vector bias_v;
};

inline double span(std::span<const double> v) {
  require(!v.empty(), ErrorCode::kInvalidArgument, "span of an empty vector");
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

inline double span(const Vector& v) { return span(std::span<const double>(v.data(), static_cast<std::size_t>(v.size()))); }

inline double average_utility(const OccupancyMeasure& occupancy, const Matrix& d) {
  return occupancy.mu.cwiseProduct(d).sum();
}

/// Stationary state distribution of an ergodic chain.
inline Vector stationary_state_distribution(const Matrix& chain) {
  const ChainStructure structure = analyze_chain(chain);
  require(structure.irreducible, ErrorCode::kNotErgodic, "induced chain is reducible");
  require(structure.period == 1, ErrorCode::kNotErgodic,
          "induced chain is periodic with period " + std::to_string(structure.period));
  const int S = static_cast<int>(chain.rows());
  Matrix system = chain.transpose() - Matrix::Identity(S, S);
  system.row(S - 1).setOnes();
  Vector rhs = Vector::Zero(S);
  rhs[S - 1] = 1.0;
  const Eigen::FullPivLU<Matrix> lu(system);
  require(lu.isInvertible(), ErrorCode::kSingularSystem, "stationary system is singular");
  Vector mu = lu.solve(rhs);
  mu += lu.solve(rhs - system * mu);  // one step of refinement
  const double residual = (chain.transpose() * mu - mu).cwiseAbs().maxCoeff();
  require(residual <= Tolerances::kStationaryResidual, ErrorCode::kSingularSystem,
          "stationary residual " + std::to_string(residual));
  return mu;
}

inline OccupancyMeasure stationary_distribution(const StationaryPolicy& policy, const TransitionTensor& transition) {
  const Vector mu = stationary_state_distribution(induced_chain(transition, policy));
  return {mu.asDiagonal() * policy.probs()};
}

inline OccupancyMeasure stationary_distribution(const StationaryPolicy& policy, const CmdpModel& model) {
  return stationary_distribution(policy, model.transition);
}

/// Solves v = d^pi - J 1 + P^pi v with <mu_pi, v> = 0, then
/// q(s, a) = d(s, a) - J + P(s, a, .) v.
inline BiasSolution solve_bias(const StationaryPolicy& policy, const TransitionTensor& transition, const Matrix& d) {
  const int S = transition.num_states();
  const int A = transition.num_actions();
  const Matrix chain = induced_chain(transition, policy);
  const Vector mu = stationary_state_distribution(chain);
  const Vector d_pi = policy_utility(policy, d);

  Matrix system = Matrix::Zero(S + 1, S + 1);
  system.topLeftCorner(S, S) = Matrix::Identity(S, S) - chain;
  system.topRightCorner(S, 1).setOnes();
  system.bottomLeftCorner(1, S) = mu.transpose();
  Vector rhs = Vector::Zero(S + 1);
  rhs.head(S) = d_pi;
  const Eigen::FullPivLU<Matrix> lu(system);
  require(lu.isInvertible() && lu.rcond() > 1e-14, ErrorCode::kSingularSystem, "bias system is numerically singular");
  Vector x = lu.solve(rhs);
  x += lu.solve(rhs - system * x);

  BiasSolution out;
  out.bias_v = x.head(S);
  out.gain = x[S];
  out.bias_q.resize(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) out.bias_q(s, a) = d(s, a) - out.gain + transition.expect(s, a, out.bias_v);
  return out;
}

inline BiasSolution solve_bias(const StationaryPolicy& policy, const CmdpModel& model, const Matrix& d) {
  return solve_bias(policy, model.transition, d);
}

struct MixingProfile {
  int t_mix = 1;
  double t_hit = 1.0;
  std::uint64_t deterministic_policies = 0;
  int sampled_policies = 0;

  std::string method() const {
    return "max over " + std::to_string(deterministic_policies) + " deterministic + " +
           std::to_string(sampled_policies) + " sampled stochastic policies (lower bound)";
  }
};

/// min{t >= 1 : max_s ||(P^pi)^t(s, .) - mu||_1 <= 1/4}.
inline int mixing_time(const Matrix& chain, const Vector& mu, int cap = 1000000) {
  Matrix power = chain;
  for (int t = 1; t <= cap; ++t) {
    double worst = 0.0;
    for (int s = 0; s < power.rows(); ++s)
      worst = std::max(worst, (power.row(s).transpose() - mu).cwiseAbs().sum());
    if (worst <= 0.25) return t;
    power = power * chain;
  }
  fail(ErrorCode::kNonConvergence, "mixing time exceeds " + std::to_string(cap));
}

/// Maximizes mixing and hitting time over all deterministic policies plus
/// `sample_policies` random stochastic ones; a lower bound on the supremum.
inline MixingProfile estimate_mixing_time(const CmdpModel& model, int sample_policies, std::uint64_t seed = 0) {
  MixingProfile out;
  out.t_mix = 1;
  out.t_hit = 0.0;
  auto visit = [&](const StationaryPolicy& policy) {
    const Matrix chain = induced_chain(model.transition, policy);
    const Vector mu = stationary_state_distribution(chain);
    out.t_mix = std::max(out.t_mix, mixing_time(chain, mu));
    out.t_hit = std::max(out.t_hit, 1.0 / mu.minCoeff());
  };
  for_each_deterministic_policy(model.num_states, model.num_actions, [&](const std::vector<int>& acts) {
    visit(StationaryPolicy::deterministic(acts, model.num_actions));
    ++out.deterministic_policies;
  });
  Rng rng(seed);
  for (int i = 0; i < sample_policies; ++i) {
    Matrix probs(model.num_states, model.num_actions);
    for (int s = 0; s < model.num_states; ++s) {
      for (int a = 0; a < model.num_actions; ++a) probs(s, a) = rng.uniform() + 1e-3;
      probs.row(s) /= probs.row(s).sum();
    }
    visit(StationaryPolicy(std::move(probs)));
    ++out.sampled_policies;
  }
  return out;
}

/// Visit counts N(s, a, s') with cached row totals N(s, a).
class VisitCounts {
 public:
  VisitCounts() = default;
  VisitCounts(int num_states, int num_actions)
      : num_states_(num_states),
        num_actions_(num_actions),
        counts_(static_cast<std::size_t>(num_states) * num_actions * num_states, 0),
        totals_(static_cast<std::size_t>(num_states) * num_actions, 0) {}

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }

  void add(int s, int a, int next, std::uint64_t n = 1) {
    counts_[(static_cast<std::size_t>(s) * num_actions_ + a) * num_states_ + next] += n;
    totals_[static_cast<std::size_t>(s) * num_actions_ + a] += n;
  }

  std::uint64_t operator()(int s, int a, int next) const {
    return counts_[(static_cast<std::size_t>(s) * num_actions_ + a) * num_states_ + next];
  }
  std::uint64_t total(int s, int a) const { return totals_[static_cast<std::size_t>(s) * num_actions_ + a]; }
  /// N+(s, a) = max{1, N(s, a)}.
  double total_plus(int s, int a) const { return static_cast<double>(std::max<std::uint64_t>(1, total(s, a))); }

  bool operator==(const VisitCounts&) const = default;

 private:
  int num_states_ = 0;
  int num_actions_ = 0;
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint64_t> totals_;
};

/// P_hat(s, a, s') = N(s, a, s') / max{1, N(s, a)}; unvisited rows stay zero.
inline TransitionTensor empirical_transition(const VisitCounts& counts) {
  TransitionTensor out(counts.num_states(), counts.num_actions());
  for (int s = 0; s < counts.num_states(); ++s)
    for (int a = 0; a < counts.num_actions(); ++a) {
      const double denom = counts.total_plus(s, a);
      for (int n = 0; n < counts.num_states(); ++n) out(s, a, n) = static_cast<double>(counts(s, a, n)) / denom;
    }
  return out;
}

}  // namespace cmdp
