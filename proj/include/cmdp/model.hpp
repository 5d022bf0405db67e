#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cmdp/error.hpp"
#include "cmdp/tolerances.hpp"

namespace cmdp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense P(s, a, s') with contiguous rows P(s, a, .).
class TransitionTensor {
 public:
  TransitionTensor() = default;
  TransitionTensor(int num_states, int num_actions)
      : num_states_(num_states),
        num_actions_(num_actions),
        data_(static_cast<std::size_t>(num_states) * num_actions * num_states, 0.0) {}

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }

  double& operator()(int s, int a, int next) { return data_[index(s, a) + next]; }
  double operator()(int s, int a, int next) const { return data_[index(s, a) + next]; }

  std::span<double> row(int s, int a) { return {data_.data() + index(s, a), static_cast<std::size_t>(num_states_)}; }
  std::span<const double> row(int s, int a) const {
    return {data_.data() + index(s, a), static_cast<std::size_t>(num_states_)};
  }

  const std::vector<double>& data() const { return data_; }

  double expect(int s, int a, const Vector& v) const {
    double sum = 0.0;
    const auto p = row(s, a);
    for (int n = 0; n < num_states_; ++n) sum += p[n] * v[n];
    return sum;
  }

  bool operator==(const TransitionTensor&) const = default;

 private:
  std::size_t index(int s, int a) const {
    return (static_cast<std::size_t>(s) * num_actions_ + a) * num_states_;
  }

  int num_states_ = 0;
  int num_actions_ = 0;
  std::vector<double> data_;
};

/// Row-stochastic pi(a|s).
class StationaryPolicy {
 public:
  StationaryPolicy() = default;
  explicit StationaryPolicy(Matrix probs) : probs_(std::move(probs)) {
    for (int s = 0; s < probs_.rows(); ++s) {
      require(probs_.row(s).minCoeff() >= 0.0, ErrorCode::kInvariantViolation,
              "policy row " + std::to_string(s) + " has a negative entry");
      require(std::abs(probs_.row(s).sum() - 1.0) <= Tolerances::kRowSum, ErrorCode::kInvariantViolation,
              "policy row " + std::to_string(s) + " does not sum to one");
    }
  }

  static StationaryPolicy uniform(int num_states, int num_actions) {
    return StationaryPolicy(Matrix::Constant(num_states, num_actions, 1.0 / num_actions));
  }

  static StationaryPolicy deterministic(const std::vector<int>& actions, int num_actions) {
    Matrix probs = Matrix::Zero(static_cast<Eigen::Index>(actions.size()), num_actions);
    for (std::size_t s = 0; s < actions.size(); ++s) probs(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
    return StationaryPolicy(std::move(probs));
  }

  int num_states() const { return static_cast<int>(probs_.rows()); }
  int num_actions() const { return static_cast<int>(probs_.cols()); }
  double operator()(int s, int a) const { return probs_(s, a); }
  const Matrix& probs() const { return probs_; }

 private:
  Matrix probs_;
};

/// The environment (S, A, r, c, tau, P) plus optional structural annotations.
struct CmdpModel {
  int num_states = 0;
  int num_actions = 0;
  Matrix reward;
  Matrix cost;
  double threshold = 1.0;
  TransitionTensor transition;
  bool ergodic = false;
  std::optional<int> t_mix;
  std::optional<double> t_hit;
  std::optional<double> c0;
  std::optional<Matrix> safe_policy;
};

/// P^pi(s, s') = sum_a pi(a|s) P(s, a, s').
inline Matrix induced_chain(const TransitionTensor& transition, const StationaryPolicy& policy) {
  const int S = transition.num_states();
  Matrix chain = Matrix::Zero(S, S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < transition.num_actions(); ++a) {
      const double w = policy(s, a);
      if (w == 0.0) continue;
      const auto p = transition.row(s, a);
      for (int n = 0; n < S; ++n) chain(s, n) += w * p[n];
    }
  return chain;
}

inline Vector policy_utility(const StationaryPolicy& policy, const Matrix& d) {
  return policy.probs().cwiseProduct(d).rowwise().sum();
}

struct ChainStructure {
  bool irreducible = false;
  int period = 0;
  bool ergodic() const { return irreducible && period == 1; }
};

/// Irreducibility by forward/backward reachability from state 0; period as the
/// gcd of level[u] + 1 - level[v] over all edges of a BFS layering.
inline ChainStructure analyze_chain(const Matrix& chain, double edge = Tolerances::kEdge) {
  const int S = static_cast<int>(chain.rows());
  auto reach = [&](bool forward) {
    std::vector<int> level(S, -1);
    std::queue<int> frontier;
    level[0] = 0;
    frontier.push(0);
    while (!frontier.empty()) {
      const int u = frontier.front();
      frontier.pop();
      for (int v = 0; v < S; ++v) {
        const double w = forward ? chain(u, v) : chain(v, u);
        if (w > edge && level[v] < 0) {
          level[v] = level[u] + 1;
          frontier.push(v);
        }
      }
    }
    return level;
  };
  const auto forward = reach(true);
  const auto backward = reach(false);
  ChainStructure out;
  out.irreducible = true;
  for (int s = 0; s < S; ++s)
    if (forward[s] < 0 || backward[s] < 0) out.irreducible = false;
  if (!out.irreducible) return out;
  int g = 0;
  for (int u = 0; u < S; ++u)
    for (int v = 0; v < S; ++v)
      if (chain(u, v) > edge) g = std::gcd(g, std::abs(forward[u] + 1 - forward[v]));
  out.period = g;
  return out;
}

inline std::uint64_t count_deterministic_policies(int num_states, int num_actions) {
  std::uint64_t n = 1;
  for (int s = 0; s < num_states; ++s) {
    require(n <= (std::uint64_t{1} << 24) / static_cast<std::uint64_t>(num_actions), ErrorCode::kInvalidArgument,
            "too many deterministic policies to enumerate");
    n *= static_cast<std::uint64_t>(num_actions);
  }
  return n;
}

/// Calls f(actions) for every deterministic policy, in lexicographic order.
template <class F>
void for_each_deterministic_policy(int num_states, int num_actions, F&& f) {
  const std::uint64_t total = count_deterministic_policies(num_states, num_actions);
  std::vector<int> actions(num_states, 0);
  for (std::uint64_t i = 0; i < total; ++i) {
    f(std::as_const(actions));
    for (int s = num_states - 1; s >= 0; --s) {
      if (++actions[s] < num_actions) break;
      actions[s] = 0;
    }
  }
}

/// Adding edges keeps a chain irreducible and aperiodic, so checking every
/// deterministic policy covers every stationary one.
inline bool every_policy_ergodic(const TransitionTensor& transition) {
  bool ok = true;
  for_each_deterministic_policy(transition.num_states(), transition.num_actions(), [&](const std::vector<int>& acts) {
    if (!ok) return;
    ok = analyze_chain(induced_chain(transition, StationaryPolicy::deterministic(acts, transition.num_actions())))
             .ergodic();
  });
  return ok;
}

/// Checks every invariant of the model, throwing InvariantViolation naming the
/// first failure.
inline void validate(const CmdpModel& m) {
  const auto bad = [](const std::string& what) { fail(ErrorCode::kInvariantViolation, what); };
  if (m.num_states <= 0 || m.num_actions <= 0) bad("dimensions must be positive");
  if (m.reward.rows() != m.num_states || m.reward.cols() != m.num_actions) bad("reward shape");
  if (m.cost.rows() != m.num_states || m.cost.cols() != m.num_actions) bad("cost shape");
  if (m.transition.num_states() != m.num_states || m.transition.num_actions() != m.num_actions) bad("transition shape");
  if (!(m.reward.array() >= 0.0).all() || !(m.reward.array() <= 1.0).all()) bad("reward range");
  if (!(m.cost.array() >= 0.0).all() || !(m.cost.array() <= 1.0).all()) bad("cost range");
  if (!(m.threshold > 0.0 && m.threshold <= 1.0)) bad("threshold range");
  for (int s = 0; s < m.num_states; ++s)
    for (int a = 0; a < m.num_actions; ++a) {
      double sum = 0.0;
      for (double p : m.transition.row(s, a)) {
        if (!(p >= 0.0)) bad("transition row (" + std::to_string(s) + "," + std::to_string(a) + ") negative entry");
        sum += p;
      }
      if (std::abs(sum - 1.0) > Tolerances::kRowSum)
        bad("transition row (" + std::to_string(s) + "," + std::to_string(a) + ") sums to " + std::to_string(sum));
    }
  if (m.t_mix && *m.t_mix < 1) bad("t_mix must be >= 1");
  if (m.t_hit && *m.t_hit < m.num_states) bad("t_hit must be >= num_states");
  if (m.safe_policy) {
    if (m.safe_policy->rows() != m.num_states || m.safe_policy->cols() != m.num_actions) bad("safe policy shape");
    StationaryPolicy check(*m.safe_policy);
  }
  if (m.ergodic && !every_policy_ergodic(m.transition)) bad("ergodic flag asserted but some policy is not ergodic");
}

}  // namespace cmdp
