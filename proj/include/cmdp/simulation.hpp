#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cmdp/model.hpp"
#include "cmdp/rng.hpp"

namespace cmdp {

struct StepRecord {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  double cost = 0.0;

  bool operator==(const StepRecord&) const = default;
};

struct Trajectory {
  std::vector<StepRecord> steps;
  std::uint64_t seed = 0;
  std::string policy_id;
  /// State reached after the last step.
  int final_state = 0;
};

/// Inverse-CDF draw; falls back to the last index with positive mass.
inline int sample_index(std::span<const double> probs, double u) {
  double acc = 0.0;
  int last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = static_cast<int>(i);
    if (u < acc) return last;
  }
  return last;
}

/// The true CMDP seen through the online protocol: r, c, tau and the current
/// state are visible, P is only sampled.
class Environment {
 public:
  Environment(const CmdpModel& model, int start, Rng rng) : model_(&model), state_(start), rng_(rng) {
    require(start >= 0 && start < model.num_states, ErrorCode::kInvalidArgument, "start state out of range");
  }

  int num_states() const { return model_->num_states; }
  int num_actions() const { return model_->num_actions; }
  const Matrix& reward() const { return model_->reward; }
  const Matrix& cost() const { return model_->cost; }
  double threshold() const { return model_->threshold; }
  int state() const { return state_; }

  /// Takes `action` in the current state and returns the next state.
  int step(int action) {
    state_ = sample_index(model_->transition.row(state_, action), rng_.uniform());
    return state_;
  }

 private:
  const CmdpModel* model_;
  int state_;
  Rng rng_;
};

/// Rolls out `horizon` steps where row_of(s, h) gives the action distribution
/// at step h (0-based). One uniform for the action, then one for the next
/// state, per step.
template <class RowOf>
Trajectory sample_trajectory_with(const CmdpModel& model, RowOf&& row_of, int start, int horizon, std::uint64_t seed) {
  require(horizon >= 1, ErrorCode::kInvalidArgument, "horizon must be >= 1");
  require(start >= 0 && start < model.num_states, ErrorCode::kInvalidArgument, "start state out of range");
  Rng rng(seed);
  Trajectory out;
  out.seed = seed;
  out.steps.reserve(static_cast<std::size_t>(horizon));
  int s = start;
  for (int h = 0; h < horizon; ++h) {
    const int a = sample_index(row_of(s, h), rng.uniform());
    out.steps.push_back({s, a, model.reward(s, a), model.cost(s, a)});
    s = sample_index(model.transition.row(s, a), rng.uniform());
  }
  out.final_state = s;
  return out;
}

inline Trajectory sample_trajectory(const CmdpModel& model, const StationaryPolicy& policy, int start, int horizon,
                                    std::uint64_t seed) {
  const int A = model.num_actions;
  std::vector<double> row(static_cast<std::size_t>(A));
  auto out = sample_trajectory_with(
      model,
      [&](int s, int) {
        for (int a = 0; a < A; ++a) row[static_cast<std::size_t>(a)] = policy(s, a);
        return std::span<const double>(row);
      },
      start, horizon, seed);
  out.policy_id = "stationary";
  return out;
}

}  // namespace cmdp
