#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cmdp/experiment.hpp"
#include "cmdp/kl_projection.hpp"
#include "cmdp/l1_ball.hpp"
#include "cmdp/markov.hpp"
#include "cmdp/simulation.hpp"

namespace cmdp {

enum class ParameterMode { kTheory, kPractical };

inline const char* to_string(ParameterMode m) { return m == ParameterMode::kTheory ? "theory" : "practical"; }

/// Multipliers applied in practical mode. Each leaves the functional form of
/// its parameter intact.
struct PracticalKnobs {
  double horizon = 1.0;
  double interval = 1.0;
  double learning_rate = 100.0;
  double scaling = 1.0;
  double dual_cap = 0.1;
  double bonus = 0.01;
};

struct PoParams {
  std::int64_t T = 0;
  int H = 0;
  int N = 0;
  std::int64_t K = 0;
  double theta = 0.0;
  double eta = 0.0;
  double lambda_cap = 0.0;
  double epsilon = 0.0;
  double iota = 0.0;
  double delta = 0.0;
  double c0 = 0.0;
  double tau = 0.0;
  double eps_evi = 0.0;
  int S = 0;
  int A = 0;
  int t_mix = 0;
  double t_hit = 0.0;
  ParameterMode mode = ParameterMode::kPractical;
  PracticalKnobs knobs;
  /// Assumptions that fail but were tolerated (practical mode only).
  std::vector<std::string> violations;

  std::vector<std::pair<std::string, double>> record() const {
    return {{"T", static_cast<double>(T)}, {"H", H},          {"N", N},
            {"K", static_cast<double>(K)}, {"theta", theta},  {"eta", eta},
            {"lambda_cap", lambda_cap},    {"epsilon", epsilon}, {"iota", iota},
            {"delta", delta},              {"c0", c0},        {"tau", tau},
            {"eps_evi", eps_evi},          {"t_mix", t_mix},  {"t_hit", t_hit},
            {"theory_mode", mode == ParameterMode::kTheory ? 1.0 : 0.0}};
  }
};

/// Parameter schedule of the ergodic learner. Theory mode uses the exact
/// constants; practical mode uses H = 8 t_mix t_hit, N = 4 t_mix, eta = 1 and
/// scales every parameter by its knob.
inline PoParams derive_parameters(std::int64_t T, int t_mix, double t_hit, int S, int A, double tau, double c0,
                                  double delta, ParameterMode mode, PracticalKnobs knobs = {}) {
  require(T >= 2, ErrorCode::kInvalidArgument, "T must be >= 2");
  require(S >= 1 && A >= 1 && t_mix >= 1 && t_hit >= 1.0, ErrorCode::kInvalidArgument, "bad model sizes");
  require(c0 < tau, ErrorCode::kInvalidArgument, "c0 must be below tau");
  require(delta > 0.0 && delta < 1.0, ErrorCode::kInvalidArgument, "delta must lie in (0, 1)");

  PoParams p;
  p.T = T;
  p.S = S;
  p.A = A;
  p.tau = tau;
  p.c0 = c0;
  p.delta = delta;
  p.t_mix = t_mix;
  p.t_hit = t_hit;
  p.mode = mode;
  p.knobs = knobs;
  p.eps_evi = 1.0 / static_cast<double>(T);

  const double Td = static_cast<double>(T);
  const double log2T = std::log2(Td);
  const double gap = tau - c0;
  const bool big_enough = Td >= 30.0 * A * std::max<double>(t_mix, t_hit);
  const std::string size_msg = "T = " + std::to_string(T) + " is below 30 A max(t_mix, t_hit)";

  if (mode == ParameterMode::kTheory) {
    p.H = static_cast<int>(std::min(1e9, std::ceil(16.0 * t_mix * t_hit * log2T * log2T)));
    p.N = static_cast<int>(std::ceil(4.0 * t_mix * log2T));
    require(big_enough, ErrorCode::kAssumptionViolated, size_msg);
  } else {
    require(knobs.horizon > 0 && knobs.interval > 0 && knobs.learning_rate > 0 && knobs.scaling > 0 &&
                knobs.dual_cap > 0 && knobs.bonus >= 0,
            ErrorCode::kInvalidArgument, "practical knobs must be positive");
    p.H = static_cast<int>(std::ceil(knobs.horizon * 8.0 * t_mix * t_hit));
    p.N = static_cast<int>(std::ceil(knobs.interval * 4.0 * t_mix));
    if (!big_enough) p.violations.push_back(size_msg);
  }
  require(p.H <= T, ErrorCode::kInvalidHorizon,
          "H = " + std::to_string(p.H) + " exceeds T = " + std::to_string(T));
  require(p.H >= 2 * p.N, ErrorCode::kInvalidHorizon,
          "H = " + std::to_string(p.H) + " is below 2N = " + std::to_string(2 * p.N));
  p.K = T / p.H;

  const double Hd = p.H;
  const double Nd = p.N;
  const double Kd = static_cast<double>(p.K);
  if (mode == ParameterMode::kTheory) {
    const double L = std::log(4.0 * S * A * Td * Td * Td / delta);
    p.eta = 1.0 + 1024.0 * gap * Nd * std::sqrt(static_cast<double>(S)) * L *
                      (std::sqrt(static_cast<double>(S) * S * A * Td) + std::sqrt(Hd * Td) +
                       std::pow(static_cast<double>(S), 1.5) * A * Hd * L);
    p.lambda_cap = 40.0 * p.eta / gap;
  } else {
    p.eta = knobs.scaling;
    p.lambda_cap = knobs.dual_cap * 40.0 * p.eta / gap;
  }
  p.iota = 2.0 * p.lambda_cap * Nd / p.eta * std::sqrt(S * std::log(2.0 * S * A * Td / delta));
  if (mode == ParameterMode::kPractical) p.iota *= knobs.bonus;
  p.theta = std::min(1.0 / (4.0 * Hd * p.iota), std::sqrt(std::log(Td) / (4.0 * Kd * Hd * Hd * p.iota * p.iota)));
  if (mode == ParameterMode::kPractical) p.theta *= knobs.learning_rate;
  require(std::isfinite(p.theta) && p.theta > 0.0, ErrorCode::kInvalidArgument, "learning rate is not positive");
  p.epsilon = std::min(gap / 2.0, 3.0 * p.lambda_cap / Kd);
  return p;
}

struct QEstimate {
  Matrix q_hat;
  Vector v_hat;
  std::vector<int> intervals_used;
};

/// Interval-based Q estimate from one episode: for each state, non-overlapping
/// length-N windows starting at visits to it (gap 2N), V(s) = window-sum
/// average, Q = d + p_hat V.
inline QEstimate estimate_q(std::span<const StepRecord> steps, const TransitionTensor& p_hat, const Matrix& d,
                            int N) {
  const int S = p_hat.num_states();
  const int A = p_hat.num_actions();
  const int L = static_cast<int>(steps.size());
  require(N >= 1, ErrorCode::kInvalidArgument, "N must be >= 1");
  require(L >= 2 * N, ErrorCode::kInvalidArgument, "trajectory shorter than 2N");
  QEstimate out;
  out.v_hat = Vector::Zero(S);
  out.intervals_used.assign(static_cast<std::size_t>(S), 0);
  for (int s = 0; s < S; ++s) {
    double total = 0.0;
    int count = 0;
    int tau = 0;
    while (tau <= L - 1 - N) {
      if (steps[static_cast<std::size_t>(tau)].state == s) {
        double y = 0.0;
        for (int t = tau; t < tau + N; ++t) {
          const auto& st = steps[static_cast<std::size_t>(t)];
          y += d(st.state, st.action);
        }
        total += y;
        ++count;
        tau += 2 * N;
      } else {
        ++tau;
      }
    }
    out.intervals_used[static_cast<std::size_t>(s)] = count;
    if (count > 0) out.v_hat(s) = total / count;
  }
  out.q_hat.resize(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) out.q_hat(s, a) = d(s, a) + p_hat.expect(s, a, out.v_hat);
  return out;
}

/// x(s, a) = iota (1/sqrt(N+(s, a)) + sum_a' pi(a'|s)/sqrt(N+(s, a'))).
inline Matrix compute_bonus_reward(const VisitCounts& counts, const StationaryPolicy& policy, double iota) {
  require(iota >= 0.0, ErrorCode::kInvalidArgument, "iota must be nonnegative");
  const int S = counts.num_states();
  const int A = counts.num_actions();
  Matrix x(S, A);
  for (int s = 0; s < S; ++s) {
    double mean = 0.0;
    for (int a = 0; a < A; ++a) mean += policy(s, a) / std::sqrt(counts.total_plus(s, a));
    for (int a = 0; a < A; ++a) x(s, a) = (1.0 / std::sqrt(counts.total_plus(s, a)) + mean) * iota;
  }
  return x;
}

/// L1 radius of the Weissman ball around P_hat(s, a, .).
inline Matrix build_weissman_set(const VisitCounts& counts, int S, int A, std::int64_t T, double delta) {
  const double log_term = std::log(2.0 * S * A * static_cast<double>(T) / delta);
  Matrix radius(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) radius(s, a) = std::sqrt(S * log_term / counts.total_plus(s, a));
  return radius;
}

inline bool in_weissman_set(const TransitionTensor& P, const TransitionTensor& p_hat, const Matrix& radius) {
  for (int s = 0; s < P.num_states(); ++s)
    for (int a = 0; a < P.num_actions(); ++a) {
      double dist = 0.0;
      for (int n = 0; n < P.num_states(); ++n) dist += std::abs(P(s, a, n) - p_hat(s, a, n));
      if (dist > radius(s, a)) return false;
    }
  return true;
}

struct BonusResult {
  Matrix u_sa;
  /// u^{i*+1} - min u^{i*+1}.
  Vector u_state;
  /// u^{i*} - min u^{i*}.
  Vector u_prev;
  TransitionTensor p_opt;
  double gain = 0.0;
  /// max - min over states of u^{i*+1} - u^{i*}.
  double gain_spread = 0.0;
  long iterations = 0;
};

/// Extended value iteration for the bonus reward x under the fixed policy,
/// with the transition chosen optimistically inside the Weissman balls.
inline BonusResult evi_bonus(const Matrix& radius, const TransitionTensor& p_hat, const StationaryPolicy& policy,
                             const Matrix& x, double eps_evi, long max_iterations = 10'000'000) {
  const int S = p_hat.num_states();
  const int A = p_hat.num_actions();
  require(x.minCoeff() >= 0.0, ErrorCode::kInvalidArgument, "bonus reward must be nonnegative");
  TransitionTensor choice(S, A);
  Vector u = Vector::Zero(S);
  Vector next(S);
  std::span<const double> u_view(u.data(), static_cast<std::size_t>(S));
  for (long i = 0; i < max_iterations; ++i) {
    for (int s = 0; s < S; ++s) {
      double v = 0.0;
      for (int a = 0; a < A; ++a) {
        const auto p = inner_max_l1(p_hat.row(s, a), radius(s, a), u_view);
        std::copy(p.begin(), p.end(), choice.row(s, a).begin());
        double pu = 0.0;
        for (int n = 0; n < S; ++n) pu += p[static_cast<std::size_t>(n)] * u(n);
        v += policy(s, a) * (x(s, a) + pu);
      }
      next(s) = v;
    }
    const Vector diff = next - u;
    if (span(diff) <= eps_evi) {
      BonusResult out;
      out.iterations = i + 1;
      out.gain = diff(0);
      out.gain_spread = span(diff);
      out.p_opt = choice;
      const double low = next.minCoeff();
      out.u_sa.resize(S, A);
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) out.u_sa(s, a) = x(s, a) - low + choice.expect(s, a, u);
      out.u_state = next.array() - low;
      out.u_prev = u.array() - u.minCoeff();
      return out;
    }
    u = next;
  }
  fail(ErrorCode::kNonConvergence, "extended value iteration exceeded " + std::to_string(max_iterations) + " sweeps");
}

/// Mirror-descent step per state: w = pi exp(theta score), KL-projected onto
/// the simplex truncated at 1/T.
inline StationaryPolicy omd_policy_update(const StationaryPolicy& policy, const Matrix& scores, double theta,
                                          std::int64_t T) {
  require(theta > 0.0, ErrorCode::kInvalidArgument, "theta must be positive");
  require(scores.allFinite(), ErrorCode::kInvalidArgument, "scores must be finite");
  const int S = policy.num_states();
  const int A = policy.num_actions();
  const double floor = 1.0 / static_cast<double>(T);
  Matrix out(S, A);
  std::vector<double> logw(static_cast<std::size_t>(A));
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) logw[static_cast<std::size_t>(a)] = std::log(policy(s, a)) + theta * scores(s, a);
    const auto p = kl_project_capped_simplex_log(logw, floor);
    for (int a = 0; a < A; ++a) out(s, a) = p[static_cast<std::size_t>(a)];
  }
  return StationaryPolicy(std::move(out));
}

inline double dual_update(double lambda_k, double j_hat, double epsilon, double tau, double lambda_cap) {
  return std::min(lambda_cap, std::max(0.0, lambda_k + j_hat + epsilon - tau));
}

/// State handed to an observer at the start of each episode.
struct PoObservation {
  int k = 0;
  const VisitCounts* counts = nullptr;
  const StationaryPolicy* policy = nullptr;
  double lambda = 0.0;
};

using PoObserver = std::function<void(const PoObservation&)>;

/// Online run of the ergodic primal-dual policy-optimization learner for
/// exactly T steps. K = floor(T/H) full episodes are followed by a partial one
/// played with the latest policy and no update.
inline ExperimentLog run_ergodic_po(const CmdpModel& model, const PoParams& params, std::uint64_t seed,
                                    int start_state = 0, const PoObserver& observer = {}) {
  const int S = model.num_states;
  const int A = model.num_actions;
  require(params.S == S && params.A == A, ErrorCode::kInvalidArgument, "parameters derived for another model");
  require(params.H >= 2 * params.N && params.N >= 1, ErrorCode::kInvalidHorizon, "H must be >= 2N");

  Environment env(model, start_state, Rng(seed).fork(0x656E76));
  Rng agent = Rng(seed).fork(0x6167656E74);

  ExperimentLog log;
  log.algorithm = "ergodic-po";
  log.seed = seed;
  log.start_state = start_state;
  log.parameters = params.record();
  log.steps.reserve(static_cast<std::size_t>(params.T));
  log.po_episodes.reserve(static_cast<std::size_t>(params.K));

  StationaryPolicy policy = StationaryPolicy::uniform(S, A);
  double lambda = 0.0;
  VisitCounts counts(S, A);
  double cum_reward = 0.0;
  double cum_cost = 0.0;
  const double d_bound = 1.0 + params.lambda_cap / params.eta;
  const double stab_scale = 8.0 * params.theta * params.H * params.iota;
  std::vector<double> row(static_cast<std::size_t>(A));

  auto play = [&](const StationaryPolicy& pi, int steps, std::vector<std::array<int, 3>>* transitions) {
    for (int h = 0; h < steps; ++h) {
      const int s = env.state();
      for (int a = 0; a < A; ++a) row[static_cast<std::size_t>(a)] = pi(s, a);
      const int a = sample_index(row, agent.uniform());
      const double r = model.reward(s, a);
      const double c = model.cost(s, a);
      log.steps.push_back({s, a, r, c});
      cum_reward += r;
      cum_cost += c;
      const int next = env.step(a);
      if (transitions) transitions->push_back({s, a, next});
    }
  };

  std::vector<std::array<int, 3>> transitions;
  for (std::int64_t k = 1; k <= params.K; ++k) {
    if (observer) observer({static_cast<int>(k), &counts, &policy, lambda});
    transitions.clear();
    const std::size_t first = log.steps.size();
    play(policy, params.H, &transitions);
    const std::span<const StepRecord> episode(log.steps.data() + first, static_cast<std::size_t>(params.H));

    const TransitionTensor p_hat = empirical_transition(counts);
    const Matrix d = model.reward - (lambda / params.eta) * model.cost;
    const double d_max = d.cwiseAbs().maxCoeff();
    require(d_max <= d_bound + 1e-12, ErrorCode::kInvariantViolation, "adjusted reward exceeds 1 + lambda/eta");
    const QEstimate q = estimate_q(episode, p_hat, d, params.N);
    const double q_max = q.q_hat.cwiseAbs().maxCoeff();
    require(q_max <= d_bound * (params.N + 1) + 1e-9, ErrorCode::kInvariantViolation,
            "Q estimate exceeds its magnitude bound");

    const Matrix x = compute_bonus_reward(counts, policy, params.iota);
    const Matrix radius = build_weissman_set(counts, S, A, params.T, params.delta);
    const BonusResult bonus = evi_bonus(radius, p_hat, policy, x, params.eps_evi);
    const Matrix scores = q.q_hat + bonus.u_sa;
    StationaryPolicy updated = omd_policy_update(policy, scores, params.theta, params.T);

    double j_hat = 0.0;
    for (int h = params.N; h < params.H; ++h) j_hat += episode[static_cast<std::size_t>(h)].cost;
    j_hat /= static_cast<double>(params.H - params.N);
    const double next_lambda = dual_update(lambda, j_hat, params.epsilon, params.tau, params.lambda_cap);

    PoEpisode e;
    e.k = static_cast<int>(k);
    e.lambda_before = lambda;
    e.lambda_after = next_lambda;
    e.j_hat = j_hat;
    e.evi_iterations = bonus.iterations;
    e.evi_gain = bonus.gain;
    e.evi_gain_spread = bonus.gain_spread;
    e.evi_increment_span = bonus.gain_spread;
    e.bonus_max = x.maxCoeff();
    e.q_max = q_max;
    e.adjusted_reward_max = d_max;
    e.score_max = scores.cwiseAbs().maxCoeff();
    e.stability_premise = params.theta * e.score_max <= 1.0;
    e.stability_bound = true;
    e.min_policy_entry = updated.probs().minCoeff();
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const double before = policy(s, a);
        const double move = std::abs(updated(s, a) - before);
        e.policy_delta = std::max(e.policy_delta, move / before);
        if (move > stab_scale * before * (1.0 + 1e-12) + 1e-15) e.stability_bound = false;
      }
    e.cumulative_reward = cum_reward;
    e.cumulative_cost = cum_cost;
    log.po_episodes.push_back(e);

    for (const auto& [s, a, n] : transitions) counts.add(s, a, n);
    policy = std::move(updated);
    lambda = next_lambda;
  }
  const std::int64_t rest = params.T - params.K * params.H;
  if (rest > 0) play(policy, static_cast<int>(rest), nullptr);
  return log;
}

}  // namespace cmdp
