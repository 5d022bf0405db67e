#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cmdp/cmdp.hpp"

namespace cmdp::testing {

inline std::string data_path(const std::string& rel) { return std::string(CMDP_DATA_DIR) + "/" + rel; }

inline Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform();
  return m;
}

/// Random policy with every entry at least `floor`.
inline StationaryPolicy random_policy(int S, int A, Rng& rng, double floor = 0.0) {
  Matrix p(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) p(s, a) = floor + rng.uniform();
    p.row(s) /= p.row(s).sum();
  }
  return StationaryPolicy(std::move(p));
}

/// Random ergodic model of random size within the given bounds.
inline CmdpModel random_model(Rng& rng, int max_states, int max_actions) {
  const int S = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_states)));
  const int A = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_actions)));
  return generate_random_ergodic(S, A, rng.next(), 0.2 + 0.6 * rng.uniform());
}

inline CmdpModel make_model(const std::vector<std::vector<double>>& r, const std::vector<std::vector<double>>& c,
                            double tau, const std::vector<std::vector<std::vector<double>>>& P) {
  CmdpModel m;
  m.num_states = static_cast<int>(r.size());
  m.num_actions = static_cast<int>(r[0].size());
  m.reward.resize(m.num_states, m.num_actions);
  m.cost.resize(m.num_states, m.num_actions);
  m.transition = TransitionTensor(m.num_states, m.num_actions);
  for (int s = 0; s < m.num_states; ++s)
    for (int a = 0; a < m.num_actions; ++a) {
      m.reward(s, a) = r[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
      m.cost(s, a) = c[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
      for (int n = 0; n < m.num_states; ++n)
        m.transition(s, a, n) = P[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)][static_cast<std::size_t>(n)];
    }
  m.threshold = tau;
  validate(m);
  return m;
}

/// Relative value iteration for the unconstrained optimal gain.
inline double rvi_optimal_gain(const CmdpModel& m, int iterations = 200000, double tol = 1e-13) {
  const int S = m.num_states;
  Vector h = Vector::Zero(S);
  double gain = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vector next(S);
    for (int s = 0; s < S; ++s) {
      double best = -1e300;
      for (int a = 0; a < m.num_actions; ++a) best = std::max(best, m.reward(s, a) + m.transition.expect(s, a, h));
      next(s) = best;
    }
    const double lo = (next - h).minCoeff();
    const double hi = (next - h).maxCoeff();
    gain = 0.5 * (lo + hi);
    h = next.array() - next(0);
    if (hi - lo < tol) break;
  }
  return gain;
}

/// mu_pi for a 2-state chain in closed form.
inline double two_state_gain(const CmdpModel& m, double p0, double p1, const Matrix& d) {
  const double pi[2][2] = {{p0, 1.0 - p0}, {p1, 1.0 - p1}};
  double a01 = 0.0, a10 = 0.0;
  for (int a = 0; a < 2; ++a) {
    a01 += pi[0][a] * m.transition(0, a, 1);
    a10 += pi[1][a] * m.transition(1, a, 0);
  }
  const double mu0 = a10 / (a01 + a10);
  const double mu1 = 1.0 - mu0;
  return mu0 * (pi[0][0] * d(0, 0) + pi[0][1] * d(0, 1)) + mu1 * (pi[1][0] * d(1, 0) + pi[1][1] * d(1, 1));
}

}  // namespace cmdp::testing
