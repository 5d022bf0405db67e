#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <cstdint>
#include <span>
#include <vector>

#include "cmdp/lp.hpp"
#include "cmdp/markov.hpp"

namespace cmdp {

/// Bernstein confidence intervals around the empirical transition:
/// |P(s, a, s') - P_hat(s, a, s')| <= 4 sqrt(P_hat alpha) + 28 alpha with
/// alpha = ln(2SAT/delta) / N+(s, a).
class BernsteinSet {
 public:
  BernsteinSet() = default;
  BernsteinSet(Matrix alpha, TransitionTensor center, std::vector<double> half_width)
      : alpha_(std::move(alpha)), center_(std::move(center)), half_width_(std::move(half_width)) {}

  /// Zero-width set pinned at P.
  static BernsteinSet exact(const TransitionTensor& P) {
    const int S = P.num_states();
    const int A = P.num_actions();
    return BernsteinSet(Matrix::Zero(S, A), P, std::vector<double>(static_cast<std::size_t>(S) * A * S, 0.0));
  }

  int num_states() const { return center_.num_states(); }
  int num_actions() const { return center_.num_actions(); }
  const Matrix& alpha() const { return alpha_; }
  const TransitionTensor& center() const { return center_; }
  double half_width(int s, int a, int n) const {
    return half_width_[(static_cast<std::size_t>(s) * num_actions() + a) * num_states() + n];
  }
  double lower(int s, int a, int n) const { return std::max(0.0, center_(s, a, n) - half_width(s, a, n)); }
  double upper(int s, int a, int n) const { return std::min(1.0, center_(s, a, n) + half_width(s, a, n)); }

  bool contains(const TransitionTensor& P, double tol = 0.0) const {
    for (int s = 0; s < num_states(); ++s)
      for (int a = 0; a < num_actions(); ++a)
        for (int n = 0; n < num_states(); ++n)
          if (std::abs(P(s, a, n) - center_(s, a, n)) > half_width(s, a, n) + tol) return false;
    return true;
  }

 private:
  Matrix alpha_;
  TransitionTensor center_;
  std::vector<double> half_width_;
};

inline BernsteinSet bernstein_confidence(const VisitCounts& counts, int S, int A, std::int64_t T, double delta) {
  const double iota = std::log(2.0 * S * A * static_cast<double>(T) / delta);
  TransitionTensor center = empirical_transition(counts);
  Matrix alpha(S, A);
  std::vector<double> width(static_cast<std::size_t>(S) * A * S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      alpha(s, a) = iota / counts.total_plus(s, a);
      for (int n = 0; n < S; ++n)
        width[(static_cast<std::size_t>(s) * A + a) * S + n] =
            4.0 * std::sqrt(center(s, a, n) * alpha(s, a)) + 28.0 * alpha(s, a);
    }
  return BernsteinSet(std::move(alpha), std::move(center), std::move(width));
}

/// pi(a|s, h) for h = 0 .. H-1.
class StepPolicy {
 public:
  StepPolicy() = default;
  StepPolicy(int S, int A, int H)
      : S_(S), A_(A), H_(H), probs_(static_cast<std::size_t>(S) * H * A, 1.0 / A) {}

  /// The stationary policy repeated at every step.
  static StepPolicy stationary(const StationaryPolicy& pi, int H) {
    StepPolicy out(pi.num_states(), pi.num_actions(), H);
    for (int s = 0; s < out.S_; ++s)
      for (int h = 0; h < H; ++h)
        for (int a = 0; a < out.A_; ++a) out(s, a, h) = pi(s, a);
    return out;
  }

  int num_states() const { return S_; }
  int num_actions() const { return A_; }
  int horizon() const { return H_; }
  double& operator()(int s, int a, int h) { return probs_[offset(s, h) + a]; }
  double operator()(int s, int a, int h) const { return probs_[offset(s, h) + a]; }
  std::span<double> row(int s, int h) { return {probs_.data() + offset(s, h), static_cast<std::size_t>(A_)}; }
  std::span<const double> row(int s, int h) const {
    return {probs_.data() + offset(s, h), static_cast<std::size_t>(A_)};
  }
  bool operator==(const StepPolicy&) const = default;

 private:
  std::size_t offset(int s, int h) const { return (static_cast<std::size_t>(s) * H_ + h) * A_; }
  int S_ = 0;
  int A_ = 0;
  int H_ = 0;
  std::vector<double> probs_;
};

/// P(s, a, h, s') for h = 0 .. H-1; also the storage layout of occupancies.
class StepTensor {
 public:
  StepTensor() = default;
  StepTensor(int S, int A, int H, double fill = 0.0)
      : S_(S), A_(A), H_(H), data_(static_cast<std::size_t>(S) * A * H * S, fill) {}

  static StepTensor homogeneous(const TransitionTensor& P, int H) {
    StepTensor out(P.num_states(), P.num_actions(), H);
    for (int s = 0; s < out.S_; ++s)
      for (int a = 0; a < out.A_; ++a)
        for (int h = 0; h < H; ++h) {
          auto row = out.row(s, a, h);
          const auto src = P.row(s, a);
          std::copy(src.begin(), src.end(), row.begin());
        }
    return out;
  }

  int num_states() const { return S_; }
  int num_actions() const { return A_; }
  int horizon() const { return H_; }
  double& operator()(int s, int a, int h, int n) { return data_[offset(s, a, h) + n]; }
  double operator()(int s, int a, int h, int n) const { return data_[offset(s, a, h) + n]; }
  std::span<double> row(int s, int a, int h) { return {data_.data() + offset(s, a, h), static_cast<std::size_t>(S_)}; }
  std::span<const double> row(int s, int a, int h) const {
    return {data_.data() + offset(s, a, h), static_cast<std::size_t>(S_)};
  }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  std::size_t offset(int s, int a, int h) const {
    return ((static_cast<std::size_t>(s) * A_ + a) * H_ + h) * S_;
  }
  bool operator==(const StepTensor&) const = default;

 private:
  int S_ = 0;
  int A_ = 0;
  int H_ = 0;
  std::vector<double> data_;
};

using StepTransition = StepTensor;

/// nu(s, a, h, s') with its start state.
struct FiniteHorizonOccupancy {
  StepTensor nu;
  int start_state = 0;

  int num_states() const { return nu.num_states(); }
  int num_actions() const { return nu.num_actions(); }
  int horizon() const { return nu.horizon(); }
  double operator()(int s, int a, int h, int n) const { return nu(s, a, h, n); }
  double sa(int s, int a, int h) const {
    double total = 0.0;
    for (double v : nu.row(s, a, h)) total += v;
    return total;
  }
  double state(int s, int h) const {
    double total = 0.0;
    for (int a = 0; a < num_actions(); ++a) total += sa(s, a, h);
    return total;
  }
  /// sum over (s, a, h) of nu(s, a, h) d(s, a).
  double value(const Matrix& d) const {
    double total = 0.0;
    for (int s = 0; s < num_states(); ++s)
      for (int a = 0; a < num_actions(); ++a)
        for (int h = 0; h < horizon(); ++h) total += sa(s, a, h) * d(s, a);
    return total;
  }
};

/// Largest violation of nonnegativity, the start-state condition, unit mass
/// per layer and flow conservation.
inline double polytope_violation(const FiniteHorizonOccupancy& occ) {
  const int S = occ.num_states();
  const int A = occ.num_actions();
  const int H = occ.horizon();
  double worst = 0.0;
  for (double v : occ.nu.data()) worst = std::max(worst, -v);
  for (int s = 0; s < S; ++s) worst = std::max(worst, std::abs(occ.state(s, 0) - (s == occ.start_state ? 1.0 : 0.0)));
  for (int h = 0; h < H; ++h) {
    double mass = 0.0;
    for (int s = 0; s < S; ++s) mass += occ.state(s, h);
    worst = std::max(worst, std::abs(mass - 1.0));
  }
  for (int h = 0; h + 1 < H; ++h)
    for (int n = 0; n < S; ++n) {
      double inflow = 0.0;
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) inflow += occ(s, a, h, n);
      worst = std::max(worst, std::abs(inflow - occ.state(n, h + 1)));
    }
  return worst;
}

/// Largest violation of the linearised membership
/// |nu(s, a, h, s') - P_hat nu(s, a, h)| <= width nu(s, a, h), with widths
/// clipped to the unit interval.
inline double membership_violation(const FiniteHorizonOccupancy& occ, const BernsteinSet& conf) {
  double worst = 0.0;
  for (int s = 0; s < occ.num_states(); ++s)
    for (int a = 0; a < occ.num_actions(); ++a)
      for (int h = 0; h < occ.horizon(); ++h) {
        const double m = occ.sa(s, a, h);
        for (int n = 0; n < occ.num_states(); ++n) {
          const double v = occ(s, a, h, n);
          worst = std::max(worst, v - conf.upper(s, a, n) * m);
          worst = std::max(worst, conf.lower(s, a, n) * m - v);
        }
      }
  return worst;
}

/// Occupancy of (pi, P) from `start` by forward recursion.
inline FiniteHorizonOccupancy occupancy_of(const StepPolicy& pi, const StepTransition& P, int start) {
  const int S = P.num_states();
  const int A = P.num_actions();
  const int H = P.horizon();
  FiniteHorizonOccupancy occ{StepTensor(S, A, H), start};
  std::vector<double> mass(static_cast<std::size_t>(S), 0.0);
  std::vector<double> next(static_cast<std::size_t>(S));
  mass[static_cast<std::size_t>(start)] = 1.0;
  for (int h = 0; h < H; ++h) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int s = 0; s < S; ++s) {
      if (mass[static_cast<std::size_t>(s)] == 0.0) continue;
      for (int a = 0; a < A; ++a) {
        const double w = mass[static_cast<std::size_t>(s)] * pi(s, a, h);
        if (w == 0.0) continue;
        for (int n = 0; n < S; ++n) {
          const double v = w * P(s, a, h, n);
          occ.nu(s, a, h, n) = v;
          next[static_cast<std::size_t>(n)] += v;
        }
      }
    }
    mass.swap(next);
  }
  return occ;
}

struct FiniteHorizonPolicy {
  StepPolicy policy;
  StepTransition transition;
};

/// pi(a|s, h) = nu(s, a, h) / nu(s, h) and P(s, a, h, .) = nu(s, a, h, .) /
/// nu(s, a, h); entries below kSupport count as zero and rows without support
/// are uniform.
inline FiniteHorizonPolicy extract_policy_transition(const FiniteHorizonOccupancy& occ) {
  const int S = occ.num_states();
  const int A = occ.num_actions();
  const int H = occ.horizon();
  const auto clean = [](double v) { return v < Tolerances::kSupport ? 0.0 : v; };
  FiniteHorizonPolicy out{StepPolicy(S, A, H), StepTransition(S, A, H, 1.0 / S)};
  std::vector<double> sa(static_cast<std::size_t>(A));
  for (int s = 0; s < S; ++s)
    for (int h = 0; h < H; ++h) {
      double state_mass = 0.0;
      for (int a = 0; a < A; ++a) {
        double m = 0.0;
        for (int n = 0; n < S; ++n) m += clean(occ(s, a, h, n));
        sa[static_cast<std::size_t>(a)] = m;
        state_mass += m;
        if (m > Tolerances::kSupport) {
          auto row = out.transition.row(s, a, h);
          double total = 0.0;
          for (int n = 0; n < S; ++n) total += (row[static_cast<std::size_t>(n)] = clean(occ(s, a, h, n)) / m);
          for (double& v : row) v /= total;
        }
      }
      if (state_mass > Tolerances::kSupport) {
        auto row = out.policy.row(s, h);
        double total = 0.0;
        for (int a = 0; a < A; ++a) total += (row[static_cast<std::size_t>(a)] = sa[static_cast<std::size_t>(a)] / state_mass);
        for (double& v : row) v /= total;
      }
    }
  return out;
}

struct FhValueTable {
  /// V[h] for h = 0 .. H; V[H] is zero.
  std::vector<Vector> V;
  /// Q[h] for h = 0 .. H-1.
  std::vector<Matrix> Q;

  int horizon() const { return static_cast<int>(Q.size()); }
  double max_span() const {
    double worst = 0.0;
    for (const auto& v : V) worst = std::max(worst, span(v));
    return worst;
  }
};

/// Backward recursion Q_h = d + P_h V_{h+1}, V_h = pi_h Q_h.
inline FhValueTable fh_values(const StepPolicy& pi, const StepTransition& P, const Matrix& d) {
  const int S = P.num_states();
  const int A = P.num_actions();
  const int H = P.horizon();
  require(pi.num_states() == S && pi.num_actions() == A && pi.horizon() == H && d.rows() == S && d.cols() == A,
          ErrorCode::kInvalidArgument, "fh_values: dimension mismatch");
  FhValueTable out;
  out.V.assign(static_cast<std::size_t>(H + 1), Vector::Zero(S));
  out.Q.assign(static_cast<std::size_t>(H), Matrix::Zero(S, A));
  for (int h = H - 1; h >= 0; --h) {
    const Vector& next = out.V[static_cast<std::size_t>(h + 1)];
    Matrix& q = out.Q[static_cast<std::size_t>(h)];
    Vector& v = out.V[static_cast<std::size_t>(h)];
    for (int s = 0; s < S; ++s) {
      double vs = 0.0;
      for (int a = 0; a < A; ++a) {
        double pv = 0.0;
        for (int n = 0; n < S; ++n) pv += P(s, a, h, n) * next(n);
        q(s, a) = d(s, a) + pv;
        vs += pi(s, a, h) * q(s, a);
      }
      v(s) = vs;
    }
  }
  return out;
}

enum class Opt1Backend { kSimplex, kLagrangian };

struct Opt1Result {
  FiniteHorizonOccupancy occupancy;
  double objective = 0.0;
  double cost = 0.0;
};

namespace detail {

/// Variables of the occupancy programs share the StepTensor layout.
inline LinearProgram opt1_program(const BernsteinSet& conf, int start, int H, double budget, const Matrix& r,
                                  const Matrix& c) {
  const int S = conf.num_states();
  const int A = conf.num_actions();
  const StepTensor layout(S, A, H);
  const auto var = [&](int s, int a, int h, int n) { return static_cast<int>(layout.offset(s, a, h)) + n; };
  LinearProgram lp(S * A * H * S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      for (int h = 0; h < H; ++h)
        for (int n = 0; n < S; ++n) lp.objective[static_cast<std::size_t>(var(s, a, h, n))] = r(s, a);

  // Start state; together with flow conservation this fixes every layer's mass.
  for (int s = 0; s < S; ++s) {
    LinearProgram::Terms t;
    for (int a = 0; a < A; ++a)
      for (int n = 0; n < S; ++n) t.emplace_back(var(s, a, 0, n), 1.0);
    lp.add_equality(std::move(t), s == start ? 1.0 : 0.0);
  }
  for (int h = 0; h + 1 < H; ++h)
    for (int n = 0; n < S; ++n) {
      LinearProgram::Terms t;
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) t.emplace_back(var(s, a, h, n), 1.0);
      for (int a = 0; a < A; ++a)
        for (int m = 0; m < S; ++m) t.emplace_back(var(n, a, h + 1, m), -1.0);
      lp.add_equality(std::move(t), 0.0);
    }

  LinearProgram::Terms cost;
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      for (int h = 0; h < H; ++h)
        for (int n = 0; n < S; ++n)
          if (c(s, a) != 0.0) cost.emplace_back(var(s, a, h, n), c(s, a));
  lp.add_inequality(std::move(cost), budget);

  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      for (int n = 0; n < S; ++n) {
        const double hi = conf.upper(s, a, n);
        const double lo = conf.lower(s, a, n);
        for (int h = 0; h < H; ++h) {
          if (hi < 1.0) {
            LinearProgram::Terms t;
            for (int m = 0; m < S; ++m) t.emplace_back(var(s, a, h, m), (m == n ? 1.0 : 0.0) - hi);
            lp.add_inequality(std::move(t), 0.0);
          }
          if (lo > 0.0) {
            LinearProgram::Terms t;
            for (int m = 0; m < S; ++m) t.emplace_back(var(s, a, h, m), lo - (m == n ? 1.0 : 0.0));
            lp.add_inequality(std::move(t), 0.0);
          }
        }
      }
  return lp;
}

/// argmax p.v over {lo <= p <= hi, sum p = 1}: start at the lower bounds and
/// pour the rest into states by decreasing v (ties to the smaller index).
inline void box_simplex_max(const BernsteinSet& conf, int s, int a, const Vector& v, std::vector<int>& order,
                            std::span<double> out) {
  const int S = conf.num_states();
  double rest = 1.0;
  for (int n = 0; n < S; ++n) rest -= (out[static_cast<std::size_t>(n)] = conf.lower(s, a, n));
  require(rest >= -1e-12, ErrorCode::kInvariantViolation, "confidence box misses the simplex");
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return v(x) > v(y); });
  for (int n : order) {
    if (rest <= 0.0) break;
    const double add = std::min(rest, conf.upper(s, a, n) - out[static_cast<std::size_t>(n)]);
    if (add > 0.0) {
      out[static_cast<std::size_t>(n)] += add;
      rest -= add;
    }
  }
}

struct BestResponse {
  FiniteHorizonOccupancy occupancy;
  double reward = 0.0;
  double cost = 0.0;
};

/// Maximises <nu, d> over the occupancy polytope intersected with the
/// confidence box by backward induction with optimistic transitions.
inline BestResponse best_response(const BernsteinSet& conf, int start, int H, const Matrix& d, const Matrix& r,
                                  const Matrix& c) {
  const int S = conf.num_states();
  const int A = conf.num_actions();
  StepPolicy pi(S, A, H);
  StepTransition P(S, A, H);
  Vector next = Vector::Zero(S);
  Vector cur(S);
  std::vector<int> order(static_cast<std::size_t>(S));
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      int best = 0;
      double best_q = 0.0;
      for (int a = 0; a < A; ++a) {
        auto row = P.row(s, a, h);
        box_simplex_max(conf, s, a, next, order, row);
        double q = d(s, a);
        for (int n = 0; n < S; ++n) q += row[static_cast<std::size_t>(n)] * next(n);
        if (a == 0 || q > best_q) {
          best = a;
          best_q = q;
        }
      }
      for (int a = 0; a < A; ++a) pi(s, a, h) = a == best ? 1.0 : 0.0;
      cur(s) = best_q;
    }
    next = cur;
  }
  BestResponse out{occupancy_of(pi, P, start)};
  out.reward = out.occupancy.value(r);
  out.cost = out.occupancy.value(c);
  return out;
}

inline Opt1Result mix(const BestResponse& lo, const BestResponse& hi, double budget) {
  const double alpha = std::clamp((budget - hi.cost) / (lo.cost - hi.cost), 0.0, 1.0);
  Opt1Result out{hi.occupancy};
  auto& data = out.occupancy.nu.data();
  const auto& lo_data = lo.occupancy.nu.data();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = alpha * lo_data[i] + (1.0 - alpha) * data[i];
  out.objective = alpha * lo.reward + (1.0 - alpha) * hi.reward;
  out.cost = alpha * lo.cost + (1.0 - alpha) * hi.cost;
  return out;
}

/// Exact Lagrangian solution of the cost-constrained program. The multiplier
/// moves to the crossing point of the two bracketing best responses until no
/// response beats their common line; the answer mixes the two so the budget
/// binds.
inline Opt1Result opt1_lagrangian(const BernsteinSet& conf, int start, int H, double budget, const Matrix& r,
                                  const Matrix& c) {
  const double slack = 1e-12 * std::max(1.0, budget);
  BestResponse lo = best_response(conf, start, H, r, r, c);
  if (lo.cost <= budget + slack) return {lo.occupancy, lo.reward, lo.cost};

  BestResponse hi;
  bool found = false;
  for (double lambda = 1.0; lambda <= 1e9; lambda *= 2.0) {
    BestResponse br = best_response(conf, start, H, r - lambda * c, r, c);
    if (br.cost <= budget + slack) {
      hi = std::move(br);
      found = true;
      break;
    }
    lo = std::move(br);
  }
  if (!found) {
    BestResponse cheapest = best_response(conf, start, H, -c, r, c);
    require(cheapest.cost <= budget + slack, ErrorCode::kInfeasible,
            "smallest reachable cost " + std::to_string(cheapest.cost) + " exceeds budget " + std::to_string(budget));
    hi = std::move(cheapest);
  }
  for (int iter = 0; iter < 10000; ++iter) {
    if (hi.cost >= budget - slack) return {hi.occupancy, hi.reward, hi.cost};
    const double lambda = std::max(0.0, (lo.reward - hi.reward) / (lo.cost - hi.cost));
    BestResponse x = best_response(conf, start, H, r - lambda * c, r, c);
    const double line = lo.reward - lambda * lo.cost;
    const double gx = x.reward - lambda * x.cost;
    if (gx <= line + 1e-11 * std::max(1.0, std::abs(line))) return mix(lo, hi, budget);
    if (x.cost > budget + slack)
      lo = std::move(x);
    else
      hi = std::move(x);
  }
  fail(ErrorCode::kNonConvergence, "parametric multiplier search did not settle");
}

}  // namespace detail

/// max <nu, r> over occupancies from `start` whose extracted transition lies
/// in the confidence set and whose total cost is at most H tau + sp_c.
inline Opt1Result solve_opt1(const BernsteinSet& conf, int start, int H, double tau, double sp_c, const Matrix& r,
                             const Matrix& c, Opt1Backend backend = Opt1Backend::kSimplex) {
  require(H >= 1, ErrorCode::kInvalidArgument, "H must be >= 1");
  require(start >= 0 && start < conf.num_states(), ErrorCode::kInvalidArgument, "start state out of range");
  const double budget = H * tau + sp_c;
  if (backend == Opt1Backend::kLagrangian) return detail::opt1_lagrangian(conf, start, H, budget, r, c);

  const LinearProgram lp = detail::opt1_program(conf, start, H, budget, r, c);
  const LpSolution sol = solve_lp(lp);
  require(sol.status != LpStatus::kInfeasible, ErrorCode::kInfeasible,
          "cost budget " + std::to_string(budget) + " cannot be met inside the confidence set");
  require(sol.status == LpStatus::kOptimal, ErrorCode::kNumericalFailure, "occupancy program unbounded");
  Opt1Result out{FiniteHorizonOccupancy{StepTensor(conf.num_states(), conf.num_actions(), H), start}};
  auto& data = out.occupancy.nu.data();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = std::max(0.0, sol.values[i]);
  out.objective = out.occupancy.value(r);
  out.cost = out.occupancy.value(c);
  return out;
}

}  // namespace cmdp
