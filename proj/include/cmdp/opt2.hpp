#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "cmdp/finite_horizon.hpp"
#include "cmdp/rng.hpp"

namespace cmdp {

struct SpanBudget {
  double sp_r_star = 0.0;
  double sp_c_star = 0.0;
};

struct Opt2Options {
  int restarts = 20;
  double rho_start = 10.0;
  double rho_max = 1e6;
  double rho_growth = 4.0;
  double initial_step = 0.25;
  double min_step = 1e-7;
  double stage_min_step = 1e-4;  // all penalty stages but the last
  double restore_step = 1e-3;
  std::uint64_t seed = 0x5EED0F5A7ULL;
  Opt1Backend backend = Opt1Backend::kSimplex;
};

/// A span-feasible point: its occupancy plus the (policy, transition) pair
/// that generates it. Spans are those of the witness's value functions over
/// all states, including states the witness never reaches.
struct Opt2Result {
  FiniteHorizonOccupancy occupancy;
  FiniteHorizonPolicy witness;
  double objective = 0.0;
  double cost = 0.0;
  double span_r_max = 0.0;
  double span_c_max = 0.0;
  bool from_opt1 = false;
};

namespace detail {

class SpanProblem {
 public:
  struct Eval {
    double reward = 0.0;
    double cost = 0.0;
    double span_r = 0.0;
    double span_c = 0.0;
    double violation = 0.0;
    bool feasible = false;
  };

  SpanProblem(const BernsteinSet& conf, int start, int H, double budget, SpanBudget spans, const Matrix& r,
              const Matrix& c)
      : conf_(conf), start_(start), H_(H), budget_(budget), cap_r_(2.0 * spans.sp_r_star),
        cap_c_(2.0 * spans.sp_c_star), r_(r), c_(c), S_(conf.num_states()), A_(conf.num_actions()),
        mass_(static_cast<std::size_t>(S_)), next_(static_cast<std::size_t>(S_)),
        vr_(static_cast<std::size_t>(S_)), vc_(static_cast<std::size_t>(S_)), wr_(static_cast<std::size_t>(S_)),
        wc_(static_cast<std::size_t>(S_)) {}

  int num_states() const { return S_; }
  int num_actions() const { return A_; }
  int horizon() const { return H_; }
  double lower(int s, int a, int n) const { return conf_.lower(s, a, n); }
  double upper(int s, int a, int n) const { return conf_.upper(s, a, n); }

  Eval evaluate(const FiniteHorizonPolicy& x) {
    Eval e;
    std::fill(mass_.begin(), mass_.end(), 0.0);
    mass_[static_cast<std::size_t>(start_)] = 1.0;
    for (int h = 0; h < H_; ++h) {
      std::fill(next_.begin(), next_.end(), 0.0);
      for (int s = 0; s < S_; ++s) {
        const double m = mass_[static_cast<std::size_t>(s)];
        if (m == 0.0) continue;
        for (int a = 0; a < A_; ++a) {
          const double w = m * x.policy(s, a, h);
          if (w == 0.0) continue;
          e.reward += w * r_(s, a);
          e.cost += w * c_(s, a);
          const auto p = x.transition.row(s, a, h);
          for (int n = 0; n < S_; ++n) next_[static_cast<std::size_t>(n)] += w * p[static_cast<std::size_t>(n)];
        }
      }
      mass_.swap(next_);
    }
    std::fill(vr_.begin(), vr_.end(), 0.0);
    std::fill(vc_.begin(), vc_.end(), 0.0);
    double excess = 0.0;
    for (int h = H_ - 1; h >= 0; --h) {
      double rmin = std::numeric_limits<double>::infinity(), rmax = -rmin, cmin = rmin, cmax = -rmin;
      for (int s = 0; s < S_; ++s) {
        double vr = 0.0, vc = 0.0;
        for (int a = 0; a < A_; ++a) {
          const double pa = x.policy(s, a, h);
          if (pa == 0.0) continue;
          const auto p = x.transition.row(s, a, h);
          double er = r_(s, a), ec = c_(s, a);
          for (int n = 0; n < S_; ++n) {
            er += p[static_cast<std::size_t>(n)] * vr_[static_cast<std::size_t>(n)];
            ec += p[static_cast<std::size_t>(n)] * vc_[static_cast<std::size_t>(n)];
          }
          vr += pa * er;
          vc += pa * ec;
        }
        wr_[static_cast<std::size_t>(s)] = vr;
        wc_[static_cast<std::size_t>(s)] = vc;
        rmin = std::min(rmin, vr);
        rmax = std::max(rmax, vr);
        cmin = std::min(cmin, vc);
        cmax = std::max(cmax, vc);
      }
      vr_.swap(wr_);
      vc_.swap(wc_);
      e.span_r = std::max(e.span_r, rmax - rmin);
      e.span_c = std::max(e.span_c, cmax - cmin);
      const double over_r = std::max(0.0, rmax - rmin - cap_r_);
      const double over_c = std::max(0.0, cmax - cmin - cap_c_);
      excess += over_r * over_r + over_c * over_c;
    }
    const double over_cost = std::max(0.0, e.cost - budget_);
    e.violation = excess + over_cost * over_cost;
    e.feasible = e.span_r <= cap_r_ + 1e-9 && e.span_c <= cap_c_ + 1e-9 &&
                 e.cost <= budget_ + 1e-9 * std::max(1.0, budget_);
    return e;
  }

 private:
  const BernsteinSet& conf_;
  int start_;
  int H_;
  double budget_;
  double cap_r_;
  double cap_c_;
  const Matrix& r_;
  const Matrix& c_;
  int S_;
  int A_;
  std::vector<double> mass_, next_, vr_, vc_, wr_, wc_;
};

/// Moves `row` into [lo, hi] with unit sum, changing as little as a greedy
/// pass allows.
inline void repair_row(std::span<double> row, const std::vector<double>& lo, const std::vector<double>& hi) {
  double total = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) total += (row[i] = std::clamp(row[i], lo[i], hi[i]));
  for (std::size_t i = 0; i < row.size() && total < 1.0; ++i) {
    const double add = std::min(1.0 - total, hi[i] - row[i]);
    row[i] += add;
    total += add;
  }
  for (std::size_t i = 0; i < row.size() && total > 1.0; ++i) {
    const double take = std::min(total - 1.0, row[i] - lo[i]);
    row[i] -= take;
    total -= take;
  }
}

/// Random point of [lo, hi] intersected with the simplex.
inline void random_row(std::span<double> row, const std::vector<double>& lo, const std::vector<double>& hi, Rng& rng) {
  std::vector<double> w(row.size());
  for (double& v : w) v = rng.uniform() + 1e-3;
  double rest = 1.0;
  for (std::size_t i = 0; i < row.size(); ++i) rest -= (row[i] = lo[i]);
  for (int round = 0; round < 64 && rest > 1e-15; ++round) {
    double weight = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i)
      if (row[i] < hi[i]) weight += w[i];
    if (weight == 0.0) break;
    const double pool = rest;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i] >= hi[i]) continue;
      const double add = std::min(pool * w[i] / weight, hi[i] - row[i]);
      row[i] += add;
      rest -= add;
    }
  }
  repair_row(row, lo, hi);
}

/// Local search in (policy, transition) space. Every row stays on its simplex
/// (policy) or on its box-simplex (transition); moves shift mass between two
/// entries of one row.
class SpanSearch {
 public:
  SpanSearch(SpanProblem& problem, double min_step, Rng rng)
      : problem_(problem), min_step_(min_step), rng_(rng) {
    const int S = problem.num_states(), A = problem.num_actions(), H = problem.horizon();
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        std::vector<double> lo(static_cast<std::size_t>(S)), hi(static_cast<std::size_t>(S));
        for (int n = 0; n < S; ++n) {
          lo[static_cast<std::size_t>(n)] = problem.lower(s, a, n);
          hi[static_cast<std::size_t>(n)] = problem.upper(s, a, n);
        }
        lo_.push_back(std::move(lo));
        hi_.push_back(std::move(hi));
      }
    (void)H;
    policy_lo_.assign(static_cast<std::size_t>(A), 0.0);
    policy_hi_.assign(static_cast<std::size_t>(A), 1.0);
  }

  const std::vector<double>& lower(int s, int a) const {
    return lo_[static_cast<std::size_t>(s) * problem_.num_actions() + a];
  }
  const std::vector<double>& upper(int s, int a) const {
    return hi_[static_cast<std::size_t>(s) * problem_.num_actions() + a];
  }

  FiniteHorizonPolicy random_point(Rng& rng) const {
    const int S = problem_.num_states(), A = problem_.num_actions(), H = problem_.horizon();
    FiniteHorizonPolicy x{StepPolicy(S, A, H), StepTransition(S, A, H)};
    const std::vector<double> zero(static_cast<std::size_t>(A), 0.0), one(static_cast<std::size_t>(A), 1.0);
    for (int s = 0; s < S; ++s)
      for (int h = 0; h < H; ++h) {
        random_row(x.policy.row(s, h), zero, one, rng);
        for (int a = 0; a < A; ++a) random_row(x.transition.row(s, a, h), lower(s, a), upper(s, a), rng);
      }
    return x;
  }

  void repair(FiniteHorizonPolicy& x) const {
    const int S = problem_.num_states(), A = problem_.num_actions(), H = problem_.horizon();
    const std::vector<double> zero(static_cast<std::size_t>(A), 0.0), one(static_cast<std::size_t>(A), 1.0);
    for (int s = 0; s < S; ++s)
      for (int h = 0; h < H; ++h) {
        repair_row(x.policy.row(s, h), zero, one);
        for (int a = 0; a < A; ++a) repair_row(x.transition.row(s, a, h), lower(s, a), upper(s, a));
      }
  }

  /// Feasible point with the largest reward seen by any evaluation.
  struct Incumbent {
    std::optional<FiniteHorizonPolicy> point;
    double reward = -std::numeric_limits<double>::infinity();
  };

  /// Pattern search on merit(eval). Each sweep tries pairwise mass moves
  /// inside every row, then random directions that move all rows at once,
  /// then an extrapolation along the sweep's net displacement. The step
  /// doubles (up to its initial value) after an improving sweep and halves
  /// after a failed one.
  template <class Merit>
  void descend(FiniteHorizonPolicy& x, Merit merit, double step, double min_step, Incumbent& best) {
    const double max_step = step;
    double current = merit(observe(x, best));
    const auto better = [&](double value) { return value < current - 1e-15 * (1.0 + std::abs(current)); };
    std::vector<Row> rows = rows_of(x);

    auto try_row = [&](const Row& r) {
      bool improved = false;
      const std::size_t n = r.values.size();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j) continue;
          const double amount = std::min({step, (*r.hi)[i] - r.values[i], r.values[j] - (*r.lo)[j]});
          if (amount <= 0.0) continue;
          const double old_i = r.values[i], old_j = r.values[j];
          r.values[i] += amount;
          r.values[j] -= amount;
          const double value = merit(observe(x, best));
          if (better(value)) {
            current = value;
            improved = true;
          } else {
            r.values[i] = old_i;
            r.values[j] = old_j;
          }
        }
      return improved;
    };

    // x += t d for the largest t <= 1 keeping every row in its box; false if t is negligible.
    auto shift = [&](const std::vector<double>& d, double sign, std::vector<double>& saved) {
      double t = 1.0;
      std::size_t k = 0;
      for (const Row& r : rows)
        for (std::size_t i = 0; i < r.values.size(); ++i, ++k) {
          const double di = sign * d[k];
          if (di > 0.0) t = std::min(t, ((*r.hi)[i] - r.values[i]) / di);
          if (di < 0.0) t = std::min(t, ((*r.lo)[i] - r.values[i]) / di);
        }
      if (t * step < 0.5 * min_step) return false;
      saved.clear();
      k = 0;
      for (const Row& r : rows)
        for (std::size_t i = 0; i < r.values.size(); ++i, ++k) {
          saved.push_back(r.values[i]);
          r.values[i] = std::clamp(r.values[i] + t * sign * d[k], (*r.lo)[i], (*r.hi)[i]);
        }
      return true;
    };
    auto restore = [&](const std::vector<double>& saved) {
      std::size_t k = 0;
      for (const Row& r : rows)
        for (double& v : r.values) v = saved[k++];
    };
    auto try_direction = [&](const std::vector<double>& d) {
      for (double sign : {1.0, -1.0}) {
        if (!shift(d, sign, saved_)) continue;
        const double value = merit(observe(x, best));
        if (better(value)) {
          current = value;
          return true;
        }
        restore(saved_);
      }
      return false;
    };

    while (step >= min_step) {
      snapshot(rows, base_);
      bool improved = false;
      for (const Row& r : rows) improved |= try_row(r);
      for (std::size_t k = 0; k < rows.size(); ++k) {
        random_direction(rows, step, direction_);
        improved |= try_direction(direction_);
      }
      if (improved) {
        std::size_t k = 0;
        direction_.clear();
        for (const Row& r : rows)
          for (double v : r.values) direction_.push_back(v - base_[k++]);
        try_direction(direction_);
      }
      step = improved ? std::min(max_step, 2.0 * step) : 0.5 * step;
    }
  }

  SpanProblem::Eval observe(const FiniteHorizonPolicy& x, Incumbent& best) {
    const SpanProblem::Eval e = problem_.evaluate(x);
    if (e.feasible && e.reward > best.reward) {
      best.reward = e.reward;
      best.point = x;
    }
    return e;
  }

 private:
  struct Row {
    std::span<double> values;
    const std::vector<double>* lo;
    const std::vector<double>* hi;
  };

  std::vector<Row> rows_of(FiniteHorizonPolicy& x) const {
    const int S = problem_.num_states(), A = problem_.num_actions(), H = problem_.horizon();
    std::vector<Row> rows;
    for (int h = 0; h < H; ++h)
      for (int s = 0; s < S; ++s) {
        rows.push_back({x.policy.row(s, h), &policy_lo_, &policy_hi_});
        for (int a = 0; a < A; ++a) rows.push_back({x.transition.row(s, a, h), &lower(s, a), &upper(s, a)});
      }
    return rows;
  }

  static void snapshot(const std::vector<Row>& rows, std::vector<double>& out) {
    out.clear();
    for (const Row& r : rows) out.insert(out.end(), r.values.begin(), r.values.end());
  }

  /// Zero-sum within every row, largest entry `step` in magnitude.
  void random_direction(const std::vector<Row>& rows, double step, std::vector<double>& d) {
    d.clear();
    for (const Row& r : rows) {
      const std::size_t first = d.size();
      double mean = 0.0;
      for (std::size_t i = 0; i < r.values.size(); ++i) {
        d.push_back(2.0 * rng_.uniform() - 1.0);
        mean += d.back();
      }
      mean /= static_cast<double>(r.values.size());
      for (std::size_t i = first; i < d.size(); ++i) d[i] -= mean;
    }
    double largest = 0.0;
    for (double v : d) largest = std::max(largest, std::abs(v));
    if (largest > 0.0)
      for (double& v : d) v *= step / largest;
  }

  SpanProblem& problem_;
  double min_step_;
  Rng rng_;
  std::vector<std::vector<double>> lo_;
  std::vector<std::vector<double>> hi_;
  std::vector<double> policy_lo_, policy_hi_;
  std::vector<double> base_, direction_, saved_;
};

}  // namespace detail

/// Cost-constrained occupancy program with the extra requirement that the
/// reward and cost value functions have span at most twice the given budgets
/// at every step. Non-convex: solved by penalised local search seeded at the
/// unconstrained-span optimum plus random restarts, then polished among
/// feasible points. Throws NoFeasiblePoint when nothing feasible is found.
inline Opt2Result solve_opt2(const BernsteinSet& conf, int start, int H, double tau, SpanBudget budget,
                             const Matrix& r, const Matrix& c, const Opt2Options& options = {}) {
  require(budget.sp_r_star >= 0.0 && budget.sp_c_star >= 0.0, ErrorCode::kInvalidArgument,
          "span budgets must be nonnegative");
  const Opt1Result base = solve_opt1(conf, start, H, tau, budget.sp_c_star, r, c, options.backend);
  const double cost_budget = H * tau + budget.sp_c_star;
  detail::SpanProblem problem(conf, start, H, cost_budget, budget, r, c);
  detail::SpanSearch search(problem, options.min_step, Rng(options.seed).fork(0x64697273));
  detail::SpanSearch::Incumbent best;

  FiniteHorizonPolicy seed = extract_policy_transition(base.occupancy);
  search.repair(seed);
  const auto seed_eval = search.observe(seed, best);
  if (seed_eval.feasible) {
    Opt2Result out{base.occupancy, seed, base.objective, base.cost, seed_eval.span_r, seed_eval.span_c, true};
    return out;
  }

  const double certificate = base.objective - 1e-9 * std::max(1.0, std::abs(base.objective));
  Rng rng(options.seed);
  for (int attempt = 0; attempt <= options.restarts && best.reward < certificate; ++attempt) {
    FiniteHorizonPolicy x = attempt == 0 ? seed : search.random_point(rng);
    for (double rho = options.rho_start; rho <= options.rho_max * (1.0 + 1e-12); rho *= options.rho_growth) {
      const bool last = rho * options.rho_growth > options.rho_max * (1.0 + 1e-12);
      search.descend(
          x, [rho](const detail::SpanProblem::Eval& e) { return -e.reward + rho * e.violation; },
          options.initial_step, last ? options.min_step : options.stage_min_step, best);
    }
    // step back inside: violation first, then reward under a barrier
    search.descend(
        x,
        [H](const detail::SpanProblem::Eval& e) {
          return e.feasible ? -e.reward : H + 1.0 + std::sqrt(e.violation);
        },
        options.restore_step, options.min_step, best);
  }
  require(best.point.has_value(), ErrorCode::kNoFeasiblePoint,
          "no span-feasible point found in " + std::to_string(options.restarts + 1) + " starts");

  FiniteHorizonPolicy x = *best.point;
  search.descend(
      x,
      [](const detail::SpanProblem::Eval& e) {
        return e.feasible ? -e.reward : std::numeric_limits<double>::infinity();
      },
      options.initial_step * 0.2, options.min_step, best);
  x = *best.point;

  Opt2Result out;
  out.witness = x;
  out.occupancy = occupancy_of(x.policy, x.transition, start);
  out.objective = out.occupancy.value(r);
  out.cost = out.occupancy.value(c);
  out.span_r_max = fh_values(x.policy, x.transition, r).max_span();
  out.span_c_max = fh_values(x.policy, x.transition, c).max_span();
  require(out.span_r_max <= 2.0 * budget.sp_r_star + Tolerances::kSpanFeasibility &&
              out.span_c_max <= 2.0 * budget.sp_c_star + Tolerances::kSpanFeasibility &&
              out.cost <= cost_budget + Tolerances::kLpFeasibility &&
              polytope_violation(out.occupancy) <= Tolerances::kPolytope &&
              membership_violation(out.occupancy, conf) <= Tolerances::kPolytope,
          ErrorCode::kNoFeasiblePoint, "search result failed verification");
  return out;
}

}  // namespace cmdp
