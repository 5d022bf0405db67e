#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cmdp/error.hpp"
#include "cmdp/tolerances.hpp"

namespace cmdp {

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

/// maximize c.x  s.t.  A_eq x = b_eq,  A_le x <= b_le,  lower <= x <= upper.
struct LinearProgram {
  using Terms = std::vector<std::pair<int, double>>;
  struct Row {
    Terms terms;
    double rhs = 0.0;
  };

  explicit LinearProgram(int num_vars = 0)
      : objective(num_vars, 0.0),
        lower(num_vars, 0.0),
        upper(num_vars, std::numeric_limits<double>::infinity()) {}

  int num_vars() const { return static_cast<int>(objective.size()); }
  void add_equality(Terms terms, double rhs) { equalities.push_back({std::move(terms), rhs}); }
  void add_inequality(Terms terms, double rhs) { inequalities.push_back({std::move(terms), rhs}); }

  std::vector<double> objective;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<Row> equalities;
  std::vector<Row> inequalities;
};

struct LpSolution {
  LpStatus status = LpStatus::kInfeasible;
  std::vector<double> values;
  double objective_value = 0.0;
  int iterations = 0;
  /// Largest constraint or bound violation of `values` (Optimal only).
  double max_residual = 0.0;
};

namespace detail {

inline double row_activity(const LinearProgram::Row& row, const std::vector<double>& x) {
  double sum = 0.0;
  for (const auto& [j, coef] : row.terms) sum += coef * x[j];
  return sum;
}

/// Dense two-phase tableau simplex. Dantzig pricing, switching to Bland's rule
/// after 10 (m + n) pivots; ties always go to the smallest index.
class Simplex {
 public:
  explicit Simplex(const LinearProgram& lp) : lp_(lp) { build(); }

  LpSolution solve() {
    LpSolution out;
    // Phase 1: maximize -(sum of artificials).
    std::vector<double> phase1(cols_, 0.0);
    for (int j = first_artificial_; j < cols_; ++j) phase1[j] = -1.0;
    price(phase1);
    if (!iterate(/*phase_one=*/true)) fail(ErrorCode::kNumericalFailure, "phase one did not terminate");
    const double infeasibility = obj_[cols_];
    if (infeasibility > 1e-9 * std::max(1.0, rhs_scale_)) {
      out.status = LpStatus::kInfeasible;
      out.iterations = iterations_;
      return out;
    }
    drive_out_artificials();

    std::vector<double> phase2(cols_, 0.0);
    for (int j = 0; j < n_; ++j) phase2[j] = lp_.objective[j];
    price(phase2);
    blocked_from_ = first_artificial_;
    const bool bounded = iterate(/*phase_one=*/false);
    out.iterations = iterations_;
    if (!bounded) {
      out.status = LpStatus::kUnbounded;
      return out;
    }
    out.status = LpStatus::kOptimal;
    out.values = extract();
    out.objective_value = 0.0;
    for (int j = 0; j < n_; ++j) out.objective_value += lp_.objective[j] * out.values[j];
    out.max_residual = residual(out.values);
    if (out.max_residual > Tolerances::kLpFeasibility)
      fail(ErrorCode::kNumericalFailure, "solution residual " + std::to_string(out.max_residual));
    return out;
  }

 private:
  enum class Kind { kLe, kEq };
  struct StdRow {
    std::vector<double> coef;  // over shifted structural variables
    double rhs;
    Kind kind;
  };

  void build() {
    n_ = lp_.num_vars();
    for (int j = 0; j < n_; ++j) {
      require(std::isfinite(lp_.lower[j]), ErrorCode::kInvalidArgument, "lower bounds must be finite");
      require(lp_.lower[j] <= lp_.upper[j], ErrorCode::kInvalidArgument, "lower bound exceeds upper bound");
    }
    auto dense = [&](const LinearProgram::Row& row, Kind kind) {
      StdRow r{std::vector<double>(n_, 0.0), row.rhs, kind};
      for (const auto& [j, coef] : row.terms) {
        require(j >= 0 && j < n_, ErrorCode::kInvalidArgument, "constraint references an unknown variable");
        r.coef[j] += coef;
        r.rhs -= coef * lp_.lower[j];
      }
      return r;
    };
    for (const auto& row : lp_.equalities) rows_.push_back(dense(row, Kind::kEq));
    for (const auto& row : lp_.inequalities) rows_.push_back(dense(row, Kind::kLe));
    for (int j = 0; j < n_; ++j)
      if (std::isfinite(lp_.upper[j])) {
        StdRow r{std::vector<double>(n_, 0.0), lp_.upper[j] - lp_.lower[j], Kind::kLe};
        r.coef[j] = 1.0;
        rows_.push_back(std::move(r));
      }
    m_ = static_cast<int>(rows_.size());

    int slacks = 0;
    int artificials = 0;
    for (const auto& r : rows_) {
      if (r.kind == Kind::kLe) ++slacks;
      if (r.kind == Kind::kEq || r.rhs < 0.0) ++artificials;
    }
    first_artificial_ = n_ + slacks;
    cols_ = first_artificial_ + artificials;
    blocked_from_ = cols_;
    width_ = cols_ + 1;
    tab_.assign(static_cast<std::size_t>(m_) * width_, 0.0);
    basis_.assign(m_, -1);
    rhs_scale_ = 0.0;

    int slack = n_;
    int art = first_artificial_;
    for (int i = 0; i < m_; ++i) {
      const StdRow& r = rows_[i];
      const double sign = r.rhs < 0.0 ? -1.0 : 1.0;
      for (int j = 0; j < n_; ++j) at(i, j) = sign * r.coef[j];
      at(i, cols_) = sign * r.rhs;
      rhs_scale_ = std::max(rhs_scale_, std::abs(r.rhs));
      if (r.kind == Kind::kLe) {
        slack_of_row_.push_back(slack);
        at(i, slack) = sign;
        if (sign > 0.0) basis_[i] = slack;
        ++slack;
      } else {
        slack_of_row_.push_back(-1);
      }
      if (basis_[i] < 0) {
        at(i, art) = 1.0;
        basis_[i] = art++;
      }
    }
    active_.assign(m_, true);
  }

  double& at(int i, int j) { return tab_[static_cast<std::size_t>(i) * width_ + j]; }
  double at(int i, int j) const { return tab_[static_cast<std::size_t>(i) * width_ + j]; }

  void price(const std::vector<double>& cost) {
    cost_ = cost;
    obj_.assign(width_, 0.0);
    for (int j = 0; j < cols_; ++j) obj_[j] = cost[j];
    for (int i = 0; i < m_; ++i) {
      if (!active_[i]) continue;
      const double cb = cost[basis_[i]];
      if (cb == 0.0) continue;
      for (int j = 0; j <= cols_; ++j) obj_[j] -= cb * at(i, j);
    }
  }

  void pivot(int r, int c) {
    const double p = at(r, c);
    for (int j = 0; j <= cols_; ++j) at(r, j) /= p;
    at(r, c) = 1.0;
    for (int i = 0; i < m_; ++i) {
      if (i == r || !active_[i]) continue;
      const double f = at(i, c);
      if (f == 0.0) continue;
      for (int j = 0; j <= cols_; ++j) at(i, j) -= f * at(r, j);
      at(i, c) = 0.0;
    }
    const double f = obj_[c];
    if (f != 0.0) {
      for (int j = 0; j <= cols_; ++j) obj_[j] -= f * at(r, j);
      obj_[c] = 0.0;
    }
    basis_[r] = c;
    ++iterations_;
  }

  /// Returns false if unbounded.
  bool iterate(bool phase_one) {
    const long bland_after = 10L * (m_ + n_);
    const long cap = 50L * (m_ + cols_) + 1000;
    long local = 0;
    const int limit = phase_one ? cols_ : blocked_from_;
    for (;;) {
      if (local > cap) fail(ErrorCode::kNumericalFailure, "simplex iteration cap reached");
      const bool bland = local >= bland_after;
      int enter = -1;
      double best = kReducedCostTol;
      for (int j = 0; j < limit; ++j) {
        if (obj_[j] > best) {
          enter = j;
          if (bland) break;
          best = obj_[j];
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m_; ++i) {
        if (!active_[i]) continue;
        const double a = at(i, enter);
        if (a <= kPivotTol) continue;
        const double ratio = std::max(0.0, at(i, cols_)) / a;
        const double slack = 1e-12 * std::max(1.0, best_ratio);
        if (leave < 0 || ratio < best_ratio - slack) {
          leave = i;
          best_ratio = ratio;
        } else if (ratio <= best_ratio + slack && basis_[i] < basis_[leave]) {
          leave = i;
          best_ratio = std::min(best_ratio, ratio);
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
      ++local;
    }
  }

  void drive_out_artificials() {
    for (int i = 0; i < m_; ++i) {
      if (!active_[i] || basis_[i] < first_artificial_) continue;
      int best = -1;
      double mag = 1e-9;
      for (int j = 0; j < first_artificial_; ++j)
        if (std::abs(at(i, j)) > mag) {
          mag = std::abs(at(i, j));
          best = j;
        }
      if (best >= 0)
        pivot(i, best);
      else
        active_[i] = false;  // redundant equality
    }
  }

  std::vector<double> extract() const {
    // Re-solve B x_B = b on the original standard-form data for accuracy.
    std::vector<int> rows;
    for (int i = 0; i < m_; ++i)
      if (active_[i]) rows.push_back(i);
    const int k = static_cast<int>(rows.size());
    Eigen::MatrixXd basis_matrix = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd b(k);
    for (int r = 0; r < k; ++r) {
      const StdRow& row = rows_[rows[r]];
      b[r] = row.rhs;
      for (int c = 0; c < k; ++c) {
        const int col = basis_[rows[c]];
        if (col < n_)
          basis_matrix(r, c) = row.coef[col];
        else if (col < first_artificial_)
          basis_matrix(r, c) = slack_of_row_[rows[r]] == col ? 1.0 : 0.0;
      }
    }
    std::vector<double> shifted(n_, 0.0);
    for (int r = 0; r < k; ++r)
      if (basis_[rows[r]] < n_) shifted[basis_[rows[r]]] = std::max(0.0, at(rows[r], cols_));
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(basis_matrix);
    if (k > 0 && lu.isInvertible()) {
      const Eigen::VectorXd xb = lu.solve(b);
      if ((basis_matrix * xb - b).cwiseAbs().maxCoeff() <= 1e-11 * std::max(1.0, rhs_scale_) &&
          xb.minCoeff() >= -1e-9) {
        for (int r = 0; r < k; ++r)
          if (basis_[rows[r]] < n_) shifted[basis_[rows[r]]] = std::max(0.0, xb[r]);
      }
    }
    std::vector<double> x(n_);
    for (int j = 0; j < n_; ++j) x[j] = lp_.lower[j] + shifted[j];
    return x;
  }

  double residual(const std::vector<double>& x) const {
    double worst = 0.0;
    for (const auto& row : lp_.equalities) worst = std::max(worst, std::abs(row_activity(row, x) - row.rhs));
    for (const auto& row : lp_.inequalities) worst = std::max(worst, row_activity(row, x) - row.rhs);
    for (int j = 0; j < n_; ++j) {
      worst = std::max(worst, lp_.lower[j] - x[j]);
      if (std::isfinite(lp_.upper[j])) worst = std::max(worst, x[j] - lp_.upper[j]);
    }
    return worst;
  }

  static constexpr double kPivotTol = 1e-9;
  static constexpr double kReducedCostTol = 1e-10;

  const LinearProgram& lp_;
  std::vector<StdRow> rows_;
  std::vector<int> slack_of_row_;
  std::vector<double> tab_;
  std::vector<double> obj_;
  std::vector<double> cost_;
  std::vector<int> basis_;
  std::vector<bool> active_;
  int n_ = 0;
  int m_ = 0;
  int cols_ = 0;
  int width_ = 0;
  int first_artificial_ = 0;
  int blocked_from_ = 0;
  int iterations_ = 0;
  double rhs_scale_ = 0.0;
};

}  // namespace detail

/// Optimal basic solution, or Infeasible / Unbounded status. Throws
/// NumericalFailure if pivoting does not terminate or the answer does not
/// re-substitute within tolerance. Deterministic for identical input.
inline LpSolution solve_lp(const LinearProgram& lp) {
  for (double c : lp.objective) require(std::isfinite(c), ErrorCode::kInvalidArgument, "objective must be finite");
  return detail::Simplex(lp).solve();
}

}  // namespace cmdp
