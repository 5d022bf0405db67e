#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "test_support.hpp"

using namespace cmdp;
using namespace cmdp::testing;

namespace {

VisitCounts sample_counts(const CmdpModel& m, int steps, std::uint64_t seed) {
  const Trajectory traj = sample_trajectory(m, StationaryPolicy::uniform(m.num_states, m.num_actions), 0, steps, seed);
  VisitCounts counts(m.num_states, m.num_actions);
  for (std::size_t t = 0; t + 1 < traj.steps.size(); ++t)
    counts.add(traj.steps[t].state, traj.steps[t].action, traj.steps[t + 1].state);
  return counts;
}

/// Reward and cost of every deterministic step policy under a fixed transition.
std::vector<std::pair<double, double>> deterministic_values(const CmdpModel& m, int H, int start) {
  const int S = m.num_states, A = m.num_actions;
  const StepTransition P = StepTransition::homogeneous(m.transition, H);
  std::vector<std::pair<double, double>> out;
  std::vector<int> choice(static_cast<std::size_t>(S * H), 0);
  while (true) {
    StepPolicy pi(S, A, H);
    for (int s = 0; s < S; ++s)
      for (int h = 0; h < H; ++h) {
        auto row = pi.row(s, h);
        std::fill(row.begin(), row.end(), 0.0);
        row[static_cast<std::size_t>(choice[static_cast<std::size_t>(s * H + h)])] = 1.0;
      }
    const FiniteHorizonOccupancy occ = occupancy_of(pi, P, start);
    out.emplace_back(occ.value(m.reward), occ.value(m.cost));
    std::size_t i = 0;
    while (i < choice.size() && ++choice[i] == A) choice[i++] = 0;
    if (i == choice.size()) break;
  }
  return out;
}

/// Best reward over mixtures of two deterministic policies meeting the budget.
double mixture_oracle(const std::vector<std::pair<double, double>>& v, double budget) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& [r1, c1] : v)
    for (const auto& [r2, c2] : v) {
      if (c1 <= budget) best = std::max(best, r1);
      if (c1 <= budget && c2 > budget) {
        const double a = (budget - c2) / (c1 - c2);
        best = std::max(best, a * r1 + (1 - a) * r2);
      }
    }
  return best;
}

StepPolicy random_step_policy(int S, int A, int H, Rng& rng) {
  StepPolicy pi(S, A, H);
  for (int s = 0; s < S; ++s)
    for (int h = 0; h < H; ++h) {
      auto row = pi.row(s, h);
      double total = 0.0;
      for (double& v : row) total += (v = 0.05 + rng.uniform());
      for (double& v : row) v /= total;
    }
  return pi;
}

StepTransition random_step_transition(int S, int A, int H, Rng& rng) {
  StepTransition P(S, A, H);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      for (int h = 0; h < H; ++h) {
        auto row = P.row(s, a, h);
        double total = 0.0;
        for (double& v : row) total += (v = 0.05 + rng.uniform());
        for (double& v : row) v /= total;
      }
  return P;
}

/// Random distribution inside [lo, hi] coordinate boxes, by water-filling random weights.
bool random_box_row(std::span<double> row, const std::vector<double>& lo, const std::vector<double>& hi, Rng& rng) {
  double rest = 1.0;
  for (std::size_t i = 0; i < row.size(); ++i) rest -= (row[i] = lo[i]);
  if (rest < 0) return false;
  for (int pass = 0; pass < 50 && rest > 1e-15; ++pass) {
    std::vector<double> w(row.size());
    double total = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) total += (w[i] = row[i] < hi[i] ? rng.uniform() : 0.0);
    if (total == 0.0) return false;
    double used = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
      const double add = std::min(hi[i] - row[i], rest * w[i] / total);
      row[i] += add;
      used += add;
    }
    rest -= used;
  }
  return rest <= 1e-12;
}

/// Trajectory-tree expectation of the sum of d over H steps.
double tree_value(const StepPolicy& pi, const StepTransition& P, const Matrix& d, int s, int h) {
  if (h == P.horizon()) return 0.0;
  double total = 0.0;
  for (int a = 0; a < P.num_actions(); ++a)
    for (int n = 0; n < P.num_states(); ++n)
      total += pi(s, a, h) * P(s, a, h, n) * (d(s, a) + tree_value(pi, P, d, n, h + 1));
  return total;
}

}  // namespace

TEST(Bernstein, WidthFormula) {
  VisitCounts counts(2, 1);
  counts.add(0, 0, 0, 3);
  counts.add(0, 0, 1, 1);
  const BernsteinSet b = bernstein_confidence(counts, 2, 1, 100, 0.1);
  const double iota = std::log(2.0 * 2 * 1 * 100 / 0.1);
  EXPECT_NEAR(b.alpha()(0, 0), iota / 4.0, 1e-15);
  EXPECT_NEAR(b.half_width(0, 0, 0), 4.0 * std::sqrt(0.75 * iota / 4.0) + 28.0 * iota / 4.0, 1e-12);
  EXPECT_NEAR(b.half_width(1, 0, 1), 28.0 * iota, 1e-12);
  EXPECT_EQ(b.lower(0, 0, 1), 0.0);
  EXPECT_EQ(b.upper(0, 0, 0), 1.0);
}

TEST(Bernstein, ExactSetContainsOnlyItsCenter) {
  const CmdpModel m = load_model(data_path("models/four_state_ergodic.json"));
  const BernsteinSet b = BernsteinSet::exact(m.transition);
  EXPECT_TRUE(b.contains(m.transition));
  TransitionTensor other = m.transition;
  other(0, 0, 0) += 1e-6;
  EXPECT_FALSE(b.contains(other));
}

TEST(Bernstein, CoversTrueTransition) {
  const CmdpModel m = load_model(data_path("models/four_state_ergodic.json"));
  int misses = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const VisitCounts counts = sample_counts(m, 3000, seed);
    if (!bernstein_confidence(counts, 4, 2, 3000, 0.1).contains(m.transition)) ++misses;
  }
  EXPECT_LE(misses, 20);
}

TEST(Opt1, SingleStateExample) {
  const CmdpModel m = make_model({{1.0, 0.0}}, {{1.0, 0.0}}, 0.5, {{{1.0}, {1.0}}});
  for (Opt1Backend b : {Opt1Backend::kSimplex, Opt1Backend::kLagrangian}) {
    const Opt1Result r = solve_opt1(BernsteinSet::exact(m.transition), 0, 4, 0.5, 0.0, m.reward, m.cost, b);
    EXPECT_NEAR(r.objective, 2.0, 1e-10);
    EXPECT_NEAR(r.cost, 2.0, 1e-10);
    const Opt1Result loose = solve_opt1(BernsteinSet::exact(m.transition), 0, 4, 0.5, 5.0, m.reward, m.cost, b);
    EXPECT_NEAR(loose.objective, 4.0, 1e-10);
  }
}

TEST(Opt1, InfeasibleBudget) {
  const CmdpModel m = make_model({{1.0, 0.0}}, {{1.0, 0.5}}, 0.4, {{{1.0}, {1.0}}});
  for (Opt1Backend b : {Opt1Backend::kSimplex, Opt1Backend::kLagrangian}) {
    try {
      solve_opt1(BernsteinSet::exact(m.transition), 0, 3, 0.4, 0.0, m.reward, m.cost, b);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInfeasible);
    }
  }
}

TEST(Opt1, ExactSetMatchesPolicyEnumeration) {
  Rng rng(61);
  for (int trial = 0; trial < 40; ++trial) {
    const CmdpModel m = generate_random_ergodic(2, 2, rng.next(), 0.3);
    const int H = 1 + static_cast<int>(rng.below(3));
    const int start = static_cast<int>(rng.below(2));
    const auto values = deterministic_values(m, H, start);
    double cmin = 1e9, cmax = -1e9;
    for (const auto& [r, c] : values) {
      cmin = std::min(cmin, c);
      cmax = std::max(cmax, c);
    }
    const double budget = cmin + rng.uniform() * (cmax - cmin);
    const double tau = budget / H;
    const double oracle = mixture_oracle(values, budget);
    for (Opt1Backend b : {Opt1Backend::kSimplex, Opt1Backend::kLagrangian}) {
      const Opt1Result r = solve_opt1(BernsteinSet::exact(m.transition), start, H, tau, 0.0, m.reward, m.cost, b);
      EXPECT_NEAR(r.objective, oracle, 1e-8) << "trial " << trial;
      EXPECT_LE(r.cost, budget + 1e-8);
    }
  }
}

TEST(Opt1, BackendsAgreeAndAreSound) {
  Rng rng(62);
  for (int trial = 0; trial < 40; ++trial) {
    const CmdpModel m = random_model(rng, 4, 3);
    const int S = m.num_states, A = m.num_actions;
    const VisitCounts counts = sample_counts(m, 50 + static_cast<int>(rng.below(3000)), rng.next());
    const BernsteinSet conf = bernstein_confidence(counts, S, A, 5000, 0.1);
    const int H = 1 + static_cast<int>(rng.below(6));
    const int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(S)));
    const double tau = m.threshold;
    const double sp_c = 0.2 * rng.uniform();
    bool simplex_ok = true, lagrange_ok = true;
    Opt1Result a, b;
    try {
      a = solve_opt1(conf, start, H, tau, sp_c, m.reward, m.cost, Opt1Backend::kSimplex);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInfeasible);
      simplex_ok = false;
    }
    try {
      b = solve_opt1(conf, start, H, tau, sp_c, m.reward, m.cost, Opt1Backend::kLagrangian);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInfeasible);
      lagrange_ok = false;
    }
    ASSERT_EQ(simplex_ok, lagrange_ok) << "trial " << trial;
    if (!simplex_ok) continue;
    EXPECT_NEAR(a.objective, b.objective, 1e-8 * std::max(1.0, std::abs(a.objective))) << "trial " << trial;
    for (const Opt1Result* r : {&a, &b}) {
      EXPECT_LE(r->cost, H * tau + sp_c + Tolerances::kLpFeasibility);
      EXPECT_LE(polytope_violation(r->occupancy), Tolerances::kPolytope);
      EXPECT_LE(membership_violation(r->occupancy, conf), Tolerances::kPolytope);
      const FiniteHorizonPolicy x = extract_policy_transition(r->occupancy);
      const FiniteHorizonOccupancy again = occupancy_of(x.policy, x.transition, start);
      EXPECT_NEAR(again.value(m.reward), r->objective, 1e-7);
    }
  }
}

TEST(Extract, Example) {
  FiniteHorizonOccupancy occ{StepTensor(2, 2, 1), 0};
  occ.nu.row(0, 0, 0)[0] = 0.25;
  occ.nu.row(0, 0, 0)[1] = 0.5;
  occ.nu.row(0, 1, 0)[1] = 0.25;
  const FiniteHorizonPolicy x = extract_policy_transition(occ);
  EXPECT_DOUBLE_EQ(x.policy(0, 0, 0), 0.75);
  EXPECT_DOUBLE_EQ(x.policy(0, 1, 0), 0.25);
  EXPECT_DOUBLE_EQ(x.policy(1, 0, 0), 0.5);
  EXPECT_NEAR(x.transition(0, 0, 0, 0), 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(x.transition(0, 1, 0, 1), 1.0);
  EXPECT_DOUBLE_EQ(x.transition(1, 1, 0, 0), 0.5);
}

TEST(Extract, RoundTrip) {
  Rng rng(63);
  for (int trial = 0; trial < 50; ++trial) {
    const int S = 1 + static_cast<int>(rng.below(4)), A = 1 + static_cast<int>(rng.below(3));
    const int H = 1 + static_cast<int>(rng.below(5));
    const StepPolicy pi = random_step_policy(S, A, H, rng);
    const StepTransition P = random_step_transition(S, A, H, rng);
    const int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(S)));
    const FiniteHorizonOccupancy occ = occupancy_of(pi, P, start);
    EXPECT_LE(polytope_violation(occ), 1e-12);
    const FiniteHorizonPolicy x = extract_policy_transition(occ);
    const FiniteHorizonOccupancy again = occupancy_of(x.policy, x.transition, start);
    for (std::size_t i = 0; i < occ.nu.data().size(); ++i)
      EXPECT_NEAR(occ.nu.data()[i], again.nu.data()[i], Tolerances::kRoundTrip);
  }
}

TEST(FhValues, ConstantUtility) {
  Rng rng(64);
  const StepPolicy pi = random_step_policy(3, 2, 5, rng);
  const StepTransition P = random_step_transition(3, 2, 5, rng);
  const FhValueTable t = fh_values(pi, P, Matrix::Constant(3, 2, 0.5));
  for (int h = 0; h <= 5; ++h) EXPECT_NEAR(t.V[static_cast<std::size_t>(h)](1), 0.5 * (5 - h), 1e-14);
  EXPECT_NEAR(t.max_span(), 0.0, 1e-14);
}

TEST(FhValues, MatchTrajectoryTree) {
  Rng rng(65);
  for (int trial = 0; trial < 20; ++trial) {
    const int S = 1 + static_cast<int>(rng.below(3)), A = 1 + static_cast<int>(rng.below(3));
    const int H = 1 + static_cast<int>(rng.below(4));
    const StepPolicy pi = random_step_policy(S, A, H, rng);
    const StepTransition P = random_step_transition(S, A, H, rng);
    const Matrix d = random_matrix(S, A, rng);
    const FhValueTable t = fh_values(pi, P, d);
    for (int s = 0; s < S; ++s) {
      EXPECT_NEAR(t.V[0](s), tree_value(pi, P, d, s, 0), 1e-12);
      EXPECT_NEAR(t.V[0](s), occupancy_of(pi, P, s).value(d), 1e-12);
    }
  }
}

TEST(FhValues, StationaryValueNearHorizonTimesGain) {
  Rng rng(66);
  for (int trial = 0; trial < 50; ++trial) {
    const CmdpModel m = random_model(rng, 5, 3);
    const StationaryPolicy pi = random_policy(m.num_states, m.num_actions, rng);
    const Matrix d = random_matrix(m.num_states, m.num_actions, rng);
    const BiasSolution bias = solve_bias(pi, m, d);
    const int H = 1 + static_cast<int>(rng.below(40));
    const FhValueTable t = fh_values(StepPolicy::stationary(pi, H), StepTransition::homogeneous(m.transition, H), d);
    for (int s = 0; s < m.num_states; ++s)
      EXPECT_LE(std::abs(t.V[0](s) - H * bias.gain), span(bias.bias_v) + 1e-9);
    EXPECT_LE(t.max_span(), 2.0 * span(bias.bias_v) + 1e-9);
  }
}

TEST(Opt1, OptimalStationaryPolicyIsFeasible) {
  Rng rng(67);
  for (int trial = 0; trial < 30; ++trial) {
    const CmdpModel m = random_model(rng, 4, 3);
    const ConstrainedOptimum opt = optimal_constrained(m, 0.0);
    const double sp_r = span(solve_bias(opt.policy, m, m.reward).bias_v);
    const double sp_c = span(solve_bias(opt.policy, m, m.cost).bias_v);
    const int H = 1 + static_cast<int>(rng.below(10));
    for (int start = 0; start < m.num_states; ++start) {
      const FiniteHorizonOccupancy occ = occupancy_of(StepPolicy::stationary(opt.policy, H),
                                                      StepTransition::homogeneous(m.transition, H), start);
      EXPECT_LE(occ.value(m.cost), H * m.threshold + sp_c + 1e-9);
      const Opt1Result r = solve_opt1(BernsteinSet::exact(m.transition), start, H, m.threshold, sp_c, m.reward,
                                      m.cost, Opt1Backend::kLagrangian);
      EXPECT_GE(r.objective, H * opt.j_star - sp_r - 1e-8);
    }
  }
}

TEST(Opt2, VacuousSpanBudgetReturnsOpt1) {
  const CmdpModel m = load_model(data_path("models/two_state_constrained.json"));
  const BernsteinSet conf = bernstein_confidence(sample_counts(m, 400, 3), 2, 2, 1000, 0.1);
  const Opt1Result base = solve_opt1(conf, 0, 4, m.threshold, 4.0, m.reward, m.cost);
  const Opt2Result r = solve_opt2(conf, 0, 4, m.threshold, {4.0, 4.0}, m.reward, m.cost);
  EXPECT_TRUE(r.from_opt1);
  EXPECT_NEAR(r.objective, base.objective, 1e-12);
}

TEST(Opt2, SpanFeasibleOpt1IsKept) {
  const CmdpModel m = load_model(data_path("models/two_state_symmetric.json"));
  const BernsteinSet conf = BernsteinSet::exact(m.transition);
  const Opt1Result base = solve_opt1(conf, 0, 3, m.threshold, 0.0, m.reward, m.cost);
  const Opt2Result r = solve_opt2(conf, 0, 3, m.threshold, {1.0, 1.0}, m.reward, m.cost);
  EXPECT_TRUE(r.from_opt1);
  EXPECT_NEAR(r.objective, base.objective, 1e-12);
  EXPECT_LE(r.span_r_max, 2.0);
}

TEST(Opt2, TightBudgetBeatsRandomFeasiblePoints) {
  const CmdpModel m = load_model(data_path("models/two_state_constrained.json"));
  const int S = 2, A = 2, H = 3;
  const BernsteinSet conf = bernstein_confidence(sample_counts(m, 3000, 9), S, A, 100000, 0.1);
  const SpanBudget budget{0.2, 0.15};
  Opt2Options opts;
  opts.restarts = 20;
  const Opt2Result r = solve_opt2(conf, 0, H, m.threshold, budget, m.reward, m.cost, opts);
  const Opt1Result base = solve_opt1(conf, 0, H, m.threshold, budget.sp_c_star, m.reward, m.cost);
  EXPECT_LE(r.objective, base.objective + 1e-9);
  EXPECT_LE(r.span_r_max, 2 * budget.sp_r_star + Tolerances::kSpanFeasibility);
  EXPECT_LE(r.span_c_max, 2 * budget.sp_c_star + Tolerances::kSpanFeasibility);
  EXPECT_LE(r.cost, H * m.threshold + budget.sp_c_star + Tolerances::kLpFeasibility);
  EXPECT_NEAR(r.span_r_max, fh_values(r.witness.policy, r.witness.transition, m.reward).max_span(), 1e-12);

  Rng rng(68);
  double best = -std::numeric_limits<double>::infinity();
  int feasible = 0;
  for (int i = 0; i < 20000; ++i) {
    const StepPolicy pi = random_step_policy(S, A, H, rng);
    StepTransition P(S, A, H);
    bool ok = true;
    for (int s = 0; s < S && ok; ++s)
      for (int a = 0; a < A && ok; ++a)
        for (int h = 0; h < H && ok; ++h) {
          std::vector<double> lo(S), hi(S);
          for (int n = 0; n < S; ++n) {
            lo[static_cast<std::size_t>(n)] = conf.lower(s, a, n);
            hi[static_cast<std::size_t>(n)] = conf.upper(s, a, n);
          }
          ok = random_box_row(P.row(s, a, h), lo, hi, rng);
        }
    if (!ok) continue;
    const FhValueTable vr = fh_values(pi, P, m.reward), vc = fh_values(pi, P, m.cost);
    if (vr.max_span() > 2 * budget.sp_r_star || vc.max_span() > 2 * budget.sp_c_star) continue;
    if (vc.V[0](0) > H * m.threshold + budget.sp_c_star) continue;
    ++feasible;
    best = std::max(best, vr.V[0](0));
  }
  ASSERT_GT(feasible, 0);
  EXPECT_FALSE(r.from_opt1);
  EXPECT_GE(r.objective, best - 1e-9);
}

TEST(Horizon, ScheduleExamples) {
  EXPECT_EQ(fh_horizon(FhVariant::kOpt1, 8 * 27, 2, 2), 3);
  EXPECT_EQ(fh_horizon(FhVariant::kOpt1, 8 * 27 + 1, 2, 2), 4);
  EXPECT_EQ(fh_horizon(FhVariant::kOpt1, 8 * 1000, 2, 2), 10);
  EXPECT_EQ(fh_horizon(FhVariant::kOpt2, 8 * 9, 2, 2), 3);
  EXPECT_EQ(fh_horizon(FhVariant::kOpt2, 1, 2, 2), 1);
  int prev1 = 0, prev2 = 0;
  for (std::int64_t T = 8; T < 200000; T += 97) {
    const int h1 = fh_horizon(FhVariant::kOpt1, T, 2, 2), h2 = fh_horizon(FhVariant::kOpt2, T, 2, 2);
    EXPECT_GE(h1, prev1);
    EXPECT_GE(h2, prev2);
    prev1 = h1;
    prev2 = h2;
  }
}

TEST(FhRun, SingleState) {
  const CmdpModel m = load_model(data_path("models/single_state.json"));
  const ExperimentLog log = run_finite_horizon(m, FhVariant::kOpt1, {0.0, 0.0}, 1000, 0.1, 4);
  ASSERT_EQ(log.steps.size(), 1000u);
  const MetricCurves c = compute_metrics(log, 0.5, 0.4, {1000});
  EXPECT_NEAR(c.regret[0], 0.0, 1e-9);
  EXPECT_NEAR(c.violation[0], -100.0, 1e-9);
  EXPECT_EQ(log.fh_episodes.size(), 100u);
}

TEST(FhRun, DeterministicAndWithinBudget) {
  const CmdpModel m = load_model(data_path("models/two_state_constrained.json"));
  const SpanBudget budget{0.3233, 0.0895};
  const std::int64_t T = 2003;
  const ExperimentLog a = run_finite_horizon(m, FhVariant::kOpt1, budget, T, 0.1, 21);
  const ExperimentLog b = run_finite_horizon(m, FhVariant::kOpt1, budget, T, 0.1, 21);
  EXPECT_EQ(a.steps, b.steps);
  ASSERT_EQ(a.steps.size(), static_cast<std::size_t>(T));
  const int H = fh_horizon(FhVariant::kOpt1, T, 2, 2);
  std::size_t t = 0;
  for (const FhEpisode& e : a.fh_episodes) {
    EXPECT_TRUE(e.feasible);
    EXPECT_LE(e.cost_lhs, e.cost_rhs + Tolerances::kLpFeasibility);
    EXPECT_EQ(e.start_state, a.steps[t].state);
    EXPECT_EQ(e.horizon, H);
    t += static_cast<std::size_t>(e.steps_played);
  }
  EXPECT_EQ(t, static_cast<std::size_t>(T));
  EXPECT_EQ(a.fh_episodes.back().steps_played, static_cast<int>(T % H));
}

TEST(FhRun, ObserverSeesSetBeforeEpisode) {
  const CmdpModel m = load_model(data_path("models/two_state_constrained.json"));
  std::uint64_t expected = 0;
  const int H = fh_horizon(FhVariant::kOpt1, 400, 2, 2);
  run_finite_horizon(m, FhVariant::kOpt1, {0.3, 0.1}, 400, 0.1, 2, 0, {}, [&](const FhObservation& o) {
    std::uint64_t seen = 0;
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a) seen += o.counts->total(s, a);
    EXPECT_EQ(seen, expected);
    EXPECT_EQ(o.confidence->num_states(), 2);
    expected += static_cast<std::uint64_t>(H);
  });
}

TEST(FhRun, SmallOpt2Run) {
  const CmdpModel m = load_model(data_path("models/two_state_constrained.json"));
  const SpanBudget budget{0.3233, 0.0895};
  const ExperimentLog log = run_finite_horizon(m, FhVariant::kOpt2, budget, 200, 0.1, 5);
  ASSERT_EQ(log.steps.size(), 200u);
  for (const FhEpisode& e : log.fh_episodes) {
    EXPECT_TRUE(e.feasible);
    EXPECT_LE(e.span_r_max, 2 * budget.sp_r_star + Tolerances::kSpanFeasibility);
    EXPECT_LE(e.span_c_max, 2 * budget.sp_c_star + Tolerances::kSpanFeasibility);
  }
}
