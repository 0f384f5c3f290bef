#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ncmdp/env_gen.hpp"
#include "ncmdp/lp.hpp"
#include "ncmdp/oracle.hpp"
#include "test_support.hpp"

using namespace ncmdp;

namespace {

EpisodeModel bandit(std::vector<double> r, std::vector<double> g, double b) {
  const int A = static_cast<int>(r.size());
  return EpisodeModel({1, A, 1}, std::vector<double>(static_cast<std::size_t>(A), 1.0), std::move(r),
                      std::move(g), b);
}

// Best reward among deterministic policies that meet the constraint.
double best_feasible_deterministic(const EpisodeModel& m) {
  double best = -1.0;
  testing::for_each_deterministic_policy(m.shape(), [&](const PolicyTable& pi) {
    if (testing::enumerate_return(m, pi, Signal::utility) >= m.constraint_offset() - 1e-12) {
      best = std::max(best, testing::enumerate_return(m, pi, Signal::reward));
    }
  });
  return best;
}

}  // namespace

TEST_SUITE("lp") {
  TEST_CASE("textbook maximization with shadow prices") {
    LinearProgram lp;
    lp.num_vars = 2;
    lp.objective = {3.0, 2.0};
    lp.rows = {{{1.0, 1.0}, RowSense::less_equal, 4.0},
               {{1.0, 3.0}, RowSense::less_equal, 6.0},
               {{1.0, 0.0}, RowSense::less_equal, 3.0}};
    const auto r = solve_lp(lp);
    REQUIRE(r.status == LpStatus::optimal);
    CHECK(r.objective == doctest::Approx(11.0));
    CHECK(r.x[0] == doctest::Approx(3.0));
    CHECK(r.x[1] == doctest::Approx(1.0));
    CHECK(r.duals[0] == doctest::Approx(2.0));
    CHECK(r.duals[1] == doctest::Approx(0.0));
    CHECK(r.duals[2] == doctest::Approx(1.0));
  }

  TEST_CASE("equality and greater-equal rows") {
    LinearProgram lp;
    lp.num_vars = 2;
    lp.objective = {1.0, -1.0};
    lp.rows = {{{1.0, 1.0}, RowSense::equal, 2.0}, {{0.0, 1.0}, RowSense::greater_equal, 0.5}};
    const auto r = solve_lp(lp);
    REQUIRE(r.status == LpStatus::optimal);
    CHECK(r.objective == doctest::Approx(1.0));
    CHECK(r.duals[1] == doctest::Approx(-2.0));
  }

  TEST_CASE("infeasible and unbounded programs are reported") {
    LinearProgram bad;
    bad.num_vars = 1;
    bad.objective = {1.0};
    bad.rows = {{{1.0}, RowSense::greater_equal, 2.0}, {{1.0}, RowSense::less_equal, 1.0}};
    const auto r = solve_lp(bad);
    CHECK(r.status == LpStatus::infeasible);
    CHECK(r.infeasibility > 0.5);

    LinearProgram open;
    open.num_vars = 2;
    open.objective = {1.0, 0.0};
    open.rows = {{{1.0, -1.0}, RowSense::less_equal, 1.0}};
    CHECK(solve_lp(open).status == LpStatus::unbounded);
  }
}

TEST_CASE("two-armed bandit with a binding constraint") {
  const auto m = bandit({1.0, 0.0}, {0.0, 1.0}, 0.5);
  const auto s = solve_episode(m);
  REQUIRE(s.feasible);
  CHECK(s.v_r_star == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s.v_g_star == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s.mu_star == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(s.gamma == doctest::Approx(0.5));
  CHECK(s.policy.prob(0, 0, 0) == doctest::Approx(0.5));
}

TEST_CASE("slack constraints have zero multiplier") {
  SUBCASE("b = 0 matches unconstrained value iteration") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 30; ++t) {
      const auto m = testing::random_model(rng, testing::random_shape(rng, 4, 3, 4), 0.0);
      const auto s = solve_episode(m);
      REQUIRE(s.feasible);
      CHECK(s.v_r_star == doctest::Approx(maximize_payoff(m, m.reward_table()).value).epsilon(1e-8));
      CHECK(s.mu_star == doctest::Approx(0.0).epsilon(1e-9));
    }
  }
  SUBCASE("identical reward and utility") {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 30; ++t) {
      auto base = testing::random_model(rng, testing::random_shape(rng, 4, 3, 4), 0.0);
      const double best = maximize_payoff(base, base.reward_table()).value;
      const EpisodeModel m(base.shape(), base.transition_table(), base.reward_table(), base.reward_table(),
                           0.5 * best);
      const auto s = solve_episode(m);
      CHECK(s.mu_star == doctest::Approx(0.0).epsilon(1e-9));
      CHECK(s.v_r_star == doctest::Approx(best).epsilon(1e-8));
    }
  }
}

TEST_CASE("feasibility margin examples") {
  CHECK(solve_episode(bandit({0.2, 0.4}, {0.9, 0.3}, 0.6)).gamma == doctest::Approx(0.3));
  const auto tight = solve_episode(bandit({0.2, 0.4}, {0.9, 0.3}, 0.9));
  CHECK(tight.feasible);
  CHECK(tight.gamma == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(tight.v_r_star == doctest::Approx(0.2).epsilon(1e-9));
  const auto none = solve_episode(bandit({0.2, 0.4}, {0.9, 0.3}, 1.0));
  CHECK_FALSE(none.feasible);
  CHECK(none.gamma == doctest::Approx(-0.1));
  CHECK(none.max_utility == doctest::Approx(0.9));
  CHECK(none.mu_star == 0.0);
  CHECK(none.policy.prob(0, 0, 0) == 1.0);
}

TEST_CASE("margin matches enumeration of deterministic policies") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 40; ++t) {
    const auto m = testing::random_model(rng, testing::random_shape(rng, 3, 3, 3), 0.7, t % 2 == 0);
    CHECK(strict_feasibility_margin(m) ==
          doctest::Approx(testing::best_by_enumeration(m, Signal::utility) - 0.7).epsilon(1e-10));
  }
}

TEST_CASE("optimal value dominates every feasible deterministic policy") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 40; ++t) {
    const Shape s = testing::random_shape(rng, 3, 2, 3);
    const auto probe = testing::random_model(rng, s, 0.0);
    const double top = testing::best_by_enumeration(probe, Signal::utility);
    const EpisodeModel m(s, probe.transition_table(), probe.reward_table(), probe.utility_table(), 0.8 * top);
    const auto sol = solve_episode(m);
    REQUIRE(sol.feasible);
    CHECK(sol.v_r_star >= best_feasible_deterministic(m) - 1e-8);
    CHECK(sol.v_g_star >= m.constraint_offset() - 1e-7);
  }
}

TEST_CASE("strong duality and the multiplier bound") {
  std::mt19937_64 rng(14);
  int checked = 0;
  for (int t = 0; t < 60; ++t) {
    const Shape s = testing::random_shape(rng, 4, 3, 4);
    const auto probe = testing::random_model(rng, s, 0.0, t % 3 == 0);
    const double top = maximize_payoff(probe, probe.utility_table()).value;
    const double frac = std::uniform_real_distribution<double>(0.3, 0.98)(rng);
    const EpisodeModel m(s, probe.transition_table(), probe.reward_table(), probe.utility_table(), frac * top);
    const auto sol = solve_episode(m);
    REQUIRE(sol.feasible);
    if (sol.gamma < 1e-6) continue;
    const double hi = s.horizon / sol.gamma;
    CHECK(sol.mu_star <= hi + 1e-9);
    CHECK(testing::minimize_dual(m, hi + 1.0) == doctest::Approx(sol.v_r_star).epsilon(1e-4));
    CHECK(testing::dual_function(m, sol.mu_star) == doctest::Approx(sol.v_r_star).epsilon(1e-7));
    ++checked;
  }
  CHECK(checked > 40);
}

TEST_CASE("violation of a near-optimal policy is controlled by the multiplier") {
  // If V_r* - V_r(pi) + C [b - V_g(pi)]_+ <= delta with C >= 2 mu*, then
  // [b - V_g(pi)]_+ <= 2 delta / C.
  std::mt19937_64 rng(15);
  for (int t = 0; t < 200; ++t) {
    const Shape s = testing::random_shape(rng, 3, 3, 3);
    const auto probe = testing::random_model(rng, s, 0.0);
    const double top = maximize_payoff(probe, probe.utility_table()).value;
    const EpisodeModel m(s, probe.transition_table(), probe.reward_table(), probe.utility_table(), 0.85 * top);
    const auto sol = solve_episode(m);
    const auto pi = testing::random_policy(rng, s, true);
    const auto v = evaluate_exact(m, pi);
    const double vr = v.v(Signal::reward, 0, 0);
    const double viol = std::max(0.0, m.constraint_offset() - v.v(Signal::utility, 0, 0));
    const double c = 2.0 * sol.mu_star + 1.0;
    const double delta = sol.v_r_star - vr + c * viol;
    CHECK(viol <= 2.0 * delta / c + 1e-9);
  }
}

TEST_CASE("sequence solving reuses repeated episodes") {
  const auto seq = make_sequence(3, {4, 2, 3, 9}, DriftDescriptor::piecewise(2), ConstraintSchedule::constant(1.0));
  const auto solved = solve_sequence(seq);
  CHECK(solved.distinct_solves == 3);
  REQUIRE(solved.solutions.size() == 9);
  for (int m = 1; m <= 9; ++m) {
    const auto fresh = solve_episode(seq.episode(m));
    CHECK(fresh.policy == solved.solutions[m - 1].policy);
    CHECK(fresh.v_r_star == solved.solutions[m - 1].v_r_star);
  }
  double g = 1e9;
  for (const auto& s : solved.solutions) g = std::min(g, s.gamma);
  CHECK(uniform_feasibility_margin(solved) == g);
}

TEST_CASE("extracted policy reproduces the program value") {
  std::mt19937_64 rng(16);
  for (int t = 0; t < 50; ++t) {
    const Shape s = testing::random_shape(rng, 5, 3, 4);
    const auto probe = testing::random_model(rng, s, 0.0, true);
    const double top = maximize_payoff(probe, probe.utility_table()).value;
    const EpisodeModel m(s, probe.transition_table(), probe.reward_table(), probe.utility_table(), 0.9 * top);
    const auto sol = solve_episode(m);
    CHECK(testing::enumerate_return(m, sol.policy, Signal::reward) == doctest::Approx(sol.v_r_star).epsilon(1e-9));
    CHECK(sol.v_g_star >= m.constraint_offset() - 1e-7);
  }
}
