#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ncmdp/policy_eval.hpp"
#include "test_support.hpp"

using namespace ncmdp;

namespace {

TrajectoryWindow window_of(const std::vector<Trajectory>& ts, int first = 1) {
  return {first, std::span<const Trajectory>(ts)};
}

EvaluatorParams params(double lambda, double beta, double lv = 0.0) {
  EvaluatorParams p;
  p.lambda = lambda;
  p.beta = beta;
  p.lv = lv;
  return p;
}

}  // namespace

TEST_CASE("an empty window saturates to the horizon when the bonus is large") {
  const Shape s{3, 2, 4};
  const std::vector<Trajectory> none;
  const auto pi = PolicyTable::uniform(s);
  const auto e = ope_tabular(s, 0, window_of(none), pi, params(1.0, 10.0));
  CHECK(e.v_r1 == 4.0);
  CHECK(e.v_g1 == 4.0);
  for (int h = 0; h < 4; ++h) CHECK(e.values.q(Signal::reward, h, 2, 1) == 4.0 - h);
  const auto flat = ope_tabular(s, 0, window_of(none), pi, params(1.0, 0.0));
  CHECK(flat.v_r1 == 0.0);
  CHECK(flat.v_g1 == 0.0);
  const auto lv = ope_tabular(s, 0, window_of(none), pi, params(1.0, 0.0, 0.25));
  CHECK(lv.v_r1 == 0.0);
  CHECK(lv.v_g1 == 0.25);  // no observed transitions, so nothing propagates back
}

TEST_CASE("single-trajectory arithmetic") {
  // H = 2, two states, one action; observed 0 -> 1 -> 0.
  const Shape s{2, 1, 2};
  const std::vector<Trajectory> ts{{{{0, 0, 0.6, 0.2, 1}, {1, 0, 0.4, 1.0, 0}}}};
  const auto pi = PolicyTable::uniform(s);
  const double lambda = 1.0;
  const double beta = 0.1;
  const auto e = ope_tabular(s, 0, window_of(ts), pi, params(lambda, beta));
  const double seen = 2.0 * beta / std::sqrt(2.0);
  const double unseen = 2.0 * beta;
  CHECK(e.values.q(Signal::reward, 1, 1, 0) == doctest::Approx(0.2 + seen).epsilon(1e-15));
  CHECK(e.values.q(Signal::reward, 1, 0, 0) == doctest::Approx(unseen).epsilon(1e-15));
  CHECK(e.values.q(Signal::utility, 1, 1, 0) == doctest::Approx(0.5 + seen).epsilon(1e-15));
  CHECK(e.v_r1 == doctest::Approx(0.3 + 0.5 * (0.2 + seen) + seen).epsilon(1e-15));
  CHECK(e.v_g1 == doctest::Approx(0.1 + 0.5 * (0.5 + seen) + seen).epsilon(1e-15));

  const auto est = TabularEstimator::fit(s, window_of(ts), lambda);
  CHECK(est.count(0, 0, 0) == 1);
  CHECK(est.count(0, 0, 0, 1) == 1);
  CHECK(est.count(1, 0, 0) == 0);
  CHECK(est.p_hat(0, 0, 0, 1) == 0.5);
  CHECK(est.signal_hat(Signal::utility, 1, 1, 0) == 0.5);
  CHECK(est.bonus(beta, 1, 0, 0) == beta);
}

TEST_CASE("estimates stay inside the truncation range") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 40; ++t) {
    const Shape s = testing::random_shape(rng, 4, 3, 5);
    const auto m = testing::random_model(rng, s, 0.0);
    const auto pi = testing::random_policy(rng, s);
    const auto ts = testing::sample_window(rng, m, pi, 1 + t % 7);
    const double beta = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    const auto e = ope_tabular(s, 0, window_of(ts), pi, params(1.0, beta, 0.3));
    for (int h = 0; h < s.horizon; ++h) {
      for (int x = 0; x < s.states; ++x) {
        for (Signal sig : {Signal::reward, Signal::utility}) {
          CHECK(e.values.v(sig, h, x) >= 0.0);
          CHECK(e.values.v(sig, h, x) <= s.horizon - h + 1e-12);
          for (int a = 0; a < s.actions; ++a) {
            CHECK(e.values.q(sig, h, x, a) >= 0.0);
            CHECK(e.values.q(sig, h, x, a) <= s.horizon - h);
          }
        }
      }
      for (int x = 0; x < s.states; ++x) CHECK(e.values.v(Signal::reward, s.horizon, x) == 0.0);
    }
  }
}

TEST_CASE("estimates are monotone in the bonus and the slack") {
  std::mt19937_64 rng(32);
  for (int t = 0; t < 30; ++t) {
    const Shape s = testing::random_shape(rng, 4, 3, 4);
    const auto m = testing::random_model(rng, s, 0.0);
    const auto pi = testing::random_policy(rng, s);
    const auto ts = testing::sample_window(rng, m, pi, 5);
    double prev_r = -1.0;
    double prev_g = -1.0;
    for (double beta : {0.0, 0.05, 0.2, 0.8, 3.0}) {
      const auto e = ope_tabular(s, 0, window_of(ts), pi, params(1.0, beta));
      CHECK(e.v_r1 >= prev_r);
      CHECK(e.v_g1 >= prev_g);
      prev_r = e.v_r1;
      prev_g = e.v_g1;
    }
    const auto base = ope_tabular(s, 0, window_of(ts), pi, params(1.0, 0.1));
    const auto slack = ope_tabular(s, 0, window_of(ts), pi, params(1.0, 0.1, 0.2));
    CHECK(slack.v_g1 >= base.v_g1);
    CHECK(slack.v_r1 == base.v_r1);
  }
}

TEST_CASE("optimism holds for most windows") {
  std::mt19937_64 rng(33);
  const Shape s{3, 2, 3};
  const auto m = testing::random_model(rng, s, 0.0);
  const auto pi = testing::random_policy(rng, s);
  const auto truth = evaluate_exact(m, pi);
  int failures = 0;
  for (int run = 0; run < 50; ++run) {
    const auto ts = testing::sample_window(rng, m, pi, 40);
    const auto e = ope_tabular(s, 0, window_of(ts), pi, params(1.0, 1.0));
    if (e.v_r1 < truth.v(Signal::reward, 0, 0) || e.v_g1 < truth.v(Signal::utility, 0, 0)) ++failures;
  }
  CHECK(failures <= 5);
}

TEST_CASE("only the trajectories in the window matter") {
  std::mt19937_64 rng(34);
  const Shape s{3, 2, 3};
  const auto m = testing::random_model(rng, s, 0.0);
  const auto pi = testing::random_policy(rng, s);
  const auto all = testing::sample_window(rng, m, pi, 12);
  const std::vector<Trajectory> copy(all.begin() + 4, all.begin() + 9);
  const TrajectoryWindow slice{5, std::span<const Trajectory>(all).subspan(4, 5)};
  const auto a = ope_tabular(s, 0, slice, pi, params(1.0, 0.3));
  const auto b = ope_tabular(s, 0, window_of(copy, 5), pi, params(1.0, 0.3));
  CHECK(a.values.q_r == b.values.q_r);
  CHECK(a.values.q_g == b.values.q_g);
  const auto c = ope_tabular(s, 0, window_of(all), pi, params(1.0, 0.3));
  CHECK(c.values.q_r != a.values.q_r);
}

TEST_CASE("estimates converge to the true values with abundant data") {
  std::mt19937_64 rng(35);
  for (int t = 0; t < 5; ++t) {
    const Shape s{3, 2, 3};
    const auto m = testing::random_model(rng, s, 0.0);
    const auto pi = testing::random_policy(rng, s);
    const auto truth = evaluate_exact(m, pi);
    const auto ts = testing::sample_window(rng, m, pi, 20000);
    const auto e = ope_tabular(s, 0, window_of(ts), pi, params(1e-6, 0.0));
    CHECK(e.v_r1 == doctest::Approx(truth.v(Signal::reward, 0, 0)).epsilon(0.03));
    CHECK(e.v_g1 == doctest::Approx(truth.v(Signal::utility, 0, 0)).epsilon(0.03));
  }
}

TEST_CASE("malformed windows and parameters are rejected") {
  const Shape s{2, 2, 2};
  const auto pi = PolicyTable::uniform(s);
  const std::vector<Trajectory> short_one{{{{0, 0, 0.5, 0.5, 1}}}};
  CHECK_THROWS_AS(ope_tabular(s, 0, window_of(short_one), pi, params(1.0, 0.0)), std::invalid_argument);
  const std::vector<Trajectory> bad_state{{{{0, 0, 0.5, 0.5, 1}, {2, 0, 0.5, 0.5, 0}}}};
  CHECK_THROWS_AS(ope_tabular(s, 0, window_of(bad_state), pi, params(1.0, 0.0)), std::invalid_argument);
  const std::vector<Trajectory> bad_signal{{{{0, 0, 1.5, 0.5, 1}, {1, 0, 0.5, 0.5, 0}}}};
  CHECK_THROWS_AS(ope_tabular(s, 0, window_of(bad_signal), pi, params(1.0, 0.0)), std::invalid_argument);
  const std::vector<Trajectory> none;
  CHECK_THROWS_AS(ope_tabular(s, 0, window_of(none), pi, params(0.0, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(ope_tabular(s, 0, window_of(none), pi, params(1.0, -1.0)), std::invalid_argument);
  CHECK_THROWS_AS(ope_tabular(s, 5, window_of(none), pi, params(1.0, 0.0)), std::invalid_argument);
}

TEST_SUITE("lstd") {
  TEST_CASE("an empty window gives pure bonuses") {
    std::mt19937_64 rng(40);
    const Shape s{2, 2, 3};
    const auto m = testing::random_model(rng, s, 0.0);
    const auto f = LinearKernelModel::canonical(m);
    const std::vector<Trajectory> none;
    const auto pi = PolicyTable::uniform(s);
    const auto e = lstd_ucb(f, 0, window_of(none), pi, params(1.0, 0.0));
    CHECK(e.estimate.v_r1 == 0.0);
    CHECK(e.estimate.v_g1 == 0.0);
    const auto big = lstd_ucb(f, 0, window_of(none), pi, params(1.0, 10.0));
    CHECK(big.estimate.v_r1 == 3.0);
    for (double b : big.diagnostics.bonus) CHECK(b == doctest::Approx(10.0));
  }

  TEST_CASE("canonical features reproduce the tabular signal estimates") {
    std::mt19937_64 rng(41);
    for (int t = 0; t < 20; ++t) {
      const Shape s = testing::random_shape(rng, 3, 3, 3);
      const auto m = testing::random_model(rng, s, 0.0);
      const auto pi = testing::random_policy(rng, s);
      const auto ts = testing::sample_window(rng, m, pi, 1 + t);
      const double lambda = 0.5 + 0.1 * t;
      const double beta = 0.3;
      const auto lin = lstd_ucb(LinearKernelModel::canonical(m), 0, window_of(ts), pi, params(lambda, beta));
      const auto est = TabularEstimator::fit(s, window_of(ts), lambda);
      const auto& d = lin.diagnostics;
      for (int h = 0; h < s.horizon; ++h) {
        for (int x = 0; x < s.states; ++x) {
          for (int a = 0; a < s.actions; ++a) {
            const std::size_t c = lin.estimate.values.q_index(h, x, a);
            CHECK(d.reward_fit[c] == doctest::Approx(est.signal_hat(Signal::reward, h, x, a)).epsilon(1e-9));
            CHECK(d.utility_fit[c] == doctest::Approx(est.signal_hat(Signal::utility, h, x, a)).epsilon(1e-9));
            CHECK(d.bonus[c] == doctest::Approx(est.bonus(beta, h, x, a)).epsilon(1e-9));
          }
        }
      }
    }
  }

  TEST_CASE("canonical transition part has the rank-one closed form") {
    // Block (x,a) of the value Gram matrix is lambda I + n v v' with v the
    // next-step value vector, so phi_V' w = |v|^2 s / (lambda + n |v|^2)
    // where s sums V over observed successors.
    std::mt19937_64 rng(42);
    for (int t = 0; t < 15; ++t) {
      const Shape s = testing::random_shape(rng, 3, 2, 3);
      const auto m = testing::random_model(rng, s, 0.0);
      const auto pi = testing::random_policy(rng, s);
      const auto ts = testing::sample_window(rng, m, pi, 3 + t);
      const double lambda = 1.0;
      const double beta = 0.2;
      const auto lin = lstd_ucb(LinearKernelModel::canonical(m), 0, window_of(ts), pi, params(lambda, beta));
      const auto est = TabularEstimator::fit(s, window_of(ts), lambda);
      const auto& v = lin.estimate.values;
      for (int h = 0; h < s.horizon; ++h) {
        for (Signal sig : {Signal::reward, Signal::utility}) {
          double norm2 = 0.0;
          for (int y = 0; y < s.states; ++y) norm2 += v.v(sig, h + 1, y) * v.v(sig, h + 1, y);
          const auto& part = sig == Signal::reward ? lin.diagnostics.reward_transition
                                                   : lin.diagnostics.utility_transition;
          const auto& vb = sig == Signal::reward ? lin.diagnostics.reward_bonus : lin.diagnostics.utility_bonus;
          for (int x = 0; x < s.states; ++x) {
            for (int a = 0; a < s.actions; ++a) {
              const int n = est.count(h, x, a);
              double sum = 0.0;
              for (int y = 0; y < s.states; ++y) sum += est.count(h, x, a, y) * v.v(sig, h + 1, y);
              const std::size_t c = v.q_index(h, x, a);
              CHECK(part[c] == doctest::Approx(norm2 * sum / (lambda + n * norm2)).epsilon(1e-9));
              CHECK(vb[c] == doctest::Approx(beta * std::sqrt(norm2 / (lambda + n * norm2))).epsilon(1e-9));
            }
          }
        }
      }
    }
  }

  TEST_CASE("backends agree on full tables as the ridge vanishes") {
    // Without bonuses the two transition estimates differ only through the
    // ridge term, so the gap shrinks linearly in lambda.
    std::mt19937_64 rng(45);
    for (double lambda : {1e-8, 1e-9}) {
      double worst = 0.0;
      for (int t = 0; t < 60; ++t) {
        const Shape s = testing::random_shape(rng, 3, 2, 3);
        const auto m = testing::random_model(rng, s, 0.0);
        const auto pi = testing::random_policy(rng, s);
        const auto ts = testing::sample_window(rng, m, pi, 1 + t % 20);
        const auto tab = ope_tabular(s, 0, window_of(ts), pi, params(lambda, 0.0));
        const auto lin = lstd_ucb(LinearKernelModel::canonical(m), 0, window_of(ts), pi, params(lambda, 0.0));
        for (std::size_t i = 0; i < tab.values.q_r.size(); ++i) {
          worst = std::max(worst, std::abs(tab.values.q_r[i] - lin.estimate.values.q_r[i]));
          worst = std::max(worst, std::abs(tab.values.q_g[i] - lin.estimate.values.q_g[i]));
        }
      }
      CHECK(worst < 1e3 * lambda);
    }
  }

  TEST_CASE("one-dimensional features average over all cells") {
    const Shape s{2, 2, 2};
    const std::vector<double> psi(static_cast<std::size_t>(2 * 2 * 2), 0.5);
    const std::vector<double> phi(4, 1.0);
    const LinearKernelModel f(s, 1, 1, psi, phi, {1.0, 1.0}, {0.5, 0.5}, {0.5, 0.5});
    const std::vector<Trajectory> ts{{{{0, 0, 0.2, 0.9, 1}, {1, 1, 0.6, 0.1, 0}}},
                                     {{{0, 1, 0.4, 0.3, 0}, {0, 0, 1.0, 0.5, 1}}}};
    const auto pi = PolicyTable::uniform(s);
    const auto e = lstd_ucb(f, 0, window_of(ts), pi, params(1.0, 0.0));
    for (int x = 0; x < 2; ++x) {
      for (int a = 0; a < 2; ++a) {
        CHECK(e.diagnostics.reward_fit[e.estimate.values.q_index(1, x, a)] == doctest::Approx(1.6 / 3.0));
        CHECK(e.diagnostics.utility_fit[e.estimate.values.q_index(0, x, a)] == doctest::Approx(1.2 / 3.0));
      }
    }
    // The step-1 value is the constant 1.6 / 3 so phi_V = 1.6 / 3 everywhere.
    const double v = 1.6 / 3.0;
    const double w = 2.0 * v * v / (1.0 + 2.0 * v * v);
    CHECK(e.diagnostics.reward_transition[0] == doctest::Approx(w * v));
  }

  TEST_CASE("ill-conditioned Gram matrices raise a numerical error") {
    std::mt19937_64 rng(43);
    const Shape s{3, 2, 2};
    const auto m = testing::random_model(rng, s, 0.0);
    const auto pi = PolicyTable::uniform(s);
    const auto ts = testing::sample_window(rng, m, pi, 1);
    CHECK_THROWS_AS(lstd_ucb(LinearKernelModel::canonical(m), 0, window_of(ts), pi, params(1e-13, 0.1)),
                    NumericalError);
    CHECK_NOTHROW(lstd_ucb(LinearKernelModel::canonical(m), 0, window_of(ts), pi, params(1e-3, 0.1)));
  }

  TEST_CASE("linear estimates stay inside the truncation range") {
    std::mt19937_64 rng(44);
    for (int t = 0; t < 10; ++t) {
      const Shape s = testing::random_shape(rng, 3, 2, 4);
      const auto m = testing::random_model(rng, s, 0.0);
      const auto pi = testing::random_policy(rng, s);
      const auto ts = testing::sample_window(rng, m, pi, 6);
      const auto e = lstd_ucb(LinearKernelModel::canonical(m), 0, window_of(ts), pi, params(1.0, 0.7, 0.2));
      for (int h = 0; h < s.horizon; ++h) {
        for (int x = 0; x < s.states; ++x) {
          for (int a = 0; a < s.actions; ++a) {
            CHECK(e.estimate.values.q(Signal::utility, h, x, a) >= 0.0);
            CHECK(e.estimate.values.q(Signal::utility, h, x, a) <= s.horizon - h);
          }
        }
      }
    }
  }
}

TEST_CASE("drift slack") {
  CHECK(lv_slack(Assumption::local_budget, Setting::tabular, 0.1, 0.2, 5, 0, 0, 10) == doctest::Approx(0.7));
  CHECK(lv_slack(Assumption::local_budget, Setting::linear, 0.1, 0.2, 5, 2, 3, 6) ==
        doctest::Approx(0.1 * 25.0 * 2.0 * std::sqrt(12.0) + 0.2 * std::sqrt(18.0)));
  CHECK(lv_slack(Assumption::slater, Setting::tabular, 0.1, 0.2, 5, 0, 0, 10) == 0.0);
  CHECK(lv_slack(Assumption::local_budget, Setting::tabular, 0.0, 0.0, 5, 0, 0, 10) == 0.0);
  CHECK_THROWS_AS(lv_slack(Assumption::local_budget, Setting::tabular, -0.1, 0.0, 5, 0, 0, 10),
                  std::invalid_argument);
  CHECK(parse_assumption(to_string(Assumption::slater)) == Assumption::slater);
  CHECK(parse_setting(to_string(Setting::linear)) == Setting::linear);
  CHECK_THROWS_AS(parse_setting("deep"), std::invalid_argument);
}
