#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ncmdp/env_gen.hpp"
#include "ncmdp/oracle.hpp"
#include "ncmdp/serialize.hpp"

using namespace ncmdp;

namespace {

std::string serialized(const NonStationaryCMDP& seq) {
  std::ostringstream os;
  write_sequence(os, seq);
  return os.str();
}

double direct_transition_norm(const EpisodeModel& a, const EpisodeModel& b, int h) {
  const Shape& s = a.shape();
  double ss = 0.0;
  for (int x = 0; x < s.states; ++x) {
    for (int u = 0; u < s.actions; ++u) {
      for (int y = 0; y < s.states; ++y) {
        const double d = a.transition(h, x, u, y) - b.transition(h, x, u, y);
        ss += d * d;
      }
    }
  }
  return std::sqrt(ss);
}

std::vector<PolicyTable> uniform_policies(const NonStationaryCMDP& seq) {
  return std::vector<PolicyTable>(seq.size(), PolicyTable::uniform(seq.shape()));
}

NonStationaryCMDP concatenate(const NonStationaryCMDP& a, const NonStationaryCMDP& b) {
  auto eps = a.episodes();
  eps.insert(eps.end(), b.episodes().begin(), b.episodes().end());
  return NonStationaryCMDP(eps, a.generator_seed(), a.drift());
}

}  // namespace

TEST_CASE("drift descriptors round trip through text") {
  for (const auto& d : {DriftDescriptor::stationary(), DriftDescriptor::piecewise(3),
                        DriftDescriptor::linear(0.001)}) {
    CHECK(DriftDescriptor::parse(d.to_string()) == d);
  }
  CHECK(DriftDescriptor::parse("piecewise_constant:2") == DriftDescriptor::piecewise(2));
  CHECK_THROWS_AS(DriftDescriptor::parse("sinusoidal"), std::invalid_argument);
}

TEST_CASE("stationary sequences repeat one model and have zero budgets") {
  const auto seq = make_sequence(4, {3, 2, 3, 5}, DriftDescriptor::stationary(),
                                 ConstraintSchedule::constant(1.0));
  REQUIRE(seq.size() == 5);
  for (int m = 2; m <= 5; ++m) CHECK(seq.episode(m) == seq.episode(1));
  const auto solved = solve_sequence(seq);
  CHECK(solved.distinct_solves == 1);
  const auto pols = optimal_policies(solved);
  const auto r = measure_budgets(seq, pols, 2, 3);
  CHECK(r.b_p == 0.0);
  CHECK(r.b_r == 0.0);
  CHECK(r.b_g == 0.0);
  CHECK(r.b_delta == 0.0);
  CHECK(r.b_star == 0.0);
}

TEST_CASE("piecewise switch budget equals the direct table-difference norm") {
  const auto seq = make_sequence(9, {3, 2, 3, 4}, DriftDescriptor::piecewise(1),
                                 ConstraintSchedule::constant(1.0));
  CHECK(seq.episode(2) == seq.episode(1));
  CHECK(seq.episode(4) == seq.episode(3));
  CHECK_FALSE(seq.episode(3) == seq.episode(2));
  double expected = 0.0;
  for (int h = 0; h < 3; ++h) expected += direct_transition_norm(seq.episode(3), seq.episode(2), h);
  const auto pols = uniform_policies(seq);
  const auto r = measure_budgets(seq, pols, 4, 4);
  CHECK(r.b_p == doctest::Approx(expected).epsilon(1e-14));
  CHECK(r.b_star == 0.0);
  CHECK(solve_sequence(seq).distinct_solves == 2);
}

TEST_CASE("generation is deterministic in the seed") {
  const SequenceShape shape{4, 3, 3, 12};
  const auto a = make_sequence(21, shape, DriftDescriptor::piecewise(2), ConstraintSchedule::constant(1.2));
  const auto b = make_sequence(21, shape, DriftDescriptor::piecewise(2), ConstraintSchedule::constant(1.2));
  const auto c = make_sequence(22, shape, DriftDescriptor::piecewise(2), ConstraintSchedule::constant(1.2));
  CHECK(serialized(a) == serialized(b));
  CHECK(serialized(a) != serialized(c));
}

TEST_CASE("a single reward change is measured exactly") {
  const Shape s{2, 2, 2};
  const std::vector<double> p(s.step_cells() * 2, 0.5);
  std::vector<double> r(s.step_cells(), 0.2);
  const std::vector<double> g(s.step_cells(), 0.6);
  const EpisodeModel first(s, p, r, g, 1.0);
  r[5] += 0.3;
  const EpisodeModel second(s, p, r, g, 1.0);
  const NonStationaryCMDP seq({first, second}, 0, DriftDescriptor::piecewise(1));
  const auto pols = uniform_policies(seq);
  const auto rep = measure_budgets(seq, pols, 1, 1);
  CHECK(rep.b_r == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(rep.b_p == 0.0);
  CHECK(rep.b_g == 0.0);
}

TEST_CASE("piecewise budgets stay within the per-switch bound") {
  // Per step and switch: transition rows differ by at most sqrt(2) each,
  // signal cells by at most 1, policy rows by at most 2 in L1.
  for (int switches : {1, 3, 6}) {
    const SequenceShape shape{4, 3, 3, 40};
    const auto seq = make_sequence(switches, shape, DriftDescriptor::piecewise(switches),
                                   ConstraintSchedule::constant(1.0));
    const auto pols = optimal_policies(solve_sequence(seq));
    const auto r = measure_budgets(seq, pols, 10, 10);
    const double sa = 4.0 * 3.0;
    const double per_step = std::sqrt(2.0 * sa) + 2.0 * std::sqrt(sa);
    CHECK(r.b_delta <= per_step * switches * shape.horizon + 1e-9);
    CHECK(r.b_star <= 2.0 * switches * shape.horizon + 1e-9);
  }
}

TEST_CASE("budgets of a concatenation add up with one boundary term") {
  const auto a = make_sequence(3, {3, 2, 2, 6}, DriftDescriptor::piecewise(2), ConstraintSchedule::constant(0.8));
  const auto b = make_sequence(5, {3, 2, 2, 7}, DriftDescriptor::piecewise(3), ConstraintSchedule::constant(0.8));
  const auto ab = concatenate(a, b);
  const auto ra = measure_budgets(a, uniform_policies(a), 3, 3);
  const auto rb = measure_budgets(b, uniform_policies(b), 3, 3);
  const auto rab = measure_budgets(ab, uniform_policies(ab), 3, 3);
  double boundary_p = 0.0;
  double boundary_r = 0.0;
  double boundary_g = 0.0;
  const auto& last = a.episode(static_cast<int>(a.size()));
  const auto& first = b.episode(1);
  for (int h = 0; h < 2; ++h) {
    boundary_p += transition_distance(first, last, h);
    boundary_r += signal_distance(first, last, Signal::reward, h);
    boundary_g += signal_distance(first, last, Signal::utility, h);
  }
  CHECK(rab.b_p == doctest::Approx(ra.b_p + rb.b_p + boundary_p).epsilon(1e-13));
  CHECK(rab.b_r == doctest::Approx(ra.b_r + rb.b_r + boundary_r).epsilon(1e-13));
  CHECK(rab.b_g == doctest::Approx(ra.b_g + rb.b_g + boundary_g).epsilon(1e-13));
  CHECK(rab.b_p >= ra.b_p + rb.b_p - boundary_p);
}

TEST_CASE("per-epoch budgets never exceed the totals") {
  const auto seq = make_sequence(8, {3, 3, 3, 30}, DriftDescriptor::piecewise(5), ConstraintSchedule::constant(1.0));
  const auto pols = optimal_policies(solve_sequence(seq));
  for (int len : {1, 4, 7, 30}) {
    const auto r = measure_budgets(seq, pols, len, len);
    double sp = 0.0;
    double sg = 0.0;
    for (const auto& e : r.window_epochs) {
      CHECK(e.b_p >= 0.0);
      CHECK(e.b_g >= 0.0);
      sp += e.b_p;
      sg += e.b_g;
    }
    CHECK(r.window_epochs.size() == static_cast<std::size_t>((30 + len - 1) / len));
    CHECK(sp <= r.b_p + 1e-12);
    CHECK(sg <= r.b_g + 1e-12);
    if (len == 30) CHECK(sp == doctest::Approx(r.b_p));
    if (len == 1) CHECK(sp == 0.0);
  }
}

TEST_CASE("linear drift budgets scale with the rate") {
  GeneratorOptions opts;
  opts.min_feasibility_margin = -1.0;
  const SequenceShape shape{3, 2, 3, 11};
  const auto slow = make_sequence(12, shape, DriftDescriptor::linear(0.02), ConstraintSchedule::constant(1.0), opts);
  const auto fast = make_sequence(12, shape, DriftDescriptor::linear(0.06), ConstraintSchedule::constant(1.0), opts);
  const auto rs = measure_budgets(slow, uniform_policies(slow), 11, 11);
  const auto rf = measure_budgets(fast, uniform_policies(fast), 11, 11);
  CHECK(rs.b_p > 0.0);
  CHECK(std::abs(rf.b_p - 3.0 * rs.b_p) < 1e-9);
  CHECK(std::abs(rf.b_r - 3.0 * rs.b_r) < 1e-9);
  CHECK(std::abs(rf.b_g - 3.0 * rs.b_g) < 1e-9);
  CHECK_THROWS_AS(make_sequence(12, shape, DriftDescriptor::linear(0.2), ConstraintSchedule::constant(1.0), opts),
                  std::invalid_argument);
}

TEST_CASE("generated episodes keep the requested feasibility margin") {
  const auto seq = make_sequence(31, {5, 3, 5, 50}, DriftDescriptor::piecewise(4),
                                 ConstraintSchedule::constant(2.5));
  for (const auto& s : solve_sequence(seq).solutions) {
    CHECK(s.feasible);
    CHECK(s.gamma >= 0.05);
  }
}

TEST_CASE("invalid generator input") {
  CHECK_THROWS_AS(make_sequence(1, {3, 2, 2, 4}, DriftDescriptor::piecewise(4), ConstraintSchedule::constant(1.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_sequence(1, {0, 2, 2, 4}, DriftDescriptor::stationary(), ConstraintSchedule::constant(1.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_sequence(1, {2, 2, 2, 0}, DriftDescriptor::stationary(), ConstraintSchedule::constant(1.0)),
                  std::invalid_argument);
  GeneratorOptions impossible;
  impossible.max_retries = 3;
  CHECK_THROWS_AS(make_sequence(1, {2, 2, 2, 4}, DriftDescriptor::stationary(),
                                ConstraintSchedule::constant(2.0), impossible),
                  std::runtime_error);
  const auto seq = make_sequence(1, {2, 2, 2, 4}, DriftDescriptor::stationary(), ConstraintSchedule::constant(1.0));
  const std::vector<PolicyTable> short_list(2, PolicyTable::uniform(seq.shape()));
  CHECK_THROWS_AS(measure_budgets(seq, short_list, 2, 2), std::invalid_argument);
}

TEST_CASE("per-episode constraint schedules are applied") {
  const std::vector<double> offsets{0.5, 0.6, 0.7, 0.8};
  const auto seq = make_sequence(2, {2, 2, 2, 4}, DriftDescriptor::stationary(), ConstraintSchedule{offsets});
  for (int m = 1; m <= 4; ++m) CHECK(seq.episode(m).constraint_offset() == offsets[m - 1]);
}

TEST_CASE("sequence serialization round trips exactly") {
  const std::vector<double> offsets{0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  const auto seq = make_sequence(77, {3, 2, 3, 6}, DriftDescriptor::piecewise(2), ConstraintSchedule{offsets});
  const std::string text = serialized(seq);
  CHECK(text.find("repeat") != std::string::npos);
  std::istringstream is(text);
  const auto back = read_sequence(is);
  CHECK(back == seq);
  CHECK(serialized(back) == text);
}

TEST_CASE("malformed model files are rejected with a line number") {
  const auto seq = make_sequence(1, {2, 2, 1, 1}, DriftDescriptor::stationary(), ConstraintSchedule::constant(0.5));
  std::string text = serialized(seq);
  SUBCASE("bad number") {
    const auto pos = text.find('\n', text.find("transition")) + 1;
    text.replace(pos, 1, "x");
    std::istringstream is(text);
    try {
      read_sequence(is);
      FAIL("expected failure");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("line") != std::string::npos);
    }
  }
  SUBCASE("wrong version") {
    text.replace(text.find("ncmdp-sequence 1"), 16, "ncmdp-sequence 9");
    std::istringstream is(text);
    CHECK_THROWS_AS(read_sequence(is), std::runtime_error);
  }
  SUBCASE("truncated") {
    std::istringstream is(text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(read_sequence(is), std::runtime_error);
  }
}
