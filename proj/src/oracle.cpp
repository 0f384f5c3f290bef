#include "ncmdp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ncmdp/lp.hpp"

namespace ncmdp {

namespace {

constexpr double kRoundTripTolerance = 1e-6;
constexpr double kVisitThreshold = 1e-12;

std::size_t var_index(const Shape& s, int h, int x, int a) {
  return (static_cast<std::size_t>(h) * s.states + x) * s.actions + a;
}

LinearProgram occupancy_program(const EpisodeModel& model) {
  const Shape& s = model.shape();
  const int n = static_cast<int>(s.step_cells());
  LinearProgram lp;
  lp.num_vars = n;
  lp.objective = model.reward_table();

  for (int x = 0; x < s.states; ++x) {
    LinearProgram::Row row{std::vector<double>(n, 0.0), RowSense::equal,
                           x == model.initial_state() ? 1.0 : 0.0};
    for (int a = 0; a < s.actions; ++a) row.coeffs[var_index(s, 0, x, a)] = 1.0;
    lp.rows.push_back(std::move(row));
  }
  for (int h = 1; h < s.horizon; ++h) {
    for (int y = 0; y < s.states; ++y) {
      LinearProgram::Row row{std::vector<double>(n, 0.0), RowSense::equal, 0.0};
      for (int a = 0; a < s.actions; ++a) row.coeffs[var_index(s, h, y, a)] = 1.0;
      for (int x = 0; x < s.states; ++x) {
        for (int a = 0; a < s.actions; ++a) {
          row.coeffs[var_index(s, h - 1, x, a)] -= model.transition(h - 1, x, a, y);
        }
      }
      lp.rows.push_back(std::move(row));
    }
  }
  lp.rows.push_back(
      {model.utility_table(), RowSense::greater_equal, model.constraint_offset()});
  return lp;
}

PolicyTable extract_policy(const Shape& s, const std::vector<double>& q) {
  std::vector<double> probs(s.step_cells());
  for (int h = 0; h < s.horizon; ++h) {
    for (int x = 0; x < s.states; ++x) {
      double mass = 0.0;
      for (int a = 0; a < s.actions; ++a) mass += q[var_index(s, h, x, a)];
      for (int a = 0; a < s.actions; ++a) {
        probs[var_index(s, h, x, a)] =
            mass > kVisitThreshold ? q[var_index(s, h, x, a)] / mass : 1.0 / s.actions;
      }
    }
  }
  return PolicyTable(s, std::move(probs));
}

}  // namespace

double strict_feasibility_margin(const EpisodeModel& model) {
  return maximize_payoff(model, model.utility_table()).value - model.constraint_offset();
}

OracleSolution solve_episode(const EpisodeModel& model) {
  const Shape& s = model.shape();
  const OptimalValue best_utility = maximize_payoff(model, model.utility_table());
  const double gamma = best_utility.value - model.constraint_offset();

  const LpResult lp = solve_lp(occupancy_program(model));
  if (lp.status == LpStatus::infeasible) {
    if (gamma > 1e-7) throw OracleError("LP reports infeasible but max utility exceeds b");
    const ValuePair v = evaluate_exact(model, best_utility.policy);
    return OracleSolution{best_utility.policy,
                          v.v(Signal::reward, 0, model.initial_state()),
                          v.v(Signal::utility, 0, model.initial_state()),
                          0.0,
                          gamma,
                          false,
                          best_utility.value};
  }
  if (lp.status != LpStatus::optimal) throw OracleError("occupancy LP did not converge");

  PolicyTable policy = extract_policy(s, lp.x);
  const ValuePair v = evaluate_exact(model, policy);
  const double v_r = v.v(Signal::reward, 0, model.initial_state());
  const double v_g = v.v(Signal::utility, 0, model.initial_state());
  if (std::abs(v_r - lp.objective) > kRoundTripTolerance) {
    throw OracleError("extracted policy value " + std::to_string(v_r) +
                      " does not reproduce LP objective " + std::to_string(lp.objective));
  }
  const double mu = std::max(0.0, -lp.duals.back());
  return OracleSolution{std::move(policy), v_r, v_g, mu, gamma, true, best_utility.value};
}

SequenceSolution solve_sequence(const NonStationaryCMDP& seq) {
  SequenceSolution out;
  out.solutions.reserve(seq.size());
  for (int m = 1; m <= static_cast<int>(seq.size()); ++m) {
    if (m > 1 && seq.episode(m) == seq.episode(m - 1)) {
      out.solutions.push_back(out.solutions.back());
      continue;
    }
    try {
      out.solutions.push_back(solve_episode(seq.episode(m)));
    } catch (const OracleError& e) {
      throw OracleError(e.what(), m);
    }
    ++out.distinct_solves;
  }
  return out;
}

double uniform_feasibility_margin(const SequenceSolution& solved) {
  double g = std::numeric_limits<double>::infinity();
  for (const auto& s : solved.solutions) g = std::min(g, s.gamma);
  return g;
}

std::vector<PolicyTable> optimal_policies(const SequenceSolution& solved) {
  std::vector<PolicyTable> out;
  out.reserve(solved.solutions.size());
  for (const auto& s : solved.solutions) out.push_back(s.policy);
  return out;
}

}  // namespace ncmdp
