#pragma once

// Hindsight-optimal per-episode solutions via the occupancy-measure LP.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncmdp/env_gen.hpp"
#include "ncmdp/model.hpp"

namespace ncmdp {

struct OracleSolution {
  PolicyTable policy;
  double v_r_star = 0.0;  // V_{r,1}^{pi*}(x_1), by exact evaluation of the extracted policy
  double v_g_star = 0.0;
  double mu_star = 0.0;   // optimal dual of the utility constraint
  double gamma = 0.0;     // max_pi V_{g,1}(x_1) - b; negative when infeasible
  bool feasible = false;
  /// max_pi V_{g,1}(x_1); the infeasibility certificate when feasible is false.
  double max_utility = 0.0;
};

class OracleError : public std::runtime_error {
 public:
  OracleError(const std::string& what, int episode = 0)
      : std::runtime_error(episode > 0 ? "episode " + std::to_string(episode) + ": " + what : what),
        episode_(episode) {}
  int episode() const { return episode_; }

 private:
  int episode_;
};

/// max sum q r  s.t.  flow conservation from x_1, sum q g >= b, q >= 0.
/// The policy is q_h(x,a) / sum_a q_h(x,a), uniform on unvisited states.
/// Infeasible instances return feasible = false with the max-utility
/// policy; solver failures throw OracleError.
OracleSolution solve_episode(const EpisodeModel& model);

/// max_pi V_{g,1}(x_1) - b via backward induction on g.
double strict_feasibility_margin(const EpisodeModel& model);

struct SequenceSolution {
  std::vector<OracleSolution> solutions;  // one per episode
  std::size_t distinct_solves = 0;        // LPs actually solved
};

/// Solves every episode, reusing the previous solution when consecutive
/// models are identical.
SequenceSolution solve_sequence(const NonStationaryCMDP& seq);

/// min_m gamma_m over a solved sequence (the uniform Slater margin).
double uniform_feasibility_margin(const SequenceSolution& solved);

std::vector<PolicyTable> optimal_policies(const SequenceSolution& solved);

}  // namespace ncmdp
