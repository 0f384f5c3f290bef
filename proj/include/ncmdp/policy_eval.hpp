#pragma once

// Optimistic policy evaluation from a window of past trajectories.
//
// Two backends share one contract: given the trajectories of episodes
// [first_episode, first_episode + n) and a policy, return truncated
// optimistic Q/V tables for reward and utility.
//
//   ope_tabular  visit counters, ridge-smoothed empirical model, bonus
//                beta (n + lambda)^{-1/2} added twice
//   lstd_ucb     least-squares temporal difference on linear-kernel
//                features with elliptical bonuses

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncmdp/model.hpp"

namespace ncmdp {

/// One observed step: state, action, the bandit feedback r_h(x,a) and
/// g_h(x,a), and the successor state.
struct TransitionRecord {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  double utility = 0.0;
  int next_state = 0;

  bool operator==(const TransitionRecord&) const = default;
};

struct Trajectory {
  std::vector<TransitionRecord> steps;  // length H

  bool operator==(const Trajectory&) const = default;
};

/// Consecutive episodes' trajectories; trajectories[i] belongs to episode
/// first_episode + i.
struct TrajectoryWindow {
  int first_episode = 1;
  std::span<const Trajectory> trajectories;
};

struct EvaluatorParams {
  double lambda = 1.0;
  double beta = 0.0;
  double lv = 0.0;  // additive slack on the utility estimate

  void validate() const;
};

/// Thrown when a Gram matrix is too ill-conditioned to invert reliably.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OptimisticEstimate {
  ValuePair values;
  double v_r1 = 0.0;  // V_{r,1}(x_1)
  double v_g1 = 0.0;  // V_{g,1}(x_1)
};

/// Sufficient statistics of a window for the tabular backend.
class TabularEstimator {
 public:
  static TabularEstimator fit(Shape shape, const TrajectoryWindow& window, double lambda);

  const Shape& shape() const { return shape_; }
  double lambda() const { return lambda_; }

  int count(int h, int x, int a) const { return counts2_[cell(h, x, a)]; }
  int count(int h, int x, int a, int next) const {
    return counts3_[cell(h, x, a) * shape_.states + next];
  }
  /// n(x,a,x') / (n(x,a) + lambda); rows sum to n / (n + lambda).
  double p_hat(int h, int x, int a, int next) const {
    return count(h, x, a, next) / (count(h, x, a) + lambda_);
  }
  /// Sum of observed signal values / (n(x,a) + lambda).
  double signal_hat(Signal s, int h, int x, int a) const {
    const auto& sums = s == Signal::reward ? reward_sums_ : utility_sums_;
    return sums[cell(h, x, a)] / (count(h, x, a) + lambda_);
  }
  /// beta (n(x,a) + lambda)^{-1/2}
  double bonus(double beta, int h, int x, int a) const;

 private:
  std::size_t cell(int h, int x, int a) const {
    return (static_cast<std::size_t>(h) * shape_.states + x) * shape_.actions + a;
  }

  Shape shape_;
  double lambda_ = 1.0;
  std::vector<int> counts2_;
  std::vector<int> counts3_;
  std::vector<double> reward_sums_;
  std::vector<double> utility_sums_;
};

/// Q_r = [min(H-h+1, r_hat + P_hat V_r + 2 Gamma)]_+ and the same for g
/// with + lv inside the min; V = <Q, pi>.
OptimisticEstimate ope_tabular(Shape shape, int initial_state, const TrajectoryWindow& window,
                               const PolicyTable& policy, const EvaluatorParams& params);

/// Per-cell pieces of the linear backend, (H, S, A) each.
struct LstdDiagnostics {
  std::vector<double> reward_fit;         // phi' u_r
  std::vector<double> utility_fit;        // phi' u_g
  std::vector<double> reward_transition;  // phi_r' w_r, phi_r = sum_x' psi V_{r,h+1}
  std::vector<double> utility_transition;
  std::vector<double> bonus;              // beta sqrt(phi' Lambda^{-1} phi)
  std::vector<double> reward_bonus;       // beta sqrt(phi_r' Lambda_r^{-1} phi_r)
  std::vector<double> utility_bonus;
};

struct LstdEstimate {
  OptimisticEstimate estimate;
  LstdDiagnostics diagnostics;
};

/// Condition-number ceiling for Gram matrices.
inline constexpr double kMaxGramCondition = 1e12;

/// Regularized least-squares evaluation with UCB bonuses. Regression
/// targets use V_{h+1} from the same backward pass. Throws NumericalError
/// when a Gram matrix exceeds kMaxGramCondition.
LstdEstimate lstd_ucb(const LinearKernelModel& features, int initial_state,
                      const TrajectoryWindow& window, const PolicyTable& policy,
                      const EvaluatorParams& params);

enum class Assumption { local_budget, slater };
enum class Setting { tabular, linear };

std::string to_string(Assumption a);
std::string to_string(Setting s);
Assumption parse_assumption(const std::string& text);
Setting parse_setting(const std::string& text);

/// Drift slack added to the utility estimate. Local budgets:
/// tabular B_P H + B_g, linear B_P H^2 d1 sqrt(d1 W) + B_g sqrt(d2 W).
/// Zero under strict feasibility.
double lv_slack(Assumption assumption, Setting setting, double epoch_b_p, double epoch_b_g,
                int horizon, int d1, int d2, int window_length);

}  // namespace ncmdp
