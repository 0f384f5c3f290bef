#pragma once

// Periodically restarted optimistic primal-dual policy optimization.
//
// Each episode m: restart the policy to uniform every L episodes, take an
// exponentiated-gradient step on Q_r + mu Q_g, roll out one trajectory on
// the true model, move the multiplier by projected regularized dual
// ascent, and re-evaluate the new policy optimistically on the trajectories
// collected since the last evaluation restart (every W episodes).

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncmdp/env_gen.hpp"
#include "ncmdp/model.hpp"
#include "ncmdp/policy_eval.hpp"

namespace ncmdp {

struct LearnerConfig {
  double alpha = 0.1;   // policy step size
  double eta = 0.1;     // dual step size
  double xi = 0.0;      // dual regularization
  double chi = std::numeric_limits<double>::infinity();  // dual cap
  int restart_period = 1;  // L: policy restarts
  int window_period = 1;   // W: evaluation window restarts
  double beta = 0.0;    // bonus scale
  double lambda = 1.0;  // ridge
  Assumption assumption = Assumption::slater;
  Setting setting = Setting::tabular;
  double rho = 0.5;
  std::array<double, 6> constants{1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  double confidence = 0.1;  // p
  /// false pins mu at zero (ablation).
  bool dual_updates = true;
  /// Add the local-budget drift slack to the utility estimate.
  bool drift_slack = true;
  /// Set by preset_params when eta had to be lowered to keep xi eta <= 1/2.
  bool eta_capped = false;

  /// Throws std::invalid_argument. Local budgets need xi > 0, chi = inf and
  /// xi eta <= 1/2; strict feasibility needs xi = 0 and a finite chi.
  void validate() const;
};

struct DualState {
  double mu = 0.0;
  std::vector<double> history;
};

struct RestartIndices {
  int policy = 1;      // l_pi = (ceil(m/L) - 1) L + 1
  int evaluation = 1;  // l_Q  = (ceil(m/W) - 1) W + 1
};

RestartIndices restart_indices(int m, int restart_period, int window_period);

/// pi'(a|x) proportional to pi(a|x) exp(alpha (Q_r + mu Q_g)(x,a)), per (h,x).
/// q_r and q_g are (H, S, A). Throws on non-finite input.
PolicyTable policy_improve(const PolicyTable& prev, std::span<const double> q_r,
                           std::span<const double> q_g, double mu, double alpha);

/// mu' = Proj_[0,chi](mu + eta (b - v_g1_est - xi mu)); appends to history.
/// With dual_updates off the multiplier stays at zero.
DualState dual_update(const DualState& state, double b, double v_g1_est,
                      const LearnerConfig& cfg);

struct PresetInput {
  int theorem = 3;  // 1, 2 linear; 3, 4 tabular
  int episodes = 1;
  int horizon = 1;
  int states = 1;
  int actions = 1;
  int d1 = 1;  // linear only
  int d2 = 1;
  double b_delta = 0.0;
  double b_star = 0.0;
  double gamma = 0.0;  // strict feasibility margin, theorems 2 and 4
  double rho = 0.5;
  double confidence = 0.1;
  std::array<double, 6> constants{1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  double lambda = 1.0;
};

/// Smallest budget accepted by preset_params; callers with measured zero
/// budgets (stationary environments) should floor to this value.
inline constexpr double kBudgetFloor = 1e-6;

/// Closed-form step sizes, periods and bonus scale. L and W are rounded to
/// the nearest integer, floored at 1 and capped at the number of episodes
/// (longer periods never restart). Throws std::invalid_argument for
/// non-positive budgets or, for theorems 2 and 4, gamma <= 0.
LearnerConfig preset_params(const PresetInput& in);

struct EpisodeRecord {
  int episode = 0;
  PolicyTable policy;
  double mu = 0.0;        // mu^m
  double v_r1_est = 0.0;  // optimistic V_{r,1}^m(x_1)
  double v_g1_est = 0.0;
  double lv = 0.0;        // slack used in this episode's evaluation
  Trajectory trajectory;
};

struct EpisodeTrace {
  std::uint64_t seed = 0;
  LearnerConfig config;
  std::vector<EpisodeRecord> episodes;
};

struct RunOptions {
  /// Start the loop at this episode instead of 1 (restart-isolation checks).
  int first_episode = 1;
  double initial_mu = 0.0;
  double initial_v_g1 = 0.0;
  /// When set, the learner plays these policies instead of its own
  /// (one per episode, 1-based episode m uses element m - 1).
  std::span<const PolicyTable> forced_policies;
};

/// Thrown by run() with the failing episode.
class LearnerError : public std::runtime_error {
 public:
  LearnerError(const std::string& what, int episode)
      : std::runtime_error("episode " + std::to_string(episode) + ": " + what),
        episode_(episode) {}
  int episode() const { return episode_; }

 private:
  int episode_;
};

/// One trajectory under the policy on the true model; step h draws from
/// the stream keyed (seed, m, h).
Trajectory sample_trajectory(const EpisodeModel& model, const PolicyTable& policy,
                             std::uint64_t seed, int episode);

EpisodeTrace run(const NonStationaryCMDP& seq, const LearnerConfig& cfg, std::uint64_t seed,
                 const RunOptions& options = {});

}  // namespace ncmdp
