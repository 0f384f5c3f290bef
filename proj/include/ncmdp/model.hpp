#pragma once

// Finite episodic constrained MDPs and exact (model-known) evaluation.
//
// Indexing convention used throughout the library: steps h run 0..H-1 in
// code (step 1..H in the usual episodic notation), and value tables carry
// one extra terminal step H that is identically zero.

#include <cstddef>
#include <span>
#include <vector>

namespace ncmdp {

/// Row-stochastic validation tolerance for transition kernels and policies.
inline constexpr double kProbabilityTolerance = 1e-9;

struct Shape {
  int states = 0;
  int actions = 0;
  int horizon = 0;

  bool operator==(const Shape&) const = default;

  std::size_t state_actions() const {
    return static_cast<std::size_t>(states) * static_cast<std::size_t>(actions);
  }
  /// Number of (h, x, a) cells.
  std::size_t step_cells() const { return static_cast<std::size_t>(horizon) * state_actions(); }
  /// Throws std::invalid_argument unless every dimension is positive.
  void validate() const;
};

/// Reward or utility signal selector (the diamond in r/g formulas).
enum class Signal { reward, utility };

/// One episode's CMDP: transitions P_h(x'|x,a), reward r_h(x,a), utility
/// g_h(x,a), constraint offset b and the fixed initial state x_1.
///
/// Tables are dense row-major: transition is (H, S, A, S), reward and
/// utility are (H, S, A). Rows whose sum deviates from one by less than
/// kProbabilityTolerance are renormalized; larger deviations, negative
/// entries, rewards outside [0,1] or b outside [0,H] are rejected with
/// std::invalid_argument. b = 0 is accepted for degenerate test instances.
class EpisodeModel {
 public:
  EpisodeModel(Shape shape, std::vector<double> transition, std::vector<double> reward,
               std::vector<double> utility, double constraint_offset, int initial_state = 0);

  const Shape& shape() const { return shape_; }
  int num_states() const { return shape_.states; }
  int num_actions() const { return shape_.actions; }
  int horizon() const { return shape_.horizon; }
  double constraint_offset() const { return constraint_offset_; }
  int initial_state() const { return initial_state_; }

  double transition(int h, int x, int a, int next) const {
    return transition_[row_offset(h, x, a) + static_cast<std::size_t>(next)];
  }
  std::span<const double> transition_row(int h, int x, int a) const {
    return {transition_.data() + row_offset(h, x, a), static_cast<std::size_t>(shape_.states)};
  }
  double reward(int h, int x, int a) const { return reward_[cell(h, x, a)]; }
  double utility(int h, int x, int a) const { return utility_[cell(h, x, a)]; }
  double signal(Signal s, int h, int x, int a) const {
    return s == Signal::reward ? reward(h, x, a) : utility(h, x, a);
  }

  const std::vector<double>& transition_table() const { return transition_; }
  const std::vector<double>& reward_table() const { return reward_; }
  const std::vector<double>& utility_table() const { return utility_; }
  const std::vector<double>& signal_table(Signal s) const {
    return s == Signal::reward ? reward_ : utility_;
  }

  EpisodeModel with_constraint_offset(double b) const;

  /// Exact table equality (used to detect piecewise-constant repeats).
  bool operator==(const EpisodeModel&) const = default;

 private:
  std::size_t cell(int h, int x, int a) const {
    return (static_cast<std::size_t>(h) * shape_.states + x) * shape_.actions + a;
  }
  std::size_t row_offset(int h, int x, int a) const { return cell(h, x, a) * shape_.states; }

  Shape shape_;
  std::vector<double> transition_;
  std::vector<double> reward_;
  std::vector<double> utility_;
  double constraint_offset_ = 0.0;
  int initial_state_ = 0;
};

/// Per-step state-conditional action distributions pi_h(a|x), (H, S, A).
class PolicyTable {
 public:
  PolicyTable(Shape shape, std::vector<double> probs);
  static PolicyTable uniform(Shape shape);

  const Shape& shape() const { return shape_; }
  double prob(int h, int x, int a) const { return probs_[cell(h, x, a)]; }
  std::span<const double> row(int h, int x) const {
    return {probs_.data() + cell(h, x, 0), static_cast<std::size_t>(shape_.actions)};
  }
  const std::vector<double>& table() const { return probs_; }

  bool operator==(const PolicyTable&) const = default;

 private:
  std::size_t cell(int h, int x, int a) const {
    return (static_cast<std::size_t>(h) * shape_.states + x) * shape_.actions + a;
  }

  Shape shape_;
  std::vector<double> probs_;
};

/// Value and action-value tables for reward and utility. V is (H+1, S), Q is
/// (H+1, S, A); step H (the terminal step) is identically zero.
struct ValuePair {
  Shape shape;
  std::vector<double> v_r;
  std::vector<double> v_g;
  std::vector<double> q_r;
  std::vector<double> q_g;

  static ValuePair zeros(Shape shape);

  std::size_t v_index(int h, int x) const {
    return static_cast<std::size_t>(h) * shape.states + x;
  }
  std::size_t q_index(int h, int x, int a) const {
    return (static_cast<std::size_t>(h) * shape.states + x) * shape.actions + a;
  }

  double& v(Signal s, int h, int x) { return (s == Signal::reward ? v_r : v_g)[v_index(h, x)]; }
  double v(Signal s, int h, int x) const {
    return (s == Signal::reward ? v_r : v_g)[v_index(h, x)];
  }
  double& q(Signal s, int h, int x, int a) {
    return (s == Signal::reward ? q_r : q_g)[q_index(h, x, a)];
  }
  double q(Signal s, int h, int x, int a) const {
    return (s == Signal::reward ? q_r : q_g)[q_index(h, x, a)];
  }

  /// Q over the H decision steps only, (H, S, A) row-major.
  std::span<const double> q_steps(Signal s) const {
    const auto& t = s == Signal::reward ? q_r : q_g;
    return {t.data(), shape.step_cells()};
  }
};

/// Backward induction of the policy Bellman equation on the true model.
ValuePair evaluate_exact(const EpisodeModel& model, const PolicyTable& policy);

/// Modified Lagrangian V_r + mu (V_g - b) + (xi/2) mu^2. xi = 0 gives the
/// plain Lagrangian. Negative mu or xi throw std::invalid_argument.
double lagrangian(double v_r1, double v_g1, double b, double mu, double xi);

/// iota_h(x,a) = signal_h(x,a) + (P_h V_{h+1})(x,a) - Q_h(x,a), (H, S, A).
struct PredictionError {
  Shape shape;
  std::vector<double> reward;
  std::vector<double> utility;

  double at(Signal s, int h, int x, int a) const {
    const auto& t = s == Signal::reward ? reward : utility;
    return t[(static_cast<std::size_t>(h) * shape.states + x) * shape.actions + a];
  }
};

PredictionError model_prediction_error(const EpisodeModel& model, const ValuePair& estimate);

/// Probability of (x_h = x, a_h = a) under the policy, (H, S, A).
std::vector<double> state_action_occupancy(const EpisodeModel& model, const PolicyTable& policy);
/// Probability of x_h = x under the policy, (H, S).
std::vector<double> state_occupancy(const EpisodeModel& model, const PolicyTable& policy);

/// Optimal value of an unconstrained finite-horizon problem with the given
/// per-step payoff table (H, S, A), plus one greedy deterministic maximizer.
struct OptimalValue {
  double value = 0.0;          // V_1(x_1)
  std::vector<double> values;  // (H+1, S)
  PolicyTable policy;
};

OptimalValue maximize_payoff(const EpisodeModel& model, std::span<const double> payoff);

/// KL divergence D(p || q) between two distributions over the same support.
/// Terms with p_i = 0 contribute zero; returns +inf if q_i = 0 < p_i.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Feature-based view of an episode model: P_h(x'|x,a) = <psi(x,a,x'), theta_h>,
/// r_h(x,a) = <phi(x,a), theta_{r,h}>, g_h(x,a) = <phi(x,a), theta_{g,h}>.
///
/// psi is stored (S, A, S, d1), phi is (S, A, d2), theta_p is (H, d1) and
/// theta_r / theta_g are (H, d2).
class LinearKernelModel {
 public:
  LinearKernelModel(Shape shape, int d1, int d2, std::vector<double> psi, std::vector<double> phi,
                    std::vector<double> theta_p, std::vector<double> theta_r,
                    std::vector<double> theta_g);

  /// Tabular embedding psi = e_(x,a,x'), phi = e_(x,a), theta = flattened tables.
  static LinearKernelModel canonical(const EpisodeModel& model);

  /// Reconstructs the tables; exact for the canonical embedding.
  EpisodeModel to_episode_model(double constraint_offset, int initial_state) const;

  const Shape& shape() const { return shape_; }
  int d1() const { return d1_; }
  int d2() const { return d2_; }
  int d() const { return d1_ > d2_ ? d1_ : d2_; }

  std::span<const double> psi(int x, int a, int next) const {
    const std::size_t idx =
        ((static_cast<std::size_t>(x) * shape_.actions + a) * shape_.states + next) * d1_;
    return {psi_.data() + idx, static_cast<std::size_t>(d1_)};
  }
  std::span<const double> phi(int x, int a) const {
    const std::size_t idx = (static_cast<std::size_t>(x) * shape_.actions + a) * d2_;
    return {phi_.data() + idx, static_cast<std::size_t>(d2_)};
  }
  std::span<const double> theta_p(int h) const {
    return {theta_p_.data() + static_cast<std::size_t>(h) * d1_, static_cast<std::size_t>(d1_)};
  }
  std::span<const double> theta(Signal s, int h) const {
    const auto& t = s == Signal::reward ? theta_r_ : theta_g_;
    return {t.data() + static_cast<std::size_t>(h) * d2_, static_cast<std::size_t>(d2_)};
  }

 private:
  Shape shape_;
  int d1_ = 0;
  int d2_ = 0;
  std::vector<double> psi_;
  std::vector<double> phi_;
  std::vector<double> theta_p_;
  std::vector<double> theta_r_;
  std::vector<double> theta_g_;
};

}  // namespace ncmdp
