#include "ncmdp/policy_eval.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace ncmdp {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

double truncate(double value, int horizon, int h) {
  return std::max(0.0, std::min(static_cast<double>(horizon - h), value));
}

void check_window(Shape shape, const TrajectoryWindow& window) {
  for (const Trajectory& t : window.trajectories) {
    require(static_cast<int>(t.steps.size()) == shape.horizon,
            "trajectory length does not match horizon");
    for (const TransitionRecord& s : t.steps) {
      require(s.state >= 0 && s.state < shape.states && s.next_state >= 0 &&
                  s.next_state < shape.states && s.action >= 0 && s.action < shape.actions,
              "trajectory index out of range");
      require(s.reward >= 0.0 && s.reward <= 1.0 && s.utility >= 0.0 && s.utility <= 1.0,
              "observed signal outside [0,1]");
    }
  }
}

// V_h(x) = <Q_h(x,.), pi_h(.|x)> for both signals.
void close_step(ValuePair& out, const PolicyTable& policy, int h) {
  const Shape& s = out.shape;
  for (int x = 0; x < s.states; ++x) {
    double vr = 0.0;
    double vg = 0.0;
    for (int a = 0; a < s.actions; ++a) {
      vr += policy.prob(h, x, a) * out.q(Signal::reward, h, x, a);
      vg += policy.prob(h, x, a) * out.q(Signal::utility, h, x, a);
    }
    out.v(Signal::reward, h, x) = vr;
    out.v(Signal::utility, h, x) = vg;
  }
}

class GramSolver {
 public:
  explicit GramSolver(const Eigen::MatrixXd& gram) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > kMaxGramCondition) {
      throw NumericalError("Gram matrix condition number " + std::to_string(hi / lo) +
                           " exceeds limit");
    }
    llt_.compute(gram);
    if (llt_.info() != Eigen::Success) throw NumericalError("Gram matrix is not positive definite");
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return llt_.solve(rhs); }
  double quadratic_inverse(const Eigen::VectorXd& v) const {
    return std::max(0.0, v.dot(llt_.solve(v)));
  }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

}  // namespace

void EvaluatorParams::validate() const {
  require(lambda > 0.0 && std::isfinite(lambda), "lambda must be positive");
  require(beta >= 0.0 && std::isfinite(beta), "beta must be non-negative");
  require(lv >= 0.0 && std::isfinite(lv), "lv must be non-negative");
}

TabularEstimator TabularEstimator::fit(Shape shape, const TrajectoryWindow& window,
                                       double lambda) {
  shape.validate();
  require(lambda > 0.0, "lambda must be positive");
  check_window(shape, window);
  TabularEstimator est;
  est.shape_ = shape;
  est.lambda_ = lambda;
  est.counts2_.assign(shape.step_cells(), 0);
  est.counts3_.assign(shape.step_cells() * shape.states, 0);
  est.reward_sums_.assign(shape.step_cells(), 0.0);
  est.utility_sums_.assign(shape.step_cells(), 0.0);
  for (const Trajectory& t : window.trajectories) {
    for (int h = 0; h < shape.horizon; ++h) {
      const TransitionRecord& s = t.steps[static_cast<std::size_t>(h)];
      const std::size_t c = est.cell(h, s.state, s.action);
      ++est.counts2_[c];
      ++est.counts3_[c * shape.states + s.next_state];
      est.reward_sums_[c] += s.reward;
      est.utility_sums_[c] += s.utility;
    }
  }
  return est;
}

double TabularEstimator::bonus(double beta, int h, int x, int a) const {
  return beta / std::sqrt(count(h, x, a) + lambda_);
}

OptimisticEstimate ope_tabular(Shape shape, int initial_state, const TrajectoryWindow& window,
                               const PolicyTable& policy, const EvaluatorParams& params) {
  params.validate();
  require(policy.shape() == shape, "policy shape mismatch");
  require(initial_state >= 0 && initial_state < shape.states, "initial state out of range");
  const TabularEstimator est = TabularEstimator::fit(shape, window, params.lambda);

  ValuePair out = ValuePair::zeros(shape);
  for (int h = shape.horizon - 1; h >= 0; --h) {
    for (int x = 0; x < shape.states; ++x) {
      for (int a = 0; a < shape.actions; ++a) {
        double next_r = 0.0;
        double next_g = 0.0;
        for (int y = 0; y < shape.states; ++y) {
          const double p = est.p_hat(h, x, a, y);
          next_r += p * out.v(Signal::reward, h + 1, y);
          next_g += p * out.v(Signal::utility, h + 1, y);
        }
        const double bonus = 2.0 * est.bonus(params.beta, h, x, a);
        out.q(Signal::reward, h, x, a) =
            truncate(est.signal_hat(Signal::reward, h, x, a) + next_r + bonus, shape.horizon, h);
        out.q(Signal::utility, h, x, a) = truncate(
            est.signal_hat(Signal::utility, h, x, a) + next_g + bonus + params.lv, shape.horizon, h);
      }
    }
    close_step(out, policy, h);
  }
  const double vr = out.v(Signal::reward, 0, initial_state);
  const double vg = out.v(Signal::utility, 0, initial_state);
  return {std::move(out), vr, vg};
}

LstdEstimate lstd_ucb(const LinearKernelModel& features, int initial_state,
                      const TrajectoryWindow& window, const PolicyTable& policy,
                      const EvaluatorParams& params) {
  params.validate();
  const Shape& shape = features.shape();
  require(policy.shape() == shape, "policy shape mismatch");
  require(initial_state >= 0 && initial_state < shape.states, "initial state out of range");
  check_window(shape, window);

  const int d1 = features.d1();
  const int d2 = features.d2();
  const int S = shape.states;
  const int A = shape.actions;
  const std::size_t cells = shape.step_cells();

  LstdEstimate result;
  ValuePair& out = result.estimate.values;
  out = ValuePair::zeros(shape);
  LstdDiagnostics& diag = result.diagnostics;
  for (auto* t : {&diag.reward_fit, &diag.utility_fit, &diag.reward_transition,
                  &diag.utility_transition, &diag.bonus, &diag.reward_bonus,
                  &diag.utility_bonus}) {
    t->assign(cells, 0.0);
  }

  auto phi = [&](int x, int a) {
    return Eigen::Map<const Eigen::VectorXd>(features.phi(x, a).data(), d2);
  };

  for (int h = shape.horizon - 1; h >= 0; --h) {
    // Reward/utility regression on phi(x,a).
    Eigen::MatrixXd gram = params.lambda * Eigen::MatrixXd::Identity(d2, d2);
    Eigen::VectorXd target_r = Eigen::VectorXd::Zero(d2);
    Eigen::VectorXd target_g = Eigen::VectorXd::Zero(d2);
    for (const Trajectory& t : window.trajectories) {
      const TransitionRecord& s = t.steps[static_cast<std::size_t>(h)];
      const Eigen::VectorXd f = phi(s.state, s.action);
      gram.noalias() += f * f.transpose();
      target_r += s.reward * f;
      target_g += s.utility * f;
    }
    const GramSolver signal_solver(gram);
    const Eigen::VectorXd u_r = signal_solver.solve(target_r);
    const Eigen::VectorXd u_g = signal_solver.solve(target_g);

    // Transition regression on phi_V(x,a) = sum_x' psi(x,a,x') V_{h+1}(x'),
    // one per signal.
    for (Signal sig : {Signal::reward, Signal::utility}) {
      Eigen::MatrixXd integrated = Eigen::MatrixXd::Zero(d1, static_cast<Eigen::Index>(S) * A);
      for (int x = 0; x < S; ++x) {
        for (int a = 0; a < A; ++a) {
          auto col = integrated.col(static_cast<Eigen::Index>(x) * A + a);
          for (int y = 0; y < S; ++y) {
            const double v = out.v(sig, h + 1, y);
            if (v == 0.0) continue;
            col += v * Eigen::Map<const Eigen::VectorXd>(features.psi(x, a, y).data(), d1);
          }
        }
      }
      Eigen::MatrixXd gram_v = params.lambda * Eigen::MatrixXd::Identity(d1, d1);
      Eigen::VectorXd target_v = Eigen::VectorXd::Zero(d1);
      for (const Trajectory& t : window.trajectories) {
        const TransitionRecord& s = t.steps[static_cast<std::size_t>(h)];
        const Eigen::VectorXd f = integrated.col(static_cast<Eigen::Index>(s.state) * A + s.action);
        gram_v.noalias() += f * f.transpose();
        target_v += out.v(sig, h + 1, s.next_state) * f;
      }
      const GramSolver value_solver(gram_v);
      const Eigen::VectorXd w = value_solver.solve(target_v);

      auto& transition = sig == Signal::reward ? diag.reward_transition : diag.utility_transition;
      auto& value_bonus = sig == Signal::reward ? diag.reward_bonus : diag.utility_bonus;
      for (int x = 0; x < S; ++x) {
        for (int a = 0; a < A; ++a) {
          const Eigen::VectorXd f = integrated.col(static_cast<Eigen::Index>(x) * A + a);
          const std::size_t c = out.q_index(h, x, a);
          transition[c] = f.dot(w);
          value_bonus[c] = params.beta * std::sqrt(value_solver.quadratic_inverse(f));
        }
      }
    }

    for (int x = 0; x < S; ++x) {
      for (int a = 0; a < A; ++a) {
        const std::size_t c = out.q_index(h, x, a);
        const Eigen::VectorXd f = phi(x, a);
        diag.reward_fit[c] = f.dot(u_r);
        diag.utility_fit[c] = f.dot(u_g);
        diag.bonus[c] = params.beta * std::sqrt(signal_solver.quadratic_inverse(f));
        out.q_r[c] = truncate(
            diag.reward_fit[c] + diag.reward_transition[c] + diag.bonus[c] + diag.reward_bonus[c],
            shape.horizon, h);
        out.q_g[c] = truncate(diag.utility_fit[c] + diag.utility_transition[c] + diag.bonus[c] +
                                  diag.utility_bonus[c] + params.lv,
                              shape.horizon, h);
      }
    }
    close_step(out, policy, h);
  }
  result.estimate.v_r1 = out.v(Signal::reward, 0, initial_state);
  result.estimate.v_g1 = out.v(Signal::utility, 0, initial_state);
  return result;
}

std::string to_string(Assumption a) {
  return a == Assumption::local_budget ? "local_budget" : "slater";
}

std::string to_string(Setting s) { return s == Setting::tabular ? "tabular" : "linear"; }

Assumption parse_assumption(const std::string& text) {
  if (text == "local_budget") return Assumption::local_budget;
  if (text == "slater") return Assumption::slater;
  throw std::invalid_argument("unknown assumption '" + text + "'");
}

Setting parse_setting(const std::string& text) {
  if (text == "tabular") return Setting::tabular;
  if (text == "linear") return Setting::linear;
  throw std::invalid_argument("unknown setting '" + text + "'");
}

double lv_slack(Assumption assumption, Setting setting, double epoch_b_p, double epoch_b_g,
                int horizon, int d1, int d2, int window_length) {
  require(epoch_b_p >= 0.0 && epoch_b_g >= 0.0, "budgets must be non-negative");
  if (assumption == Assumption::slater) return 0.0;
  const double H = horizon;
  if (setting == Setting::tabular) return epoch_b_p * H + epoch_b_g;
  const double W = window_length;
  return epoch_b_p * H * H * d1 * std::sqrt(d1 * W) + epoch_b_g * std::sqrt(d2 * W);
}

}  // namespace ncmdp
