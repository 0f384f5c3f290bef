#include "ncmdp/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ncmdp {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

// Validates one distribution in place; renormalizes sub-tolerance drift.
void normalize_row(std::span<double> row, const char* what) {
  double sum = 0.0;
  for (double p : row) {
    require(std::isfinite(p) && p >= 0.0, std::string(what) + ": negative or non-finite entry");
    sum += p;
  }
  const double deviation = std::abs(sum - 1.0);
  require(deviation < kProbabilityTolerance,
          std::string(what) + ": row sums to " + std::to_string(sum));
  // Rows that are already stochastic to rounding are left bit-identical.
  if (deviation > 1e-12) {
    for (double& p : row) p /= sum;
  }
}

void check_unit_interval(const std::vector<double>& table, const char* what) {
  for (double v : table) {
    require(std::isfinite(v) && v >= 0.0 && v <= 1.0, std::string(what) + " entry outside [0,1]");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

}  // namespace

void Shape::validate() const {
  require(states > 0 && actions > 0 && horizon > 0, "shape dimensions must be positive");
}

EpisodeModel::EpisodeModel(Shape shape, std::vector<double> transition, std::vector<double> reward,
                           std::vector<double> utility, double constraint_offset, int initial_state)
    : shape_(shape),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      utility_(std::move(utility)),
      constraint_offset_(constraint_offset),
      initial_state_(initial_state) {
  shape_.validate();
  require(transition_.size() == shape_.step_cells() * shape_.states,
          "transition table has wrong size");
  require(reward_.size() == shape_.step_cells(), "reward table has wrong size");
  require(utility_.size() == shape_.step_cells(), "utility table has wrong size");
  require(initial_state_ >= 0 && initial_state_ < shape_.states, "initial state out of range");
  require(std::isfinite(constraint_offset_) && constraint_offset_ >= 0.0 &&
              constraint_offset_ <= shape_.horizon,
          "constraint offset must lie in [0, H]");
  const auto n = static_cast<std::size_t>(shape_.states);
  for (std::size_t row = 0; row < shape_.step_cells(); ++row) {
    normalize_row(std::span<double>(transition_.data() + row * n, n), "transition");
  }
  check_unit_interval(reward_, "reward");
  check_unit_interval(utility_, "utility");
}

EpisodeModel EpisodeModel::with_constraint_offset(double b) const {
  return EpisodeModel(shape_, transition_, reward_, utility_, b, initial_state_);
}

PolicyTable::PolicyTable(Shape shape, std::vector<double> probs)
    : shape_(shape), probs_(std::move(probs)) {
  shape_.validate();
  require(probs_.size() == shape_.step_cells(), "policy table has wrong size");
  const auto n = static_cast<std::size_t>(shape_.actions);
  for (std::size_t row = 0; row < static_cast<std::size_t>(shape_.horizon) * shape_.states; ++row) {
    normalize_row(std::span<double>(probs_.data() + row * n, n), "policy");
  }
}

PolicyTable PolicyTable::uniform(Shape shape) {
  shape.validate();
  return PolicyTable(shape, std::vector<double>(shape.step_cells(), 1.0 / shape.actions));
}

ValuePair ValuePair::zeros(Shape shape) {
  shape.validate();
  const auto steps = static_cast<std::size_t>(shape.horizon + 1);
  const std::size_t nv = steps * shape.states;
  const std::size_t nq = nv * shape.actions;
  return ValuePair{shape, std::vector<double>(nv, 0.0), std::vector<double>(nv, 0.0),
                   std::vector<double>(nq, 0.0), std::vector<double>(nq, 0.0)};
}

ValuePair evaluate_exact(const EpisodeModel& model, const PolicyTable& policy) {
  const Shape& s = model.shape();
  require(policy.shape() == s, "policy shape does not match model");
  ValuePair out = ValuePair::zeros(s);
  for (int h = s.horizon - 1; h >= 0; --h) {
    for (int x = 0; x < s.states; ++x) {
      double vr = 0.0;
      double vg = 0.0;
      for (int a = 0; a < s.actions; ++a) {
        const auto row = model.transition_row(h, x, a);
        double next_r = 0.0;
        double next_g = 0.0;
        for (int y = 0; y < s.states; ++y) {
          next_r += row[y] * out.v(Signal::reward, h + 1, y);
          next_g += row[y] * out.v(Signal::utility, h + 1, y);
        }
        const double qr = model.reward(h, x, a) + next_r;
        const double qg = model.utility(h, x, a) + next_g;
        out.q(Signal::reward, h, x, a) = qr;
        out.q(Signal::utility, h, x, a) = qg;
        vr += policy.prob(h, x, a) * qr;
        vg += policy.prob(h, x, a) * qg;
      }
      out.v(Signal::reward, h, x) = vr;
      out.v(Signal::utility, h, x) = vg;
    }
  }
  return out;
}

double lagrangian(double v_r1, double v_g1, double b, double mu, double xi) {
  require(mu >= 0.0, "lagrangian: mu must be nonnegative");
  require(xi >= 0.0, "lagrangian: xi must be nonnegative");
  return v_r1 + mu * (v_g1 - b) + 0.5 * xi * mu * mu;
}

PredictionError model_prediction_error(const EpisodeModel& model, const ValuePair& estimate) {
  const Shape& s = model.shape();
  require(estimate.shape == s, "estimate shape does not match model");
  require(estimate.v_r.size() == static_cast<std::size_t>(s.horizon + 1) * s.states &&
              estimate.q_r.size() == static_cast<std::size_t>(s.horizon + 1) * s.state_actions() &&
              estimate.v_g.size() == estimate.v_r.size() &&
              estimate.q_g.size() == estimate.q_r.size(),
          "estimate tables have wrong size");
  PredictionError err{s, std::vector<double>(s.step_cells()), std::vector<double>(s.step_cells())};
  std::size_t idx = 0;
  for (int h = 0; h < s.horizon; ++h) {
    for (int x = 0; x < s.states; ++x) {
      for (int a = 0; a < s.actions; ++a, ++idx) {
        const auto row = model.transition_row(h, x, a);
        for (Signal sig : {Signal::reward, Signal::utility}) {
          double backup = model.signal(sig, h, x, a);
          for (int y = 0; y < s.states; ++y) backup += row[y] * estimate.v(sig, h + 1, y);
          const double iota = backup - estimate.q(sig, h, x, a);
          (sig == Signal::reward ? err.reward : err.utility)[idx] = iota;
        }
      }
    }
  }
  return err;
}

std::vector<double> state_action_occupancy(const EpisodeModel& model, const PolicyTable& policy) {
  const Shape& s = model.shape();
  require(policy.shape() == s, "policy shape does not match model");
  std::vector<double> occ(s.step_cells(), 0.0);
  std::vector<double> dist(s.states, 0.0);
  dist[model.initial_state()] = 1.0;
  for (int h = 0; h < s.horizon; ++h) {
    std::vector<double> next(s.states, 0.0);
    for (int x = 0; x < s.states; ++x) {
      if (dist[x] == 0.0) continue;
      for (int a = 0; a < s.actions; ++a) {
        const double w = dist[x] * policy.prob(h, x, a);
        occ[(static_cast<std::size_t>(h) * s.states + x) * s.actions + a] = w;
        if (w == 0.0) continue;
        const auto row = model.transition_row(h, x, a);
        for (int y = 0; y < s.states; ++y) next[y] += w * row[y];
      }
    }
    dist = std::move(next);
  }
  return occ;
}

std::vector<double> state_occupancy(const EpisodeModel& model, const PolicyTable& policy) {
  const Shape& s = model.shape();
  const auto occ = state_action_occupancy(model, policy);
  std::vector<double> out(static_cast<std::size_t>(s.horizon) * s.states, 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (int a = 0; a < s.actions; ++a) out[i] += occ[i * s.actions + a];
  }
  return out;
}

OptimalValue maximize_payoff(const EpisodeModel& model, std::span<const double> payoff) {
  const Shape& s = model.shape();
  require(payoff.size() == s.step_cells(), "payoff table has wrong size");
  std::vector<double> values(static_cast<std::size_t>(s.horizon + 1) * s.states, 0.0);
  std::vector<double> greedy(s.step_cells(), 0.0);
  for (int h = s.horizon - 1; h >= 0; --h) {
    const double* next_v = values.data() + static_cast<std::size_t>(h + 1) * s.states;
    for (int x = 0; x < s.states; ++x) {
      double best = -std::numeric_limits<double>::infinity();
      int best_a = 0;
      for (int a = 0; a < s.actions; ++a) {
        const auto row = model.transition_row(h, x, a);
        double q = payoff[(static_cast<std::size_t>(h) * s.states + x) * s.actions + a];
        for (int y = 0; y < s.states; ++y) q += row[y] * next_v[y];
        if (q > best) {
          best = q;
          best_a = a;
        }
      }
      values[static_cast<std::size_t>(h) * s.states + x] = best;
      greedy[(static_cast<std::size_t>(h) * s.states + x) * s.actions + best_a] = 1.0;
    }
  }
  const double v1 = values[model.initial_state()];
  return OptimalValue{v1, std::move(values), PolicyTable(s, std::move(greedy))};
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size(), "kl_divergence: size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    d += p[i] * std::log(p[i] / q[i]);
  }
  return d;
}

LinearKernelModel::LinearKernelModel(Shape shape, int d1, int d2, std::vector<double> psi,
                                     std::vector<double> phi, std::vector<double> theta_p,
                                     std::vector<double> theta_r, std::vector<double> theta_g)
    : shape_(shape),
      d1_(d1),
      d2_(d2),
      psi_(std::move(psi)),
      phi_(std::move(phi)),
      theta_p_(std::move(theta_p)),
      theta_r_(std::move(theta_r)),
      theta_g_(std::move(theta_g)) {
  shape_.validate();
  require(d1_ > 0 && d2_ > 0, "feature dimensions must be positive");
  const auto sa = shape_.state_actions();
  const auto horizon = static_cast<std::size_t>(shape_.horizon);
  require(psi_.size() == sa * shape_.states * d1_, "psi has wrong size");
  require(phi_.size() == sa * d2_, "phi has wrong size");
  require(theta_p_.size() == horizon * d1_, "theta_p has wrong size");
  require(theta_r_.size() == horizon * d2_ && theta_g_.size() == horizon * d2_,
          "theta_r/theta_g have wrong size");

  const double tol = kProbabilityTolerance;
  for (int h = 0; h < shape_.horizon; ++h) {
    require(l2_norm(this->theta_p(h)) <= std::sqrt(static_cast<double>(d1_)) + tol,
            "theta_p norm exceeds sqrt(d1)");
    require(l2_norm(theta(Signal::reward, h)) <= std::sqrt(static_cast<double>(d2_)) + tol &&
                l2_norm(theta(Signal::utility, h)) <= std::sqrt(static_cast<double>(d2_)) + tol,
            "theta_r/theta_g norm exceeds sqrt(d2)");
    for (int x = 0; x < shape_.states; ++x) {
      for (int a = 0; a < shape_.actions; ++a) {
        double sum = 0.0;
        for (int y = 0; y < shape_.states; ++y) {
          const double p = dot(this->psi(x, a, y), this->theta_p(h));
          require(p >= -tol, "feature kernel produces a negative probability");
          sum += p;
        }
        require(std::abs(sum - 1.0) < tol, "feature kernel rows do not sum to one");
      }
    }
  }
}

LinearKernelModel LinearKernelModel::canonical(const EpisodeModel& model) {
  const Shape& s = model.shape();
  const int d1 = static_cast<int>(s.state_actions() * s.states);
  const int d2 = static_cast<int>(s.state_actions());
  std::vector<double> psi(static_cast<std::size_t>(d1) * d1, 0.0);
  for (int i = 0; i < d1; ++i) psi[static_cast<std::size_t>(i) * d1 + i] = 1.0;
  std::vector<double> phi(static_cast<std::size_t>(d2) * d2, 0.0);
  for (int i = 0; i < d2; ++i) phi[static_cast<std::size_t>(i) * d2 + i] = 1.0;
  // (H,S,A,S) and (H,S,A) flatten to per-step theta blocks directly.
  return LinearKernelModel(s, d1, d2, std::move(psi), std::move(phi), model.transition_table(),
                           model.reward_table(), model.utility_table());
}

EpisodeModel LinearKernelModel::to_episode_model(double constraint_offset,
                                                 int initial_state) const {
  const Shape& s = shape_;
  std::vector<double> transition;
  std::vector<double> reward;
  std::vector<double> utility;
  transition.reserve(s.step_cells() * s.states);
  reward.reserve(s.step_cells());
  utility.reserve(s.step_cells());
  for (int h = 0; h < s.horizon; ++h) {
    for (int x = 0; x < s.states; ++x) {
      for (int a = 0; a < s.actions; ++a) {
        for (int y = 0; y < s.states; ++y) transition.push_back(dot(psi(x, a, y), theta_p(h)));
        reward.push_back(dot(phi(x, a), theta(Signal::reward, h)));
        utility.push_back(dot(phi(x, a), theta(Signal::utility, h)));
      }
    }
  }
  return EpisodeModel(s, std::move(transition), std::move(reward), std::move(utility),
                      constraint_offset, initial_state);
}

}  // namespace ncmdp
