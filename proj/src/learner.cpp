#include "ncmdp/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "ncmdp/rng.hpp"

namespace ncmdp {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

int round_period(double value, int episodes) {
  if (!(value < static_cast<double>(episodes))) return episodes;
  return std::max(1, static_cast<int>(std::lround(value)));
}

}  // namespace

void LearnerConfig::validate() const {
  require(alpha > 0.0 && std::isfinite(alpha), "alpha must be positive");
  require(eta > 0.0 && std::isfinite(eta), "eta must be positive");
  require(xi >= 0.0 && std::isfinite(xi), "xi must be non-negative");
  require(chi > 0.0, "chi must be positive");
  require(restart_period >= 1 && window_period >= 1, "restart periods must be at least 1");
  require(beta >= 0.0 && std::isfinite(beta), "beta must be non-negative");
  require(lambda > 0.0 && std::isfinite(lambda), "lambda must be positive");
  require(rho >= 1.0 / 3.0 && rho <= 0.5, "rho must lie in [1/3, 1/2]");
  require(confidence > 0.0 && confidence < 1.0, "confidence must lie in (0, 1)");
  if (assumption == Assumption::local_budget) {
    require(xi > 0.0, "local-budget runs need xi > 0");
    require(std::isinf(chi), "local-budget runs need an unbounded dual (chi = inf)");
    require(xi * eta <= 0.5, "local-budget runs need xi * eta <= 1/2");
  } else {
    require(xi == 0.0, "strict-feasibility runs need xi = 0");
    require(std::isfinite(chi), "strict-feasibility runs need a finite chi = 2H/gamma");
  }
}

RestartIndices restart_indices(int m, int restart_period, int window_period) {
  require(m >= 1, "episode index must be positive");
  require(restart_period >= 1 && window_period >= 1, "restart periods must be at least 1");
  return {(m - 1) / restart_period * restart_period + 1,
          (m - 1) / window_period * window_period + 1};
}

PolicyTable policy_improve(const PolicyTable& prev, std::span<const double> q_r,
                           std::span<const double> q_g, double mu, double alpha) {
  const Shape& s = prev.shape();
  require(q_r.size() == s.step_cells() && q_g.size() == s.step_cells(), "Q table shape mismatch");
  require(mu >= 0.0 && std::isfinite(mu), "mu must be finite and non-negative");
  require(alpha > 0.0 && std::isfinite(alpha), "alpha must be positive");
  for (std::size_t i = 0; i < q_r.size(); ++i) {
    require(std::isfinite(q_r[i]) && std::isfinite(q_g[i]), "non-finite Q entry");
  }

  std::vector<double> probs(s.step_cells());
  std::vector<double> logits(static_cast<std::size_t>(s.actions));
  for (int h = 0; h < s.horizon; ++h) {
    for (int x = 0; x < s.states; ++x) {
      const std::size_t base = (static_cast<std::size_t>(h) * s.states + x) * s.actions;
      double top = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < s.actions; ++a) {
        const double p = prev.prob(h, x, a);
        logits[a] = p > 0.0 ? std::log(p) + alpha * (q_r[base + a] + mu * q_g[base + a])
                            : -std::numeric_limits<double>::infinity();
        top = std::max(top, logits[a]);
      }
      double total = 0.0;
      for (int a = 0; a < s.actions; ++a) {
        probs[base + a] = std::exp(logits[a] - top);
        total += probs[base + a];
      }
      for (int a = 0; a < s.actions; ++a) probs[base + a] /= total;
    }
  }
  return PolicyTable(s, std::move(probs));
}

DualState dual_update(const DualState& state, double b, double v_g1_est,
                      const LearnerConfig& cfg) {
  DualState next = state;
  if (cfg.dual_updates) {
    const double raw = state.mu + cfg.eta * (b - v_g1_est - cfg.xi * state.mu);
    next.mu = std::clamp(raw, 0.0, cfg.chi);
  } else {
    next.mu = 0.0;
  }
  next.history.push_back(next.mu);
  return next;
}

LearnerConfig preset_params(const PresetInput& in) {
  require(in.theorem >= 1 && in.theorem <= 4, "theorem must be 1, 2, 3 or 4");
  require(in.episodes >= 1 && in.horizon >= 1, "episodes and horizon must be positive");
  require(in.b_delta > 0.0,
          "B_delta must be positive; floor measured budgets at kBudgetFloor (1e-6)");
  require(in.b_star >= 0.0, "B_star must be non-negative");
  require(in.confidence > 0.0 && in.confidence < 1.0, "confidence must lie in (0, 1)");
  const bool slater = in.theorem == 2 || in.theorem == 4;
  if (slater) require(in.gamma > 0.0, "strict-feasibility presets need gamma > 0");

  const double M = in.episodes;
  const double H = in.horizon;
  const double p = in.confidence;
  const auto& C = in.constants;

  LearnerConfig cfg;
  cfg.lambda = in.lambda;
  cfg.rho = in.rho;
  cfg.constants = in.constants;
  cfg.confidence = in.confidence;
  cfg.assumption = slater ? Assumption::slater : Assumption::local_budget;
  cfg.setting = in.theorem <= 2 ? Setting::linear : Setting::tabular;

  double window = 0.0;
  double restart = 0.0;
  if (in.theorem <= 2) {
    require(in.d1 >= 1 && in.d2 >= 1, "feature dimensions must be positive");
    const double d = std::max(in.d1, in.d2);
    const double drift = std::sqrt(d) * in.b_delta + in.b_star;
    window = std::pow(d, -0.25) / H * std::sqrt(M) / std::sqrt(in.b_delta);
    if (in.theorem == 1) {
      cfg.alpha = std::cbrt(drift) / (H * std::sqrt(M));
      restart = std::pow(M, 0.75) * std::pow(drift, -2.0 / 3.0);
      cfg.eta = 1.0 / std::sqrt(M);
      cfg.xi = 2.0 * H * std::cbrt(drift) / std::sqrt(M);
    } else {
      cfg.alpha = in.gamma * std::pow(H, -1.5) * std::pow(M, -1.0 / 3.0) * std::cbrt(drift);
      restart = std::pow(M, 2.0 / 3.0) * std::pow(drift, -2.0 / 3.0);
      cfg.eta = 1.0 / std::sqrt(M);
      cfg.xi = 0.0;
    }
    cfg.window_period = round_period(window, in.episodes);
    cfg.beta = C[0] * std::sqrt(d * H * H * std::log(d * cfg.window_period / p));
  } else {
    require(in.states >= 1 && in.actions >= 1, "state and action counts must be positive");
    require(in.rho >= 1.0 / 3.0 && in.rho <= 0.5, "rho must lie in [1/3, 1/2]");
    const double S = in.states;
    const double A = in.actions;
    const double drift = in.b_delta + in.b_star;
    const double shape_factor = std::pow(S, 2.0 / 3.0) * std::cbrt(A);
    const double ratio = std::pow(M / in.b_delta, 2.0 / 3.0);
    if (in.theorem == 3) {
      cfg.alpha = std::pow(H, -1.0 / 3.0) * std::pow(M, -in.rho) * std::cbrt(drift);
      restart = std::pow(H, -1.0 / 3.0) * std::pow(M, (1.0 + in.rho) / 2.0) *
                std::pow(drift, -2.0 / 3.0);
      cfg.eta = std::pow(H, -1.0 / 3.0) / std::sqrt(M);
      cfg.xi = 2.0 * std::pow(H, 5.0 / 3.0) * std::cbrt(drift) * std::pow(M, -in.rho);
      window = std::pow(H, 2.0 / 3.0) * shape_factor * ratio;
    } else {
      cfg.alpha = in.gamma * std::pow(H, -1.5) * std::pow(M, -1.0 / 3.0) * std::cbrt(drift);
      restart = std::pow(M, 2.0 / 3.0) * std::pow(drift, -2.0 / 3.0);
      cfg.eta = 1.0 / std::sqrt(M);
      cfg.xi = 0.0;
      window = shape_factor * ratio;
    }
    cfg.window_period = round_period(window, in.episodes);
    cfg.beta = C[3] * H * std::sqrt(S * std::log(S * A * cfg.window_period / p));
  }
  cfg.restart_period = round_period(restart, in.episodes);
  cfg.chi = slater ? 2.0 * H / in.gamma : std::numeric_limits<double>::infinity();
  if (!slater && cfg.xi * cfg.eta > 0.5) {
    cfg.eta = 0.5 / cfg.xi;
    cfg.eta_capped = true;
  }
  cfg.validate();
  return cfg;
}

Trajectory sample_trajectory(const EpisodeModel& model, const PolicyTable& policy,
                             std::uint64_t seed, int episode) {
  require(policy.shape() == model.shape(), "policy shape mismatch");
  Trajectory t;
  t.steps.reserve(static_cast<std::size_t>(model.horizon()));
  int x = model.initial_state();
  for (int h = 0; h < model.horizon(); ++h) {
    CounterRng rng(seed, {static_cast<std::uint64_t>(episode), static_cast<std::uint64_t>(h)});
    const int a = rng.categorical(policy.row(h, x));
    const int next = rng.categorical(model.transition_row(h, x, a));
    t.steps.push_back({x, a, model.reward(h, x, a), model.utility(h, x, a), next});
    x = next;
  }
  return t;
}

EpisodeTrace run(const NonStationaryCMDP& seq, const LearnerConfig& cfg, std::uint64_t seed,
                 const RunOptions& options) {
  cfg.validate();
  const int M = static_cast<int>(seq.size());
  const int first = options.first_episode;
  require(first >= 1 && first <= M, "first episode out of range");
  require(options.forced_policies.empty() ||
              options.forced_policies.size() == static_cast<std::size_t>(M),
          "forced policies must cover every episode");
  require(options.initial_mu >= 0.0 && options.initial_mu <= cfg.chi,
          "initial mu outside [0, chi]");

  const Shape shape = seq.shape();
  const int x1 = seq.episode(1).initial_state();
  const std::size_t cells = shape.step_cells();

  std::optional<LinearKernelModel> features;
  if (cfg.setting == Setting::linear) features = LinearKernelModel::canonical(seq.episode(1));
  const int d1 = features ? features->d1() : 0;
  const int d2 = features ? features->d2() : 0;

  std::vector<EpochBudget> epochs;
  if (cfg.assumption == Assumption::local_budget && cfg.drift_slack) {
    epochs = epoch_budgets(seq, cfg.window_period);
  }

  EvaluatorParams params;
  params.lambda = cfg.lambda;
  params.beta = cfg.beta;

  EpisodeTrace trace;
  trace.seed = seed;
  trace.config = cfg;
  trace.episodes.reserve(static_cast<std::size_t>(M - first + 1));

  PolicyTable prev = PolicyTable::uniform(shape);
  std::vector<double> q_r(cells, 0.0);
  std::vector<double> q_g(cells, 0.0);
  DualState dual{options.initial_mu, {}};
  double v_g1_prev = options.initial_v_g1;
  std::vector<Trajectory> trajectories;  // trajectories[i] is episode first + i
  trajectories.reserve(static_cast<std::size_t>(M - first + 1));

  for (int m = first; m <= M; ++m) {
    try {
      const EpisodeModel& model = seq.episode(m);
      const RestartIndices idx = restart_indices(m, cfg.restart_period, cfg.window_period);
      if (m == idx.policy) {
        prev = PolicyTable::uniform(shape);
        std::fill(q_r.begin(), q_r.end(), 0.0);
        std::fill(q_g.begin(), q_g.end(), 0.0);
      }
      PolicyTable policy = options.forced_policies.empty()
                               ? policy_improve(prev, q_r, q_g, dual.mu, cfg.alpha)
                               : options.forced_policies[static_cast<std::size_t>(m - 1)];

      trajectories.push_back(sample_trajectory(model, policy, seed, m));
      dual = dual_update(dual, model.constraint_offset(), v_g1_prev, cfg);

      const int start = std::max(idx.evaluation, first);
      const TrajectoryWindow window{
          start, std::span<const Trajectory>(trajectories).subspan(
                     static_cast<std::size_t>(start - first))};
      params.lv = 0.0;
      if (!epochs.empty()) {
        const EpochBudget& e = epochs[static_cast<std::size_t>((m - 1) / cfg.window_period)];
        params.lv = lv_slack(cfg.assumption, cfg.setting, e.b_p, e.b_g, shape.horizon, d1, d2,
                             cfg.window_period);
      }

      OptimisticEstimate est =
          features ? lstd_ucb(*features, x1, window, policy, params).estimate
                   : ope_tabular(shape, x1, window, policy, params);

      const auto qr = est.values.q_steps(Signal::reward);
      const auto qg = est.values.q_steps(Signal::utility);
      q_r.assign(qr.begin(), qr.end());
      q_g.assign(qg.begin(), qg.end());
      v_g1_prev = est.v_g1;

      trace.episodes.push_back(EpisodeRecord{m, policy, dual.mu, est.v_r1, est.v_g1, params.lv,
                                             trajectories.back()});
      prev = std::move(policy);
    } catch (const LearnerError&) {
      throw;
    } catch (const std::exception& e) {
      throw LearnerError(e.what(), m);
    }
  }
  return trace;
}

}  // namespace ncmdp
