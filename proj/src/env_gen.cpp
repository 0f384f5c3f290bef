#include "ncmdp/env_gen.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ncmdp/rng.hpp"

namespace ncmdp {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double max_utility(const EpisodeModel& model) {
  return maximize_payoff(model, model.utility_table()).value;
}

EpisodeModel interpolate(const EpisodeModel& from, const EpisodeModel& to, double t, double b) {
  const Shape& s = from.shape();
  std::vector<double> transition(from.transition_table().size());
  std::vector<double> reward(from.reward_table().size());
  std::vector<double> utility(from.utility_table().size());
  const auto n = static_cast<std::size_t>(s.states);
  for (std::size_t row = 0; row < s.step_cells(); ++row) {
    double sum = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
      const std::size_t i = row * n + y;
      transition[i] = (1.0 - t) * from.transition_table()[i] + t * to.transition_table()[i];
      sum += transition[i];
    }
    for (std::size_t y = 0; y < n; ++y) transition[row * n + y] /= sum;
  }
  for (std::size_t i = 0; i < reward.size(); ++i) {
    reward[i] = std::clamp((1.0 - t) * from.reward_table()[i] + t * to.reward_table()[i], 0.0, 1.0);
    utility[i] =
        std::clamp((1.0 - t) * from.utility_table()[i] + t * to.utility_table()[i], 0.0, 1.0);
  }
  return EpisodeModel(s, std::move(transition), std::move(reward), std::move(utility), b,
                      from.initial_state());
}

}  // namespace

std::string DriftDescriptor::to_string() const {
  std::ostringstream os;
  switch (kind) {
    case DriftKind::stationary:
      os << "stationary";
      break;
    case DriftKind::piecewise_constant:
      os << "piecewise_constant:" << num_switches;
      break;
    case DriftKind::linear_drift:
      os.precision(17);
      os << "linear_drift:" << rate;
      break;
  }
  return os.str();
}

DriftDescriptor DriftDescriptor::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (name == "stationary" && arg.empty()) return stationary();
  try {
    if (name == "piecewise_constant" || name == "piecewise") return piecewise(std::stoi(arg));
    if (name == "linear_drift" || name == "linear") return linear(std::stod(arg));
  } catch (const std::logic_error&) {
  }
  throw std::invalid_argument("unrecognized drift descriptor '" + text + "'");
}

double ConstraintSchedule::at(int m) const {
  require(!offsets.empty(), "empty constraint schedule");
  if (offsets.size() == 1) return offsets.front();
  return offsets.at(static_cast<std::size_t>(m - 1));
}

NonStationaryCMDP::NonStationaryCMDP(std::vector<EpisodeModel> episodes,
                                     std::uint64_t generator_seed, DriftDescriptor drift)
    : episodes_(std::move(episodes)), seed_(generator_seed), drift_(drift) {
  require(!episodes_.empty(), "a sequence needs at least one episode");
  const EpisodeModel& first = episodes_.front();
  for (const auto& e : episodes_) {
    require(e.shape() == first.shape(), "episodes must share (|S|, |A|, H)");
    require(e.initial_state() == first.initial_state(), "episodes must share x_1");
  }
}

EpisodeModel draw_random_model(std::uint64_t seed, int draw, int attempt, Shape shape,
                               double constraint_offset, int initial_state) {
  shape.validate();
  std::vector<double> transition;
  std::vector<double> reward;
  std::vector<double> utility;
  transition.reserve(shape.step_cells() * shape.states);
  reward.reserve(shape.step_cells());
  utility.reserve(shape.step_cells());
  const auto d = static_cast<std::uint64_t>(draw);
  const auto t = static_cast<std::uint64_t>(attempt);
  for (int h = 0; h < shape.horizon; ++h) {
    for (int x = 0; x < shape.states; ++x) {
      for (int a = 0; a < shape.actions; ++a) {
        CounterRng rng(seed, {d, t, static_cast<std::uint64_t>(h), static_cast<std::uint64_t>(x),
                              static_cast<std::uint64_t>(a)});
        double sum = 0.0;
        const std::size_t start = transition.size();
        for (int y = 0; y < shape.states; ++y) {
          transition.push_back(rng.exponential());
          sum += transition.back();
        }
        for (std::size_t i = start; i < transition.size(); ++i) transition[i] /= sum;
        reward.push_back(rng.uniform());
        utility.push_back(rng.uniform());
      }
    }
  }
  return EpisodeModel(shape, std::move(transition), std::move(reward), std::move(utility),
                      constraint_offset, initial_state);
}

NonStationaryCMDP make_sequence(std::uint64_t seed, SequenceShape shape, DriftDescriptor drift,
                                const ConstraintSchedule& offsets,
                                const GeneratorOptions& options) {
  const Shape es = shape.episode_shape();
  es.validate();
  const int M = shape.episodes;
  require(M >= 1, "need at least one episode");
  require(offsets.offsets.size() == 1 || offsets.offsets.size() == static_cast<std::size_t>(M),
          "constraint schedule must be constant or have one offset per episode");
  require(options.max_retries >= 1, "max_retries must be positive");
  const bool check = options.min_feasibility_margin >= 0.0;

  auto feasible_for = [&](const EpisodeModel& model, int first_m, int last_m) {
    if (!check) return true;
    double worst_b = 0.0;
    for (int m = first_m; m <= last_m; ++m) worst_b = std::max(worst_b, offsets.at(m));
    return max_utility(model) - worst_b >= options.min_feasibility_margin;
  };

  std::vector<EpisodeModel> episodes;
  episodes.reserve(static_cast<std::size_t>(M));

  switch (drift.kind) {
    case DriftKind::stationary:
    case DriftKind::piecewise_constant: {
      const int switches = drift.kind == DriftKind::stationary ? 0 : drift.num_switches;
      require(switches >= 0 && switches < M, "number of switches must be in [0, M)");
      const int blocks = switches + 1;
      auto block_of = [&](int m) {
        return static_cast<int>((static_cast<long long>(m - 1) * blocks) / M);
      };
      int m = 1;
      for (int k = 0; k < blocks; ++k) {
        const int first_m = m;
        int last_m = m;
        while (last_m + 1 <= M && block_of(last_m + 1) == k) ++last_m;
        int attempt = 0;
        EpisodeModel base = draw_random_model(seed, k, attempt, es, offsets.at(first_m),
                                              options.initial_state);
        while (!feasible_for(base, first_m, last_m)) {
          if (++attempt >= options.max_retries) {
            throw std::runtime_error("no strictly feasible draw for block " + std::to_string(k) +
                                     " after " + std::to_string(options.max_retries) +
                                     " attempts");
          }
          base = draw_random_model(seed, k, attempt, es, offsets.at(first_m),
                                   options.initial_state);
        }
        for (; m <= last_m; ++m) episodes.push_back(base.with_constraint_offset(offsets.at(m)));
      }
      break;
    }
    case DriftKind::linear_drift: {
      require(drift.rate >= 0.0 && drift.rate * (M - 1) <= 1.0 + 1e-12,
              "linear drift rate must satisfy 0 <= rate * (M - 1) <= 1");
      for (int attempt = 0;; ++attempt) {
        if (attempt >= options.max_retries) {
          throw std::runtime_error("no strictly feasible linear-drift endpoints");
        }
        const EpisodeModel from =
            draw_random_model(seed, 0, attempt, es, offsets.at(1), options.initial_state);
        const EpisodeModel to =
            draw_random_model(seed, 1, attempt, es, offsets.at(1), options.initial_state);
        episodes.clear();
        bool ok = true;
        for (int m = 1; m <= M && ok; ++m) {
          const double t = std::min(1.0, drift.rate * (m - 1));
          episodes.push_back(interpolate(from, to, t, offsets.at(m)));
          ok = feasible_for(episodes.back(), m, m);
        }
        if (ok) break;
      }
      break;
    }
  }
  return NonStationaryCMDP(std::move(episodes), seed, drift);
}

double transition_distance(const EpisodeModel& lhs, const EpisodeModel& rhs, int h) {
  const Shape& s = lhs.shape();
  const std::size_t block = s.state_actions() * s.states;
  const std::span<const double> a(lhs.transition_table().data() + h * block, block);
  const std::span<const double> b(rhs.transition_table().data() + h * block, block);
  return std::sqrt(squared_distance(a, b));
}

double signal_distance(const EpisodeModel& lhs, const EpisodeModel& rhs, Signal sig, int h) {
  const Shape& s = lhs.shape();
  const std::size_t block = s.state_actions();
  const std::span<const double> a(lhs.signal_table(sig).data() + h * block, block);
  const std::span<const double> b(rhs.signal_table(sig).data() + h * block, block);
  return std::sqrt(squared_distance(a, b));
}

double policy_distance(const PolicyTable& lhs, const PolicyTable& rhs, int h) {
  double worst = 0.0;
  for (int x = 0; x < lhs.shape().states; ++x) {
    const auto a = lhs.row(h, x);
    const auto b = rhs.row(h, x);
    double l1 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) l1 += std::abs(a[i] - b[i]);
    worst = std::max(worst, l1);
  }
  return worst;
}

std::vector<EpochBudget> epoch_budgets(const NonStationaryCMDP& seq, int epoch_length) {
  require(epoch_length >= 1, "epoch length must be positive");
  const int M = static_cast<int>(seq.size());
  const int H = seq.shape().horizon;
  std::vector<EpochBudget> epochs(static_cast<std::size_t>((M + epoch_length - 1) / epoch_length));
  for (int m = 2; m <= M; ++m) {
    const int e = (m - 1) / epoch_length;
    if ((m - 2) / epoch_length != e) continue;
    const auto& prev = seq.episode(m - 1);
    const auto& cur = seq.episode(m);
    for (int h = 0; h < H; ++h) {
      epochs[e].b_p += transition_distance(cur, prev, h);
      epochs[e].b_g += signal_distance(cur, prev, Signal::utility, h);
    }
  }
  return epochs;
}

VariationReport measure_budgets(const NonStationaryCMDP& seq,
                                std::span<const PolicyTable> optimal_policies, int window_length,
                                int restart_length) {
  require(optimal_policies.size() == seq.size(), "need one optimal policy per episode");
  require(window_length >= 1 && restart_length >= 1, "epoch lengths must be positive");
  VariationReport report;
  report.window_length = window_length;
  report.restart_length = restart_length;
  const int M = static_cast<int>(seq.size());
  const int H = seq.shape().horizon;
  for (int m = 2; m <= M; ++m) {
    const auto& prev = seq.episode(m - 1);
    const auto& cur = seq.episode(m);
    const auto& pi_prev = optimal_policies[static_cast<std::size_t>(m - 2)];
    const auto& pi_cur = optimal_policies[static_cast<std::size_t>(m - 1)];
    require(pi_cur.shape() == seq.shape(), "optimal policy shape mismatch");
    for (int h = 0; h < H; ++h) {
      report.b_p += transition_distance(cur, prev, h);
      report.b_r += signal_distance(cur, prev, Signal::reward, h);
      report.b_g += signal_distance(cur, prev, Signal::utility, h);
      report.b_star += policy_distance(pi_cur, pi_prev, h);
    }
  }
  report.b_delta = report.b_p + report.b_r + report.b_g;
  report.window_epochs = epoch_budgets(seq, window_length);
  report.restart_epochs = epoch_budgets(seq, restart_length);
  return report;
}

}  // namespace ncmdp
