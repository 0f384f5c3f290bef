#pragma once

// Non-stationary CMDP sequences and their variation budgets.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ncmdp/model.hpp"

namespace ncmdp {

enum class DriftKind { stationary, piecewise_constant, linear_drift };

struct DriftDescriptor {
  DriftKind kind = DriftKind::stationary;
  int num_switches = 0;  // piecewise_constant only
  double rate = 0.0;     // linear_drift only: interpolation weight added per episode

  static DriftDescriptor stationary() { return {}; }
  static DriftDescriptor piecewise(int switches) {
    return {DriftKind::piecewise_constant, switches, 0.0};
  }
  static DriftDescriptor linear(double rate) { return {DriftKind::linear_drift, 0, rate}; }

  bool operator==(const DriftDescriptor&) const = default;

  /// "stationary", "piecewise_constant:<n>" or "linear_drift:<rate>".
  std::string to_string() const;
  static DriftDescriptor parse(const std::string& text);
};

struct SequenceShape {
  int states = 0;
  int actions = 0;
  int horizon = 0;
  int episodes = 0;

  Shape episode_shape() const { return {states, actions, horizon}; }
};

/// Constraint offsets b_m. A single entry means a constant schedule.
struct ConstraintSchedule {
  std::vector<double> offsets;

  static ConstraintSchedule constant(double b) { return {{b}}; }
  double at(int m) const;  // m is 1-based
};

struct GeneratorOptions {
  /// Draws are retried until max_pi V_g - b_m >= this margin for every
  /// episode that uses the draw. Negative disables the check.
  double min_feasibility_margin = 0.05;
  int max_retries = 1000;
  int initial_state = 0;
};

class NonStationaryCMDP {
 public:
  NonStationaryCMDP(std::vector<EpisodeModel> episodes, std::uint64_t generator_seed,
                    DriftDescriptor drift);

  std::size_t size() const { return episodes_.size(); }
  /// Episode m, 1-based.
  const EpisodeModel& episode(int m) const { return episodes_.at(static_cast<std::size_t>(m - 1)); }
  const std::vector<EpisodeModel>& episodes() const { return episodes_; }
  const Shape& shape() const { return episodes_.front().shape(); }
  std::uint64_t generator_seed() const { return seed_; }
  const DriftDescriptor& drift() const { return drift_; }

  bool operator==(const NonStationaryCMDP&) const = default;

 private:
  std::vector<EpisodeModel> episodes_;
  std::uint64_t seed_ = 0;
  DriftDescriptor drift_;
};

/// One random CMDP: flat-Dirichlet transition rows and i.i.d. uniform
/// reward/utility cells, keyed on (seed, draw, attempt, h, x, a).
EpisodeModel draw_random_model(std::uint64_t seed, int draw, int attempt, Shape shape,
                               double constraint_offset, int initial_state = 0);

/// Builds M episodes. Piecewise mode splits [1, M] into num_switches + 1
/// evenly sized contiguous blocks, each holding one random draw; linear
/// drift interpolates two endpoint draws with weight rate * (m - 1).
NonStationaryCMDP make_sequence(std::uint64_t seed, SequenceShape shape, DriftDescriptor drift,
                                const ConstraintSchedule& offsets,
                                const GeneratorOptions& options = {});

/// Local budgets inside one epoch (differences between consecutive
/// episodes that both lie in the epoch).
struct EpochBudget {
  double b_p = 0.0;
  double b_g = 0.0;
};

struct VariationReport {
  double b_p = 0.0;
  double b_r = 0.0;
  double b_g = 0.0;
  double b_delta = 0.0;
  double b_star = 0.0;
  int window_length = 0;   // W
  int restart_length = 0;  // L
  std::vector<EpochBudget> window_epochs;
  std::vector<EpochBudget> restart_epochs;
};

/// Euclidean distance between the canonical-embedding parameter vectors of
/// step h, i.e. the flattened P_h (or r_h / g_h) tables.
double transition_distance(const EpisodeModel& lhs, const EpisodeModel& rhs, int h);
double signal_distance(const EpisodeModel& lhs, const EpisodeModel& rhs, Signal s, int h);
/// max_x || pi_h(.|x) - pi'_h(.|x) ||_1
double policy_distance(const PolicyTable& lhs, const PolicyTable& rhs, int h);

VariationReport measure_budgets(const NonStationaryCMDP& seq,
                                std::span<const PolicyTable> optimal_policies, int window_length,
                                int restart_length);

/// Per-epoch budgets for an arbitrary epoch length (no policy term).
std::vector<EpochBudget> epoch_budgets(const NonStationaryCMDP& seq, int epoch_length);

}  // namespace ncmdp
