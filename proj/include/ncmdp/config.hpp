#pragma once

// Experiment configuration: a flat "key = value" text file.
//
//   version = 1                       required, must be 1
//   # environment
//   states = 5
//   actions = 3
//   horizon = 5
//   episodes = 2000
//   drift = piecewise_constant:2      stationary | piecewise_constant:<n> | linear_drift:<rate>
//   constraint_offset = 2.5           constant b, or a comma list with one entry per episode
//   min_feasibility_margin = 0.05     generator retry threshold on max V_g - b
//   initial_state = 0
//   seeds = 1,2,3                     learner seeds; also environment seeds unless env_seed is set
//   env_seed = 7                      optional: one shared environment for every seed
//   # learner
//   preset = 3                        1..4 for closed-form schedules, or none
//   rho = 0.5
//   confidence = 0.1
//   c1 = 1.0 ... c6 = 1.0
//   lambda = 1.0
//   alpha, eta, xi, chi, restart_period, window_period, beta,
//   assumption, setting               explicit values; with a preset they override it
//   drift_slack = true
//   # batch
//   variants = full,no_restart        full | no_restart | no_dual | no_bonus | oracle_replay
//   checkpoints = 250,500,1000,2000   default {M/8, M/4, M/2, M}
//   threads = 0                       0 picks the hardware concurrency
//   sweep_drifts = linear_drift:0.0001,linear_drift:0.0002
//                                     drift settings visited by the sweep verb
//
// Blank lines and text after '#' are ignored. Unknown keys, duplicate keys
// and malformed values are errors.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ncmdp/env_gen.hpp"
#include "ncmdp/learner.hpp"

namespace ncmdp {

enum class Variant { full, no_restart, no_dual, no_bonus, oracle_replay };

std::string to_string(Variant v);
Variant parse_variant(const std::string& text);

struct ExperimentSpec {
  SequenceShape shape{};
  DriftDescriptor drift;
  ConstraintSchedule offsets = ConstraintSchedule::constant(1.0);
  GeneratorOptions generator;
  std::vector<std::uint64_t> seeds;
  std::optional<std::uint64_t> env_seed;

  int preset = 0;  // 0: explicit learner
  PresetInput preset_input;  // rho, confidence, constants, lambda (dimensions filled per run)
  /// Explicit learner keys; the whole configuration without a preset,
  /// overrides of its output otherwise.
  std::map<std::string, std::string> overrides;

  std::vector<Variant> variants{Variant::full};
  std::vector<int> checkpoints;  // empty: default grid
  int threads = 0;
  std::vector<DriftDescriptor> sweep_drifts;

  /// Environment seed used for a learner seed.
  std::uint64_t env_seed_for(std::uint64_t seed) const { return env_seed.value_or(seed); }

  void validate() const;
};

/// Throws std::runtime_error naming the offending line.
ExperimentSpec parse_spec(std::istream& is);
ExperimentSpec load_spec(const std::string& path);

/// Applies the explicit learner overrides on top of a preset configuration.
void apply_overrides(LearnerConfig& cfg, const std::map<std::string, std::string>& overrides);

}  // namespace ncmdp
