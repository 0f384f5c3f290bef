#pragma once

// Batch execution over (seed, variant) cells and the artifacts it writes.
//
// Output layout under the output directory:
//
//   env/env-seed<k>.ncmdp        environment sequence (serialize.hpp format)
//   env/env-seed<k>.meta.json    seed, drift, measured budgets, margin
//   traces/<variant>-seed<s>.csv per-episode trace (metrics.hpp columns)
//   summary.json                 across-seed aggregates and per-cell status

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ncmdp/config.hpp"
#include "ncmdp/env_gen.hpp"
#include "ncmdp/learner.hpp"
#include "ncmdp/metrics.hpp"
#include "ncmdp/oracle.hpp"

namespace ncmdp {

struct Environment {
  std::uint64_t seed = 0;
  NonStationaryCMDP sequence;
  SequenceSolution oracle;
  VariationReport totals;  // budgets with W = L = M
  double gamma = 0.0;      // uniform strict-feasibility margin
};

Environment prepare_environment(const ExperimentSpec& spec, std::uint64_t env_seed);

/// Learner configuration for one cell: preset (or explicit keys), explicit
/// overrides, then the variant's modification.
LearnerConfig cell_config(const ExperimentSpec& spec, const Environment& env, Variant variant);

struct CellResult {
  std::uint64_t seed = 0;
  std::uint64_t env_seed = 0;
  Variant variant = Variant::full;
  std::string drift;
  bool ok = false;
  std::string error;
  LearnerConfig config;
  RegretReport report;
  double gamma = 0.0;
  std::string trace_file;  // relative to the output directory
};

CellResult run_cell(const ExperimentSpec& spec, const Environment& env, std::uint64_t seed,
                    Variant variant);

struct ExperimentResult {
  std::vector<CellResult> cells;  // seeds-major, variants in spec order
  std::vector<int> checkpoints;
  bool all_ok = true;
};

/// Runs every cell in parallel, writes environments, traces and
/// summary.json under out_dir. Cell failures are recorded, not thrown.
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::string& out_dir);

/// summary.json text for a finished experiment.
std::string summary_json(const ExperimentSpec& spec, const ExperimentResult& result);

/// Environment sidecar record.
std::string environment_meta_json(const Environment& env);

enum class PlotKind { prefix_dr, prefix_cv, mu_path, budget_sweep };

std::string to_string(PlotKind kind);
PlotKind parse_plot_kind(const std::string& text);

/// Long-format table. Curve kinds write variant,seed,m,value,mean,std with
/// mean/std taken across seeds of the same variant at each m; they require
/// every report to cover the same episodes. budget_sweep writes
/// drift,b_delta,variant,seed,dr,cv,dr_mean,dr_std,cv_mean,cv_std, one
/// series per drift setting.
void emit_plotdata(std::span<const CellResult> cells, PlotKind kind, std::ostream& os);

}  // namespace ncmdp
