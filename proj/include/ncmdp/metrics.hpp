#pragma once

// Dynamic regret, long-run constraint violation and their prefix curves.
// True values always come from exact evaluation on the episode's model.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ncmdp/env_gen.hpp"
#include "ncmdp/learner.hpp"
#include "ncmdp/oracle.hpp"

namespace ncmdp {

struct Curve {
  double total = 0.0;
  std::vector<double> prefix;  // prefix[i] covers episodes 1..i+1
};

/// DR(M) = sum_m V_r*(m) - V_r^{pi^m}(m).
Curve dynamic_regret(const EpisodeTrace& trace, std::span<const OracleSolution> oracle,
                     const NonStationaryCMDP& seq);

/// CV(M) = max(0, sum_m b_m - V_g^{pi^m}(m)); each prefix is clamped on its
/// own, so over-satisfied episodes offset earlier violations.
Curve constraint_violation(const EpisodeTrace& trace, const NonStationaryCMDP& seq);

struct ProbePoint {
  int episodes = 0;
  double average = 0.0;  // prefix value / episodes
};

/// Throws std::invalid_argument for non-increasing checkpoints or ones
/// beyond the curve.
std::vector<ProbePoint> sublinearity_probe(std::span<const double> prefix,
                                           std::span<const int> checkpoints);

/// {M/8, M/4, M/2, M}, dropping zeros and duplicates.
std::vector<int> default_checkpoints(int episodes);

struct EpisodeValues {
  int episode = 0;
  double v_r_star = 0.0;
  double v_r_pi = 0.0;
  double v_g_pi = 0.0;
  double b = 0.0;
  double mu = 0.0;
  double v_r_est = 0.0;  // learner's optimistic estimate
  double v_g_est = 0.0;
};

struct RegretReport {
  double dr = 0.0;
  double cv = 0.0;
  std::vector<EpisodeValues> per_episode;
  std::vector<double> prefix_dr;
  std::vector<double> prefix_cv;
  VariationReport budgets;
};

RegretReport build_report(const EpisodeTrace& trace, std::span<const OracleSolution> oracle,
                          const NonStationaryCMDP& seq, const VariationReport& budgets);

/// Header line of the per-episode CSV.
inline constexpr const char* kTraceCsvHeader = "m,v_r_star,v_r_pi,v_g_pi,b,mu,prefix_dr,prefix_cv";

void write_csv(std::ostream& os, const RegretReport& report);
/// Reads per-episode rows and prefix curves back (estimates and budgets are
/// not part of the CSV). dr and cv are taken from the last row.
RegretReport read_csv(std::istream& is);

void save_csv(const std::string& path, const RegretReport& report);
RegretReport load_csv(const std::string& path);

}  // namespace ncmdp
