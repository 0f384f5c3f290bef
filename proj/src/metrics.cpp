#include "ncmdp/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ncmdp/serialize.hpp"

namespace ncmdp {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void check_lengths(const EpisodeTrace& trace, const NonStationaryCMDP& seq) {
  require(trace.episodes.size() == seq.size(), "trace length does not match sequence length");
  for (std::size_t i = 0; i < trace.episodes.size(); ++i) {
    require(trace.episodes[i].episode == static_cast<int>(i) + 1, "trace episodes out of order");
  }
}

ValuePair true_values(const EpisodeTrace& trace, const NonStationaryCMDP& seq, int m) {
  return evaluate_exact(seq.episode(m), trace.episodes[static_cast<std::size_t>(m - 1)].policy);
}

}  // namespace

Curve dynamic_regret(const EpisodeTrace& trace, std::span<const OracleSolution> oracle,
                     const NonStationaryCMDP& seq) {
  check_lengths(trace, seq);
  require(oracle.size() == seq.size(), "oracle length does not match sequence length");
  Curve c;
  c.prefix.reserve(seq.size());
  for (int m = 1; m <= static_cast<int>(seq.size()); ++m) {
    const ValuePair v = true_values(trace, seq, m);
    const int x1 = seq.episode(m).initial_state();
    c.total += oracle[static_cast<std::size_t>(m - 1)].v_r_star - v.v(Signal::reward, 0, x1);
    c.prefix.push_back(c.total);
  }
  return c;
}

Curve constraint_violation(const EpisodeTrace& trace, const NonStationaryCMDP& seq) {
  check_lengths(trace, seq);
  Curve c;
  c.prefix.reserve(seq.size());
  double sum = 0.0;
  for (int m = 1; m <= static_cast<int>(seq.size()); ++m) {
    const ValuePair v = true_values(trace, seq, m);
    const EpisodeModel& model = seq.episode(m);
    sum += model.constraint_offset() - v.v(Signal::utility, 0, model.initial_state());
    c.prefix.push_back(std::max(0.0, sum));
  }
  c.total = std::max(0.0, sum);
  return c;
}

std::vector<ProbePoint> sublinearity_probe(std::span<const double> prefix,
                                           std::span<const int> checkpoints) {
  std::vector<ProbePoint> out;
  int last = 0;
  for (int k : checkpoints) {
    require(k > last, "checkpoints must be positive and increasing");
    require(k <= static_cast<int>(prefix.size()), "checkpoint beyond the end of the curve");
    out.push_back({k, prefix[static_cast<std::size_t>(k - 1)] / k});
    last = k;
  }
  return out;
}

std::vector<int> default_checkpoints(int episodes) {
  std::vector<int> out;
  for (int div : {8, 4, 2, 1}) {
    const int k = episodes / div;
    if (k > 0 && (out.empty() || out.back() < k)) out.push_back(k);
  }
  return out;
}

RegretReport build_report(const EpisodeTrace& trace, std::span<const OracleSolution> oracle,
                          const NonStationaryCMDP& seq, const VariationReport& budgets) {
  check_lengths(trace, seq);
  require(oracle.size() == seq.size(), "oracle length does not match sequence length");
  RegretReport r;
  r.budgets = budgets;
  r.per_episode.reserve(seq.size());
  double dr = 0.0;
  double gap = 0.0;
  for (int m = 1; m <= static_cast<int>(seq.size()); ++m) {
    const EpisodeModel& model = seq.episode(m);
    const EpisodeRecord& rec = trace.episodes[static_cast<std::size_t>(m - 1)];
    const ValuePair v = evaluate_exact(model, rec.policy);
    const int x1 = model.initial_state();
    EpisodeValues e;
    e.episode = m;
    e.v_r_star = oracle[static_cast<std::size_t>(m - 1)].v_r_star;
    e.v_r_pi = v.v(Signal::reward, 0, x1);
    e.v_g_pi = v.v(Signal::utility, 0, x1);
    e.b = model.constraint_offset();
    e.mu = rec.mu;
    e.v_r_est = rec.v_r1_est;
    e.v_g_est = rec.v_g1_est;
    dr += e.v_r_star - e.v_r_pi;
    gap += e.b - e.v_g_pi;
    r.prefix_dr.push_back(dr);
    r.prefix_cv.push_back(std::max(0.0, gap));
    r.per_episode.push_back(e);
  }
  r.dr = dr;
  r.cv = std::max(0.0, gap);
  return r;
}

void write_csv(std::ostream& os, const RegretReport& report) {
  os << kTraceCsvHeader << '\n';
  for (std::size_t i = 0; i < report.per_episode.size(); ++i) {
    const EpisodeValues& e = report.per_episode[i];
    os << e.episode << ',' << format_double(e.v_r_star) << ',' << format_double(e.v_r_pi) << ','
       << format_double(e.v_g_pi) << ',' << format_double(e.b) << ',' << format_double(e.mu)
       << ',' << format_double(report.prefix_dr[i]) << ',' << format_double(report.prefix_cv[i])
       << '\n';
  }
}

RegretReport read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTraceCsvHeader) {
    throw std::runtime_error("trace CSV: unexpected header");
  }
  RegretReport r;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::vector<std::string> cells;
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 8) {
      throw std::runtime_error("trace CSV line " + std::to_string(line_no) + ": expected 8 columns");
    }
    try {
      EpisodeValues e;
      e.episode = std::stoi(cells[0]);
      e.v_r_star = std::stod(cells[1]);
      e.v_r_pi = std::stod(cells[2]);
      e.v_g_pi = std::stod(cells[3]);
      e.b = std::stod(cells[4]);
      e.mu = std::stod(cells[5]);
      r.per_episode.push_back(e);
      r.prefix_dr.push_back(std::stod(cells[6]));
      r.prefix_cv.push_back(std::stod(cells[7]));
    } catch (const std::logic_error&) {
      throw std::runtime_error("trace CSV line " + std::to_string(line_no) + ": bad number");
    }
  }
  if (!r.prefix_dr.empty()) {
    r.dr = r.prefix_dr.back();
    r.cv = r.prefix_cv.back();
  }
  return r;
}

void save_csv(const std::string& path, const RegretReport& report) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_csv(os, report);
  if (!os) throw std::runtime_error("failed writing " + path);
}

RegretReport load_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_csv(is);
}

}  // namespace ncmdp
