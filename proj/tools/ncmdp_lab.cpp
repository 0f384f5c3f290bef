// ncmdp-lab: generate environments, solve them, run learners, summarize.
//
//   ncmdp-lab gen-env      --config exp.cfg --out dir [--seed s]
//   ncmdp-lab solve-oracle <env.ncmdp> --out solution.json
//   ncmdp-lab run          --config exp.cfg --out dir [--seed s] [--variant v]
//   ncmdp-lab report       --out dir [--config exp.cfg]
//   ncmdp-lab sweep        --config exp.cfg --out dir [--seed s] [--variant v]
//
// Exit status is 0 only if every requested cell succeeded.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ncmdp/config.hpp"
#include "ncmdp/experiment.hpp"
#include "ncmdp/serialize.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using namespace ncmdp;

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string variant;
};

ExperimentSpec load_with_overrides(const CommonFlags& f) {
  ExperimentSpec spec = load_spec(f.config);
  if (f.seed) spec.seeds = {*f.seed};
  if (!f.variant.empty()) spec.variants = {parse_variant(f.variant)};
  return spec;
}

void write_plots(const fs::path& dir, const std::vector<CellResult>& cells) {
  fs::create_directories(dir / "plots");
  for (PlotKind kind : {PlotKind::prefix_dr, PlotKind::prefix_cv, PlotKind::mu_path}) {
    std::ofstream os(dir / "plots" / (to_string(kind) + ".csv"), std::ios::binary);
    emit_plotdata(cells, kind, os);
  }
}

void print_summary(const ExperimentResult& r) {
  for (const auto& c : r.cells) {
    if (!c.ok) {
      std::cout << to_string(c.variant) << " seed " << c.seed << ": FAILED " << c.error << '\n';
      continue;
    }
    std::cout << to_string(c.variant) << " seed " << c.seed << ": DR " << c.report.dr << "  CV "
              << c.report.cv << "  L " << c.config.restart_period << "  W "
              << c.config.window_period << '\n';
  }
}

int cmd_gen_env(const CommonFlags& f) {
  const ExperimentSpec spec = load_with_overrides(f);
  fs::create_directories(fs::path(f.out));
  int failures = 0;
  std::vector<std::uint64_t> done;
  for (std::uint64_t s : spec.seeds) {
    const std::uint64_t e = spec.env_seed_for(s);
    if (std::find(done.begin(), done.end(), e) != done.end()) continue;
    done.push_back(e);
    try {
      const Environment env = prepare_environment(spec, e);
      const fs::path base = fs::path(f.out) / ("env-seed" + std::to_string(e));
      save_sequence(base.string() + ".ncmdp", env.sequence);
      std::ofstream(base.string() + ".meta.json", std::ios::binary) << environment_meta_json(env);
      std::cout << base.string() << ".ncmdp  B_delta " << env.totals.b_delta << "  B_star "
                << env.totals.b_star << "  gamma " << env.gamma << '\n';
    } catch (const std::exception& ex) {
      std::cerr << "env seed " << e << ": " << ex.what() << '\n';
      ++failures;
    }
  }
  return failures == 0 ? 0 : 1;
}

int cmd_solve_oracle(const std::string& env_file, const std::string& out) {
  const NonStationaryCMDP seq = load_sequence(env_file);
  const SequenceSolution solved = solve_sequence(seq);
  Json j;
  j["format"] = "ncmdp-oracle";
  j["version"] = 1;
  j["episodes"] = seq.size();
  j["distinct_solves"] = solved.distinct_solves;
  const double gamma = uniform_feasibility_margin(solved);
  j["gamma"] = gamma;
  const auto policies = optimal_policies(solved);
  const int M = static_cast<int>(seq.size());
  const VariationReport b = measure_budgets(seq, policies, M, M);
  j["budgets"] = {{"b_p", b.b_p}, {"b_r", b.b_r}, {"b_g", b.b_g}, {"b_delta", b.b_delta},
                  {"b_star", b.b_star}};
  Json rows = Json::array();
  bool all_feasible = true;
  for (int m = 1; m <= M; ++m) {
    const OracleSolution& s = solved.solutions[static_cast<std::size_t>(m - 1)];
    all_feasible = all_feasible && s.feasible;
    rows.push_back({{"m", m},
                    {"feasible", s.feasible},
                    {"v_r_star", s.v_r_star},
                    {"v_g_star", s.v_g_star},
                    {"mu_star", s.mu_star},
                    {"gamma", s.gamma},
                    {"max_utility", s.max_utility}});
  }
  j["solutions"] = rows;
  const std::string text = j.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream os(out, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + out);
    os << text;
  }
  return all_feasible ? 0 : 1;
}

int cmd_run(const CommonFlags& f) {
  const ExperimentSpec spec = load_with_overrides(f);
  const ExperimentResult r = run_experiment(spec, f.out);
  write_plots(fs::path(f.out), r.cells);
  print_summary(r);
  return r.all_ok ? 0 : 1;
}

int cmd_report(const CommonFlags& f) {
  const fs::path dir(f.out);
  std::ifstream is(dir / "summary.json");
  if (!is) throw std::runtime_error("no summary.json in " + f.out);
  const Json summary = Json::parse(is);
  std::vector<CellResult> cells;
  bool all_ok = true;
  for (const auto& jc : summary.at("cells")) {
    CellResult c;
    c.seed = jc.at("seed").get<std::uint64_t>();
    c.variant = parse_variant(jc.at("variant").get<std::string>());
    c.drift = summary.at("drift").get<std::string>();
    if (jc.at("status") != "ok") {
      all_ok = false;
      c.error = jc.value("error", "");
      cells.push_back(std::move(c));
      continue;
    }
    c.trace_file = jc.at("trace").get<std::string>();
    c.report = load_csv((dir / c.trace_file).string());
    c.report.budgets.b_delta = jc.at("budgets").at("b_delta").get<double>();
    c.ok = true;
    cells.push_back(std::move(c));
  }
  write_plots(dir, cells);

  const auto checkpoints = summary.at("checkpoints").get<std::vector<int>>();
  std::cout << "checkpoints:";
  for (int k : checkpoints) std::cout << ' ' << k;
  std::cout << '\n';
  for (const auto& jv : summary.at("variants")) {
    std::cout << jv.at("variant").get<std::string>() << " (" << jv.at("seeds_ok") << " ok)\n";
    for (const char* key : {"dr_per_episode", "cv_per_episode"}) {
      std::cout << "  " << key << ':';
      const auto& means = jv.at(key).at("mean");
      const auto& stds = jv.at(key).at("std");
      for (std::size_t i = 0; i < means.size(); ++i) {
        std::cout << ' ' << means[i].get<double>() << " +- " << stds[i].get<double>();
      }
      std::cout << '\n';
    }
  }
  return all_ok ? 0 : 1;
}

int cmd_sweep(const CommonFlags& f) {
  const ExperimentSpec base = load_with_overrides(f);
  if (base.sweep_drifts.empty()) throw std::runtime_error("sweep needs 'sweep_drifts' in the config");
  std::vector<CellResult> all;
  bool all_ok = true;
  for (std::size_t i = 0; i < base.sweep_drifts.size(); ++i) {
    ExperimentSpec spec = base;
    spec.drift = base.sweep_drifts[i];
    const fs::path dir = fs::path(f.out) / ("sweep-" + std::to_string(i));
    const ExperimentResult r = run_experiment(spec, dir.string());
    std::cout << "[" << spec.drift.to_string() << "]\n";
    print_summary(r);
    all_ok = all_ok && r.all_ok;
    all.insert(all.end(), r.cells.begin(), r.cells.end());
  }
  std::ofstream os(fs::path(f.out) / "budget_sweep.csv", std::ios::binary);
  emit_plotdata(all, PlotKind::budget_sweep, os);
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-stationary constrained MDP laboratory"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string env_file;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", flags.config, "experiment config file");
    if (needs_config) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "output directory")->required();
    sub->add_option("--seed", seed, "run only this seed");
    sub->add_option("--variant", flags.variant,
                    "run only this variant (full, no_restart, no_dual, no_bonus, oracle_replay)");
  };

  auto* gen = app.add_subcommand("gen-env", "generate environment sequences");
  add_common(gen, true);
  auto* solve = app.add_subcommand("solve-oracle", "solve every episode of an environment file");
  solve->add_option("env", env_file, "environment file")->required()->check(CLI::ExistingFile);
  solve->add_option("--out", flags.out, "output JSON (stdout if omitted)");
  auto* runc = app.add_subcommand("run", "run an experiment");
  add_common(runc, true);
  auto* report = app.add_subcommand("report", "summarize a finished run directory");
  add_common(report, false);
  auto* sweep = app.add_subcommand("sweep", "run an experiment for each drift in sweep_drifts");
  add_common(sweep, true);

  CLI11_PARSE(app, argc, argv);

  try {
    for (CLI::App* sub : {gen, runc, report, sweep}) {
      if (sub->parsed() && sub->count("--seed") > 0) flags.seed = seed;
    }
    if (gen->parsed()) return cmd_gen_env(flags);
    if (solve->parsed()) return cmd_solve_oracle(env_file, flags.out);
    if (runc->parsed()) return cmd_run(flags);
    if (report->parsed()) return cmd_report(flags);
    if (sweep->parsed()) return cmd_sweep(flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
