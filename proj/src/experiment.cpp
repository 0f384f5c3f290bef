#include "ncmdp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "ncmdp/serialize.hpp"

namespace ncmdp {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

// Runs fn(i) for i in [0, n) on a fixed pool; results are indexed, so the
// outcome does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

Json json_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

Json budgets_json(const VariationReport& b) {
  Json j;
  j["b_p"] = b.b_p;
  j["b_r"] = b.b_r;
  j["b_g"] = b.b_g;
  j["b_delta"] = b.b_delta;
  j["b_star"] = b.b_star;
  j["window_length"] = b.window_length;
  j["restart_length"] = b.restart_length;
  return j;
}

Json learner_json(const LearnerConfig& c) {
  Json j;
  j["alpha"] = c.alpha;
  j["eta"] = c.eta;
  j["xi"] = c.xi;
  j["chi"] = json_number(c.chi);
  j["restart_period"] = c.restart_period;
  j["window_period"] = c.window_period;
  j["beta"] = c.beta;
  j["lambda"] = c.lambda;
  j["assumption"] = to_string(c.assumption);
  j["setting"] = to_string(c.setting);
  j["rho"] = c.rho;
  j["confidence"] = c.confidence;
  j["dual_updates"] = c.dual_updates;
  j["drift_slack"] = c.drift_slack;
  j["eta_capped"] = c.eta_capped;
  return j;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// Sample standard deviation (n - 1); zero for a single value.
MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return out;
}

std::string trace_name(Variant v, std::uint64_t seed) {
  return "traces/" + to_string(v) + "-seed" + std::to_string(seed) + ".csv";
}

std::string env_name(std::uint64_t env_seed) {
  return "env/env-seed" + std::to_string(env_seed);
}

}  // namespace

Environment prepare_environment(const ExperimentSpec& spec, std::uint64_t env_seed) {
  NonStationaryCMDP seq =
      make_sequence(env_seed, spec.shape, spec.drift, spec.offsets, spec.generator);
  SequenceSolution oracle = solve_sequence(seq);
  const auto policies = optimal_policies(oracle);
  const int M = spec.shape.episodes;
  VariationReport totals = measure_budgets(seq, policies, M, M);
  const double gamma = uniform_feasibility_margin(oracle);
  return Environment{env_seed, std::move(seq), std::move(oracle), std::move(totals), gamma};
}

LearnerConfig cell_config(const ExperimentSpec& spec, const Environment& env, Variant variant) {
  LearnerConfig cfg;
  if (spec.preset > 0) {
    PresetInput in = spec.preset_input;
    in.theorem = spec.preset;
    in.episodes = spec.shape.episodes;
    in.horizon = spec.shape.horizon;
    in.states = spec.shape.states;
    in.actions = spec.shape.actions;
    in.d1 = spec.shape.states * spec.shape.actions * spec.shape.states;
    in.d2 = spec.shape.states * spec.shape.actions;
    in.b_delta = std::max(env.totals.b_delta, kBudgetFloor);
    in.b_star = std::max(env.totals.b_star, kBudgetFloor);
    in.gamma = env.gamma;
    cfg = preset_params(in);
  } else {
    cfg.rho = spec.preset_input.rho;
    cfg.confidence = spec.preset_input.confidence;
    cfg.constants = spec.preset_input.constants;
    cfg.lambda = spec.preset_input.lambda;
  }
  apply_overrides(cfg, spec.overrides);
  switch (variant) {
    case Variant::no_restart:
      cfg.restart_period = spec.shape.episodes;
      cfg.window_period = spec.shape.episodes;
      break;
    case Variant::no_dual: cfg.dual_updates = false; break;
    case Variant::no_bonus: cfg.beta = 0.0; break;
    case Variant::full:
    case Variant::oracle_replay: break;
  }
  cfg.validate();
  return cfg;
}

CellResult run_cell(const ExperimentSpec& spec, const Environment& env, std::uint64_t seed,
                    Variant variant) {
  CellResult cell;
  cell.seed = seed;
  cell.env_seed = env.seed;
  cell.variant = variant;
  cell.drift = env.sequence.drift().to_string();
  cell.gamma = env.gamma;
  cell.trace_file = trace_name(variant, seed);
  try {
    cell.config = cell_config(spec, env, variant);
    const auto policies = optimal_policies(env.oracle);
    RunOptions options;
    if (variant == Variant::oracle_replay) options.forced_policies = policies;
    const EpisodeTrace trace = run(env.sequence, cell.config, seed, options);
    const VariationReport budgets = measure_budgets(env.sequence, policies,
                                                    cell.config.window_period,
                                                    cell.config.restart_period);
    cell.report = build_report(trace, env.oracle.solutions, env.sequence, budgets);
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  return cell;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const std::string& out_dir) {
  spec.validate();
  const fs::path root(out_dir);
  fs::create_directories(root / "env");
  fs::create_directories(root / "traces");

  std::vector<std::uint64_t> env_seeds;
  for (std::uint64_t s : spec.seeds) {
    const std::uint64_t e = spec.env_seed_for(s);
    if (std::find(env_seeds.begin(), env_seeds.end(), e) == env_seeds.end()) env_seeds.push_back(e);
  }
  std::vector<std::optional<Environment>> envs(env_seeds.size());
  std::vector<std::string> env_errors(env_seeds.size());
  parallel_for(env_seeds.size(), spec.threads, [&](std::size_t i) {
    try {
      envs[i] = prepare_environment(spec, env_seeds[i]);
      const std::string base = env_name(env_seeds[i]);
      save_sequence((root / (base + ".ncmdp")).string(), envs[i]->sequence);
      write_text(root / (base + ".meta.json"), environment_meta_json(*envs[i]));
    } catch (const std::exception& e) {
      env_errors[i] = e.what();
    }
  });

  ExperimentResult result;
  result.checkpoints =
      spec.checkpoints.empty() ? default_checkpoints(spec.shape.episodes) : spec.checkpoints;
  for (std::uint64_t s : spec.seeds) {
    for (Variant v : spec.variants) {
      CellResult c;
      c.seed = s;
      c.env_seed = spec.env_seed_for(s);
      c.variant = v;
      c.drift = spec.drift.to_string();
      c.trace_file = trace_name(v, s);
      result.cells.push_back(std::move(c));
    }
  }
  parallel_for(result.cells.size(), spec.threads, [&](std::size_t i) {
    CellResult& cell = result.cells[i];
    const auto at = std::find(env_seeds.begin(), env_seeds.end(), cell.env_seed) - env_seeds.begin();
    const auto idx = static_cast<std::size_t>(at);
    if (!envs[idx]) {
      cell.error = "environment generation failed: " + env_errors[idx];
      return;
    }
    cell = run_cell(spec, *envs[idx], cell.seed, cell.variant);
    if (!cell.ok) return;
    try {
      save_csv((root / cell.trace_file).string(), cell.report);
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
  });
  for (const auto& c : result.cells) result.all_ok = result.all_ok && c.ok;
  write_text(root / "summary.json", summary_json(spec, result));
  return result;
}

std::string environment_meta_json(const Environment& env) {
  Json j;
  j["format"] = "ncmdp-env-meta";
  j["version"] = 1;
  j["seed"] = env.seed;
  j["drift"] = env.sequence.drift().to_string();
  j["episodes"] = env.sequence.size();
  const Shape& s = env.sequence.shape();
  j["states"] = s.states;
  j["actions"] = s.actions;
  j["horizon"] = s.horizon;
  j["budgets"] = budgets_json(env.totals);
  j["gamma"] = json_number(env.gamma);
  j["distinct_models"] = env.oracle.distinct_solves;
  return j.dump(2) + "\n";
}

std::string summary_json(const ExperimentSpec& spec, const ExperimentResult& result) {
  Json j;
  j["format"] = "ncmdp-summary";
  j["version"] = 1;
  j["episodes"] = spec.shape.episodes;
  j["drift"] = spec.drift.to_string();
  j["preset"] = spec.preset > 0 ? Json(spec.preset) : Json("none");
  j["checkpoints"] = result.checkpoints;
  j["all_ok"] = result.all_ok;

  Json variants = Json::array();
  for (Variant v : spec.variants) {
    std::vector<const CellResult*> ok;
    int failed = 0;
    for (const auto& c : result.cells) {
      if (c.variant != v) continue;
      if (c.ok) ok.push_back(&c);
      else ++failed;
    }
    Json jv;
    jv["variant"] = to_string(v);
    jv["seeds_ok"] = ok.size();
    jv["seeds_failed"] = failed;
    auto aggregate = [&](bool regret, bool per_episode) {
      Json out;
      Json means = Json::array();
      Json stds = Json::array();
      for (int k : result.checkpoints) {
        std::vector<double> values;
        for (const CellResult* c : ok) {
          const auto& curve = regret ? c->report.prefix_dr : c->report.prefix_cv;
          double value = curve[static_cast<std::size_t>(k - 1)];
          if (per_episode) value /= k;
          values.push_back(value);
        }
        const MeanStd ms = mean_std(values);
        means.push_back(ms.mean);
        stds.push_back(ms.std);
      }
      out["mean"] = means;
      out["std"] = stds;
      return out;
    };
    jv["dr"] = aggregate(true, false);
    jv["cv"] = aggregate(false, false);
    jv["dr_per_episode"] = aggregate(true, true);
    jv["cv_per_episode"] = aggregate(false, true);
    variants.push_back(jv);
  }
  j["variants"] = variants;

  Json cells = Json::array();
  for (const auto& c : result.cells) {
    Json jc;
    jc["seed"] = c.seed;
    jc["env_seed"] = c.env_seed;
    jc["variant"] = to_string(c.variant);
    jc["status"] = c.ok ? "ok" : "error";
    if (!c.ok) {
      jc["error"] = c.error;
    } else {
      jc["trace"] = c.trace_file;
      jc["dr"] = c.report.dr;
      jc["cv"] = c.report.cv;
      jc["gamma"] = json_number(c.gamma);
      jc["budgets"] = budgets_json(c.report.budgets);
      jc["learner"] = learner_json(c.config);
    }
    cells.push_back(jc);
  }
  j["cells"] = cells;
  return j.dump(2) + "\n";
}

std::string to_string(PlotKind kind) {
  switch (kind) {
    case PlotKind::prefix_dr: return "prefix_dr";
    case PlotKind::prefix_cv: return "prefix_cv";
    case PlotKind::mu_path: return "mu_path";
    case PlotKind::budget_sweep: return "budget_sweep";
  }
  return "prefix_dr";
}

PlotKind parse_plot_kind(const std::string& text) {
  for (PlotKind k : {PlotKind::prefix_dr, PlotKind::prefix_cv, PlotKind::mu_path,
                     PlotKind::budget_sweep}) {
    if (to_string(k) == text) return k;
  }
  throw std::invalid_argument("unknown plot kind '" + text + "'");
}

void emit_plotdata(std::span<const CellResult> cells, PlotKind kind, std::ostream& os) {
  std::vector<const CellResult*> ok;
  for (const auto& c : cells) {
    if (c.ok) ok.push_back(&c);
  }

  if (kind == PlotKind::budget_sweep) {
    std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>>
        series;
    for (const CellResult* c : ok) {
      auto& s = series[{c->drift, to_string(c->variant)}];
      s.first.push_back(c->report.dr);
      s.second.push_back(c->report.cv);
    }
    os << "drift,b_delta,variant,seed,dr,cv,dr_mean,dr_std,cv_mean,cv_std\n";
    for (const CellResult* c : ok) {
      const auto& s = series[{c->drift, to_string(c->variant)}];
      const MeanStd dr = mean_std(s.first);
      const MeanStd cv = mean_std(s.second);
      os << c->drift << ',' << format_double(c->report.budgets.b_delta) << ','
         << to_string(c->variant) << ',' << c->seed << ',' << format_double(c->report.dr) << ','
         << format_double(c->report.cv) << ',' << format_double(dr.mean) << ','
         << format_double(dr.std) << ',' << format_double(cv.mean) << ','
         << format_double(cv.std) << '\n';
    }
    return;
  }

  auto value = [kind](const CellResult& c, std::size_t i) {
    switch (kind) {
      case PlotKind::prefix_dr: return c.report.prefix_dr[i];
      case PlotKind::prefix_cv: return c.report.prefix_cv[i];
      default: return c.report.per_episode[i].mu;
    }
  };
  std::size_t length = 0;
  for (const CellResult* c : ok) {
    const std::size_t n = c->report.per_episode.size();
    if (length == 0) length = n;
    if (n != length) throw std::invalid_argument("reports cover different episode grids");
  }
  os << "variant,seed,m,value,mean,std\n";
  std::map<std::string, std::vector<const CellResult*>> by_variant;
  for (const CellResult* c : ok) by_variant[to_string(c->variant)].push_back(c);
  for (const CellResult* c : ok) {
    const auto& group = by_variant[to_string(c->variant)];
    for (std::size_t i = 0; i < length; ++i) {
      std::vector<double> across;
      across.reserve(group.size());
      for (const CellResult* g : group) across.push_back(value(*g, i));
      const MeanStd ms = mean_std(across);
      os << to_string(c->variant) << ',' << c->seed << ',' << c->report.per_episode[i].episode
         << ',' << format_double(value(*c, i)) << ',' << format_double(ms.mean) << ','
         << format_double(ms.std) << '\n';
    }
  }
}

}  // namespace ncmdp
