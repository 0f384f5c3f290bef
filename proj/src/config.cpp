#include "ncmdp/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ncmdp {

namespace {

const std::set<std::string> kLearnerKeys = {
    "alpha",          "eta",  "xi",         "chi",     "restart_period",
    "window_period",  "beta", "assumption", "setting", "drift_slack"};

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (item.empty()) throw std::invalid_argument("empty list element");
    out.push_back(item);
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

double parse_double(const std::string& s) {
  if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad number '" + s + "'");
  }
  return v;
}

template <typename Int>
Int parse_int(const std::string& s) {
  Int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad integer '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_restart: return "no_restart";
    case Variant::no_dual: return "no_dual";
    case Variant::no_bonus: return "no_bonus";
    case Variant::oracle_replay: return "oracle_replay";
  }
  return "full";
}

Variant parse_variant(const std::string& text) {
  for (Variant v : {Variant::full, Variant::no_restart, Variant::no_dual, Variant::no_bonus,
                    Variant::oracle_replay}) {
    if (to_string(v) == text) return v;
  }
  throw std::invalid_argument("unknown variant '" + text + "'");
}

void apply_overrides(LearnerConfig& cfg, const std::map<std::string, std::string>& overrides) {
  for (const auto& [key, value] : overrides) {
    if (key == "alpha") cfg.alpha = parse_double(value);
    else if (key == "eta") cfg.eta = parse_double(value);
    else if (key == "xi") cfg.xi = parse_double(value);
    else if (key == "chi") cfg.chi = parse_double(value);
    else if (key == "restart_period") cfg.restart_period = parse_int<int>(value);
    else if (key == "window_period") cfg.window_period = parse_int<int>(value);
    else if (key == "beta") cfg.beta = parse_double(value);
    else if (key == "assumption") cfg.assumption = parse_assumption(value);
    else if (key == "setting") cfg.setting = parse_setting(value);
    else if (key == "drift_slack") cfg.drift_slack = parse_bool(value);
    else throw std::invalid_argument("unknown learner key '" + key + "'");
  }
}

void ExperimentSpec::validate() const {
  if (shape.states < 1 || shape.actions < 1 || shape.horizon < 1 || shape.episodes < 1) {
    throw std::invalid_argument("states, actions, horizon and episodes must be positive");
  }
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (variants.empty()) throw std::invalid_argument("at least one variant is required");
  if (preset < 0 || preset > 4) throw std::invalid_argument("preset must be 1..4 or none");
  if (preset == 0) {
    for (const char* key : {"alpha", "eta", "restart_period", "window_period", "assumption"}) {
      if (!overrides.count(key)) {
        throw std::invalid_argument(std::string("preset = none requires '") + key + "'");
      }
    }
  }
  if (offsets.offsets.size() != 1 &&
      offsets.offsets.size() != static_cast<std::size_t>(shape.episodes)) {
    throw std::invalid_argument("constraint_offset list must have one entry per episode");
  }
  int last = 0;
  for (int k : checkpoints) {
    if (k <= last || k > shape.episodes) {
      throw std::invalid_argument("checkpoints must be increasing and within [1, episodes]");
    }
    last = k;
  }
  if (threads < 0) throw std::invalid_argument("threads must be non-negative");
}

ExperimentSpec parse_spec(std::istream& is) {
  ExperimentSpec spec;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  bool have_version = false;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    auto fail = [&](const std::string& what) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": " + what);
    };
    if (eq == std::string::npos) fail("expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) fail("expected 'key = value'");
    if (!seen.insert(key).second) fail("duplicate key '" + key + "'");

    try {
      if (key == "version") {
        if (value != "1") fail("unsupported config version " + value);
        have_version = true;
      } else if (key == "states") spec.shape.states = parse_int<int>(value);
      else if (key == "actions") spec.shape.actions = parse_int<int>(value);
      else if (key == "horizon") spec.shape.horizon = parse_int<int>(value);
      else if (key == "episodes") spec.shape.episodes = parse_int<int>(value);
      else if (key == "drift") spec.drift = DriftDescriptor::parse(value);
      else if (key == "constraint_offset") {
        spec.offsets.offsets.clear();
        for (const auto& item : split_list(value)) spec.offsets.offsets.push_back(parse_double(item));
      } else if (key == "min_feasibility_margin") {
        spec.generator.min_feasibility_margin = parse_double(value);
      } else if (key == "initial_state") spec.generator.initial_state = parse_int<int>(value);
      else if (key == "seeds") {
        for (const auto& item : split_list(value)) spec.seeds.push_back(parse_int<std::uint64_t>(item));
      } else if (key == "env_seed") spec.env_seed = parse_int<std::uint64_t>(value);
      else if (key == "preset") spec.preset = value == "none" ? 0 : parse_int<int>(value);
      else if (key == "rho") spec.preset_input.rho = parse_double(value);
      else if (key == "confidence") spec.preset_input.confidence = parse_double(value);
      else if (key == "lambda") spec.preset_input.lambda = parse_double(value);
      else if (key.size() == 2 && key[0] == 'c' && key[1] >= '1' && key[1] <= '6') {
        spec.preset_input.constants[static_cast<std::size_t>(key[1] - '1')] = parse_double(value);
      } else if (kLearnerKeys.count(key)) {
        LearnerConfig probe;
        apply_overrides(probe, {{key, value}});
        spec.overrides[key] = value;
      } else if (key == "variants") {
        spec.variants.clear();
        for (const auto& item : split_list(value)) spec.variants.push_back(parse_variant(item));
      } else if (key == "checkpoints") {
        for (const auto& item : split_list(value)) spec.checkpoints.push_back(parse_int<int>(item));
      } else if (key == "threads") spec.threads = parse_int<int>(value);
      else if (key == "sweep_drifts") {
        for (const auto& item : split_list(value)) {
          spec.sweep_drifts.push_back(DriftDescriptor::parse(item));
        }
      } else {
        fail("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument& e) {
      fail(std::string(key) + ": " + e.what());
    }
  }
  if (!have_version) throw std::runtime_error("config: missing 'version = 1'");
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("config: ") + e.what());
  }
  return spec;
}

ExperimentSpec load_spec(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  try {
    return parse_spec(is);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace ncmdp
