#include "ncmdp/serialize.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ncmdp {

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  // Next non-empty, non-comment line split into tokens.
  std::vector<std::string> next() {
    std::string line;
    while (std::getline(is_, line)) {
      ++line_no_;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::istringstream ss(line);
      std::vector<std::string> tokens;
      for (std::string t; ss >> t;) tokens.push_back(t);
      if (!tokens.empty()) return tokens;
    }
    fail("unexpected end of input");
  }

  std::vector<std::string> expect(const std::string& keyword, std::size_t args) {
    auto tokens = next();
    if (tokens.front() != keyword || tokens.size() != args + 1) {
      fail("expected '" + keyword + "' with " + std::to_string(args) + " argument(s)");
    }
    return tokens;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("line " + std::to_string(line_no_) + ": " + what);
  }

  double to_double(const std::string& s) const {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail("bad number '" + s + "'");
    return v;
  }

  long long to_int(const std::string& s) const {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail("bad integer '" + s + "'");
    return v;
  }

  std::vector<double> read_rows(std::size_t rows, std::size_t width) {
    std::vector<double> out;
    out.reserve(rows * width);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto tokens = next();
      if (tokens.size() != width) fail("expected " + std::to_string(width) + " values");
      for (const auto& t : tokens) out.push_back(to_double(t));
    }
    return out;
  }

 private:
  std::istream& is_;
  std::size_t line_no_ = 0;
};

void write_rows(std::ostream& os, const std::vector<double>& values, std::size_t width) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    os << format_double(values[i]) << ((i + 1) % width == 0 ? '\n' : ' ');
  }
}

EpisodeModel read_model_body(LineReader& in) {
  const auto version = in.expect("ncmdp-model", 1);
  if (version[1] != "1") in.fail("unsupported model version " + version[1]);
  Shape s;
  s.states = static_cast<int>(in.to_int(in.expect("states", 1)[1]));
  s.actions = static_cast<int>(in.to_int(in.expect("actions", 1)[1]));
  s.horizon = static_cast<int>(in.to_int(in.expect("horizon", 1)[1]));
  if (s.states <= 0 || s.actions <= 0 || s.horizon <= 0) in.fail("non-positive dimension");
  const int x1 = static_cast<int>(in.to_int(in.expect("initial_state", 1)[1]));
  const double b = in.to_double(in.expect("constraint_offset", 1)[1]);

  auto check_shape = [&](const std::vector<std::string>& t, std::vector<int> dims) {
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (in.to_int(t[i + 1]) != dims[i]) in.fail("shape does not match header");
    }
  };
  check_shape(in.expect("transition", 4), {s.horizon, s.states, s.actions, s.states});
  auto transition = in.read_rows(s.step_cells(), static_cast<std::size_t>(s.states));
  check_shape(in.expect("reward", 3), {s.horizon, s.states, s.actions});
  auto reward = in.read_rows(static_cast<std::size_t>(s.horizon) * s.states,
                             static_cast<std::size_t>(s.actions));
  check_shape(in.expect("utility", 3), {s.horizon, s.states, s.actions});
  auto utility = in.read_rows(static_cast<std::size_t>(s.horizon) * s.states,
                              static_cast<std::size_t>(s.actions));
  in.expect("end", 0);
  try {
    return EpisodeModel(s, std::move(transition), std::move(reward), std::move(utility), b, x1);
  } catch (const std::invalid_argument& e) {
    in.fail(std::string("invalid model: ") + e.what());
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_model(std::ostream& os, const EpisodeModel& model) {
  const Shape& s = model.shape();
  os << "ncmdp-model 1\n";
  os << "states " << s.states << '\n';
  os << "actions " << s.actions << '\n';
  os << "horizon " << s.horizon << '\n';
  os << "initial_state " << model.initial_state() << '\n';
  os << "constraint_offset " << format_double(model.constraint_offset()) << '\n';
  os << "transition " << s.horizon << ' ' << s.states << ' ' << s.actions << ' ' << s.states
     << '\n';
  write_rows(os, model.transition_table(), static_cast<std::size_t>(s.states));
  os << "reward " << s.horizon << ' ' << s.states << ' ' << s.actions << '\n';
  write_rows(os, model.reward_table(), static_cast<std::size_t>(s.actions));
  os << "utility " << s.horizon << ' ' << s.states << ' ' << s.actions << '\n';
  write_rows(os, model.utility_table(), static_cast<std::size_t>(s.actions));
  os << "end\n";
}

EpisodeModel read_model(std::istream& is) {
  LineReader in(is);
  return read_model_body(in);
}

void write_sequence(std::ostream& os, const NonStationaryCMDP& seq) {
  os << "ncmdp-sequence 1\n";
  os << "episodes " << seq.size() << '\n';
  os << "seed " << seq.generator_seed() << '\n';
  os << "drift " << seq.drift().to_string() << '\n';
  for (int m = 1; m <= static_cast<int>(seq.size()); ++m) {
    const EpisodeModel& cur = seq.episode(m);
    if (m > 1) {
      const EpisodeModel& prev = seq.episode(m - 1);
      if (cur.transition_table() == prev.transition_table() &&
          cur.reward_table() == prev.reward_table() &&
          cur.utility_table() == prev.utility_table()) {
        os << "episode " << m << " repeat " << format_double(cur.constraint_offset()) << '\n';
        continue;
      }
    }
    os << "episode " << m << '\n';
    write_model(os, cur);
  }
}

NonStationaryCMDP read_sequence(std::istream& is) {
  LineReader in(is);
  const auto version = in.expect("ncmdp-sequence", 1);
  if (version[1] != "1") in.fail("unsupported sequence version " + version[1]);
  const long long M = in.to_int(in.expect("episodes", 1)[1]);
  if (M < 1) in.fail("episodes must be positive");
  const auto seed_tok = in.expect("seed", 1)[1];
  std::uint64_t seed = 0;
  {
    const auto [ptr, ec] = std::from_chars(seed_tok.data(), seed_tok.data() + seed_tok.size(), seed);
    if (ec != std::errc() || ptr != seed_tok.data() + seed_tok.size()) in.fail("bad seed");
  }
  DriftDescriptor drift;
  try {
    drift = DriftDescriptor::parse(in.expect("drift", 1)[1]);
  } catch (const std::invalid_argument& e) {
    in.fail(e.what());
  }
  std::vector<EpisodeModel> episodes;
  episodes.reserve(static_cast<std::size_t>(M));
  for (long long m = 1; m <= M; ++m) {
    const auto tokens = in.next();
    if (tokens.front() != "episode" || tokens.size() < 2 || in.to_int(tokens[1]) != m) {
      in.fail("expected 'episode " + std::to_string(m) + "'");
    }
    if (tokens.size() == 4 && tokens[2] == "repeat") {
      if (episodes.empty()) in.fail("first episode cannot repeat");
      episodes.push_back(episodes.back().with_constraint_offset(in.to_double(tokens[3])));
    } else if (tokens.size() == 2) {
      episodes.push_back(read_model_body(in));
    } else {
      in.fail("malformed episode header");
    }
  }
  return NonStationaryCMDP(std::move(episodes), seed, drift);
}

void save_sequence(const std::string& path, const NonStationaryCMDP& seq) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_sequence(os, seq);
  if (!os) throw std::runtime_error("failed writing " + path);
}

NonStationaryCMDP load_sequence(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  try {
    return read_sequence(is);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace ncmdp
