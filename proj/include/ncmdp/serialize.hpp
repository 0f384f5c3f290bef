#pragma once

// Text serialization of episode models and model sequences.
//
// Model block (version 1):
//
//   ncmdp-model 1
//   states <S>
//   actions <A>
//   horizon <H>
//   initial_state <x1>
//   constraint_offset <b>
//   transition <H> <S> <A> <S>
//   <S values>              one line per (h, x, a), row-major
//   reward <H> <S> <A>
//   <A values>              one line per (h, x)
//   utility <H> <S> <A>
//   <A values>              one line per (h, x)
//   end
//
// Sequence file (version 1):
//
//   ncmdp-sequence 1
//   episodes <M>
//   seed <seed>
//   drift <descriptor>
//   episode 1
//   <model block>
//   episode 2 repeat <b>    same tables as episode 1, offset b
//   episode 3
//   <model block>
//   ...
//
// Numbers are written with 17 significant digits so a write/read cycle is
// exact. Malformed input throws std::runtime_error naming the line.

#include <iosfwd>
#include <string>

#include "ncmdp/env_gen.hpp"
#include "ncmdp/model.hpp"

namespace ncmdp {

void write_model(std::ostream& os, const EpisodeModel& model);
EpisodeModel read_model(std::istream& is);

void write_sequence(std::ostream& os, const NonStationaryCMDP& seq);
NonStationaryCMDP read_sequence(std::istream& is);

void save_sequence(const std::string& path, const NonStationaryCMDP& seq);
NonStationaryCMDP load_sequence(const std::string& path);

/// Shortest text form used across all artifacts (%.17g).
std::string format_double(double v);

}  // namespace ncmdp
