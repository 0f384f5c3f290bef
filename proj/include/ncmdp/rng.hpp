#pragma once

// Counter-based random streams. A stream is identified by a seed plus a
// tuple of integer keys, e.g. (seed, episode, step); the i-th draw of a
// stream is a pure function of (seed, keys, i). This makes generation
// independent of evaluation order and lets a run be replayed from the
// middle without advancing a shared generator.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>

namespace ncmdp {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) : key_(splitmix64(seed)) {
    for (std::uint64_t k : keys) key_ = splitmix64(key_ ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  }

  std::uint64_t next() { return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Standard exponential; used for flat-Dirichlet draws.
  double exponential() { return -std::log1p(-uniform()); }

  /// Inverse-CDF draw from a discrete distribution.
  int categorical(std::span<const double> probs) {
    if (probs.empty()) throw std::invalid_argument("categorical: empty distribution");
    const double u = uniform();
    double acc = 0.0;
    int last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] <= 0.0) continue;
      last_positive = static_cast<int>(i);
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return last_positive;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace ncmdp
