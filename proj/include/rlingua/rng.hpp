#pragma once

#include <cstdint>
#include <random>

namespace rlingua {

using Rng = std::mt19937_64;

// Independent named streams derived from one experiment seed. Streams with
// different ids never share state.
enum class Stream : std::uint64_t {
  init = 1,
  mixing = 2,
  action = 3,
  update = 4,
  relabel = 5,
  env = 6,
  controller = 7,
  eval = 8,
};

inline Rng make_stream(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32), 0x524c6e67u};
  return Rng(seq);
}

inline Rng make_stream(std::uint64_t seed, Stream stream) {
  return make_stream(seed, static_cast<std::uint64_t>(stream));
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace rlingua
