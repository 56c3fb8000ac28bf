#pragma once

#include <cstdint>
#include <random>

namespace scbohm {

// Stream seeds are derived from the single scenario seed in counter mode:
// stream_seed(seed, k) = splitmix64(seed + k * golden_gamma).
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

// Named streams, so that adding a consumer never shifts another's draws.
enum class Stream : std::uint64_t {
  initial_ensemble = 1,
  final_configuration = 2,
  random_circuit = 3,
};

inline std::mt19937_64 make_engine(std::uint64_t seed, Stream s) {
  return std::mt19937_64(stream_seed(seed, static_cast<std::uint64_t>(s)));
}

// Uniform double in [0,1) from the top 53 bits; independent of the
// standard library's distribution implementation.
inline double uniform01(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

}  // namespace scbohm
