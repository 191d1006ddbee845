#pragma once

#include <cstddef>
#include <cmath>
#include <cstdint>
#include <random>

namespace clusterfx {

// SplitMix64 finalizer. Used to decorrelate seeds before they reach the engine.
std::uint64_t mix64(std::uint64_t x);

// Seed-splitting function for independent streams:
//   stream_seed(seed, id) = mix64(seed + 0x9E3779B97F4A7C15 * (id + 1))
// Replication k of an experiment with seed s draws from stream_seed(s, k);
// nested streams (bootstrap resample j) apply the function again.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream_id);

// Thin wrapper around mt19937_64 with distribution mappings written out
// explicitly, so draws do not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound), unbiased (rejection on the top range).
  std::size_t below(std::size_t bound);

  // Standard normal via Box-Muller (one value per call, the pair's second
  // half is cached).
  double normal();

  double exponential() { return -std::log(uniform()); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace clusterfx
