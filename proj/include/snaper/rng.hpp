#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace snaper {

// SplitMix64 finalizer. Used to derive independent stream seeds from a single
// run seed, and as the documented replicate-seed scheme for batch jobs.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Every consumer of randomness owns a dedicated substream so draws stay
// aligned regardless of which optional features run and how work is split
// across workers.
enum class StreamKind : std::uint64_t {
  kChain = 1,          // one per chain: momenta and accept uniforms
  kController = 2,     // per-iteration trajectory-length draws
  kPrincipalInit = 3,  // initial principal-component direction
  kData = 4,           // synthetic dataset generation
};

inline std::uint64_t stream_seed(std::uint64_t run_seed, StreamKind kind,
                                 std::uint64_t index = 0) {
  const auto k = static_cast<std::uint64_t>(kind);
  return splitmix64(splitmix64(run_seed ^ (0x51A5EEDull * (k + 1))) + index);
}

// Replicate r of a multi-seed job runs with splitmix64(base + 1 + r); any
// single replicate can be reproduced in isolation from the base seed.
inline std::uint64_t replicate_seed(std::uint64_t base_seed,
                                    std::uint64_t replicate) {
  return splitmix64(base_seed + 1 + replicate);
}

// Deterministic random stream: mt19937_64 plus explicit output transforms,
// so results never depend on the standard library's distribution
// implementations.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  // Uniform on the open interval (0, 1).
  double uniform01() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; generated in pairs, second value cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace snaper
