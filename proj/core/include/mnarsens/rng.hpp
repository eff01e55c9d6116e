#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mnarsens {

// splitmix64 finalizer; used to derive independent substream seeds from
// (master seed, stream index) so results do not depend on worker count.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index,
                                    std::uint64_t salt = 0) {
  return mix_seed(mix_seed(master ^ mix_seed(salt)) ^ mix_seed(index));
}

// Deterministic draws on top of mt19937_64. Distributions are hand-rolled so
// a (seed, draw sequence) pair always yields the same stream, independent of
// standard-library internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // uniform on (0,1); never returns 0
  double uniform() {
    const std::uint64_t bits = engine_() >> 11;  // 53 bits
    return (static_cast<double>(bits) + 0.5) * 0x1p-53;
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  // Box-Muller with cached spare
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u = uniform();
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double theta = 6.283185307179586476925286766559 * v;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mnarsens
