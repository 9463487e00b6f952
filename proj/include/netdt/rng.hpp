#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace netdt {

// Seed mixing (splitmix64 finalizer). Used to derive independent streams
// from a master seed and a stream index.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream = 0) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Thin wrapper over mt19937_64 with portable variate generation. The
// std:: distributions are implementation-defined, which would break
// byte-identical outputs across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1].
  double uniform_open_low() { return 1.0 - uniform(); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire-style rejection keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Unit-mean exponential variate.
  double exponential() { return -std::log(uniform_open_low()); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace netdt

namespace netdt {

// Small-state generator (splitmix64) for per-entity streams where thousands
// of independent generators are alive at once.
class StreamRng {
 public:
  explicit StreamRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double exponential() { return -std::log(1.0 - uniform()); }

 private:
  std::uint64_t state_;
};

}  // namespace netdt
