#pragma once

#include <cstdint>
#include <random>

#include "qmp_lab/types.hpp"

namespace qmp {

// splitmix64 finalizer; used to decorrelate seeds derived from (seed, stream)
// pairs so parallel trials get independent, reproducible streams.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Deterministic RNG with explicit distributions. std::mt19937_64 has a pinned
// bit stream, and we implement uniform/normal draws ourselves so results do
// not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed), seed_(seed) {}

  std::uint64_t bits() { return eng_(); }

  // uniform on [0, 1)
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  // standard normal via Box-Muller (pair cached)
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    // keep u1 away from 0 so the log is finite
    double r = std::sqrt(-2.0 * std::log1p(u1 - 1.0 + 0x1.0p-53));
    double c = std::cos(6.283185307179586476925286766559 * u2);
    double s = std::sin(6.283185307179586476925286766559 * u2);
    spare_ = r * s;
    has_spare_ = true;
    return r * c;
  }

  // circularly symmetric complex normal, unit variance: E|w|^2 = 1
  cplx cnormal() {
    double re = normal();
    double im = normal();
    return {re * 0.70710678118654752440, im * 0.70710678118654752440};
  }

  // field-dependent unit-variance draw: N(0,1) in real mode, CN(0,1) in
  // complex mode
  cplx unit_normal(Field field) {
    if (field == Field::real) return {normal(), 0.0};
    return cnormal();
  }

  // derive an independent deterministic stream
  Rng fork(std::uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }

  std::uint64_t seed() const { return seed_; }

 private:
  std::mt19937_64 eng_;
  std::uint64_t seed_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace qmp
