#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>

namespace grains {

// Deterministic RNG (splitmix64 core, Box-Muller normals). Kept free of
// std::*_distribution so traces are byte-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Derive a child seed from a base seed and a double-valued salt, independent
// of any enclosing list ordering.
inline std::uint64_t mix_seed(std::uint64_t base, double salt) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(salt));
  std::memcpy(&bits, &salt, sizeof(bits));
  Rng r(base ^ (bits * 0x9e3779b97f4a7c15ULL));
  return r.next_u64();
}

}  // namespace grains
