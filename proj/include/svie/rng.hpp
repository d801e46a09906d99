#pragma once

#include <cmath>
#include <cstdint>

namespace svie {

// Counter-free splittable PRNG. All Monte Carlo code derives one stream per
// path index from (seed, index), so results do not depend on how paths are
// scheduled across workers. Normals come from Box-Muller on the raw 64-bit
// output; nothing here depends on libstdc++ distribution internals, which
// keeps byte-level reproducibility under our control.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform on (0, 1].
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; pairs are cached.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Derives an independent stream seed for a path index. Two mixing rounds so
/// that adjacent indices land far apart in state space.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t index) {
  Rng a(index + 0x632BE59BD9B4E019ULL);
  Rng b(seed ^ a.next_u64());
  return b.next_u64();
}

} // namespace svie
