#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace spreaddiv {

namespace detail {
/// Ziggurat tables for the standard normal (128 layers, Marsaglia-Tsang
/// constants r = 3.442619855899, v = 9.91256303526217e-3). Built once from
/// these fixed constants, so sample streams are a pure function of the seed.
struct ZigguratTables {
  std::uint32_t kn[128];
  double wn[128];
  double fn[128];
  ZigguratTables();
};
extern const ZigguratTables zig;
}  // namespace detail

/// Deterministic random stream: xoshiro256++ seeded through splitmix64.
/// The algorithm and its constants are fixed here so that a given seed
/// produces the same sample sequence on every run. Gaussian draws use the
/// ziggurat above, Laplace draws the inverse CDF.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Child stream derived from (seed, a, b); streams for distinct (a, b)
  /// are statistically independent. Used for fixed-chunk parallelism.
  Rng fork(std::uint64_t a, std::uint64_t b = 0) const;

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1), never returning an exact endpoint.
  double uniform_open() {
    for (;;) {
      const double u = uniform();
      if (u > 0.0) return u;
    }
  }

  double uniform_in(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    for (;;) {
      const std::int32_t hz = static_cast<std::int32_t>(next_u64() & 0xffffffffULL);
      const std::uint32_t iz = static_cast<std::uint32_t>(hz) & 127u;
      const std::uint32_t ahz = hz >= 0 ? static_cast<std::uint32_t>(hz)
                                        : static_cast<std::uint32_t>(-static_cast<std::int64_t>(hz));
      if (ahz < detail::zig.kn[iz]) return hz * detail::zig.wn[iz];
      const double x = normal_fix(hz, iz);
      if (x != kRejected) return x;
    }
  }

  double laplace(double scale) {
    const double u = uniform_open() - 0.5;
    const double a = 1.0 - 2.0 * std::fabs(u);
    const double mag = -scale * std::log(a);
    return u < 0.0 ? -mag : mag;
  }

  void fill_normal(std::span<double> out) {
    for (double& x : out) x = normal();
  }

  std::uint64_t seed() const { return seed_; }

 private:
  static constexpr double kRejected = -1e308;
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  double normal_fix(std::int32_t hz, std::uint32_t iz);  // slow path: wedge + tail

  std::uint64_t seed_ = 0;
  std::uint64_t s_[4] = {0, 0, 0, 0};
};

/// splitmix64 step; exposed for deterministic hashing of stream ids.
std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace spreaddiv
