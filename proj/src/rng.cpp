#include "spreaddiv/rng.hpp"

namespace spreaddiv {

namespace detail {

ZigguratTables::ZigguratTables() {
  const double m1 = 2147483648.0;
  double dn = 3.442619855899;
  double tn = dn;
  const double vn = 9.91256303526217e-3;

  const double q = vn / std::exp(-0.5 * dn * dn);
  kn[0] = static_cast<std::uint32_t>((dn / q) * m1);
  kn[1] = 0;
  wn[0] = q / m1;
  wn[127] = dn / m1;
  fn[0] = 1.0;
  fn[127] = std::exp(-0.5 * dn * dn);
  for (int i = 126; i >= 1; --i) {
    dn = std::sqrt(-2.0 * std::log(vn / dn + std::exp(-0.5 * dn * dn)));
    kn[i + 1] = static_cast<std::uint32_t>((dn / tn) * m1);
    tn = dn;
    fn[i] = std::exp(-0.5 * dn * dn);
    wn[i] = dn / m1;
  }
}

const ZigguratTables zig;

}  // namespace detail

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& word : s_) word = splitmix64(sm);
  // xoshiro must not start from the all-zero state.
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x9e3779b97f4a7c15ULL;
}

Rng Rng::fork(std::uint64_t a, std::uint64_t b) const {
  std::uint64_t sm = seed_ ^ 0xa0761d6478bd642fULL;
  std::uint64_t h = splitmix64(sm);
  sm = h ^ (a + 0xe7037ed1a0b428dbULL);
  h = splitmix64(sm);
  sm = h ^ (b + 0x8ebc6af09c88c6e3ULL);
  h = splitmix64(sm);
  return Rng(h);
}

double Rng::normal_fix(std::int32_t hz, std::uint32_t iz) {
  constexpr double r = 3.442619855899;
  if (iz == 0) {
    // Tail beyond r.
    double x, y;
    do {
      x = -std::log(uniform_open()) / r;
      y = -std::log(uniform_open());
    } while (y + y < x * x);
    return hz > 0 ? r + x : -(r + x);
  }
  const double x = hz * detail::zig.wn[iz];
  if (detail::zig.fn[iz] + uniform() * (detail::zig.fn[iz - 1] - detail::zig.fn[iz]) <
      std::exp(-0.5 * x * x))
    return x;
  return kRejected;
}

}  // namespace spreaddiv
