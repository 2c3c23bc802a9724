#include "hodgelab/random.hpp"

#include <cmath>

namespace hodgelab {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL))),
      engine_(seed_) {}

double Rng::uniform() noexcept {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

double Rng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * M_PI * u2);
  has_spare_ = true;
  return r * std::cos(2.0 * M_PI * u2);
}

cplx Rng::complex_normal() noexcept {
  const double re = normal();
  const double im = normal();
  return {re * M_SQRT1_2, im * M_SQRT1_2};
}

Rng Rng::split(std::uint64_t stream) const noexcept { return Rng(seed_, stream); }

int default_band(const Torus& torus) noexcept { return torus.points_per_axis() / 8; }

Field random_bandlimited(const Torus& torus, int fiber, Rng& rng, int band) {
  if (band < 0) band = default_band(torus);
  const int m = torus.points_per_axis();
  if (2 * band >= m) throw LatticeError("band limit must stay below the Nyquist mode");
  Field spec(torus, fiber, Domain::frequency);
  const int n = torus.dim();
  const int width = 2 * band + 1;
  std::size_t total = 1;
  for (int a = 0; a < n; ++a) total *= width;
  // lexicographic over k in [-band, band]^n, independent of m
  for (std::size_t q = 0; q < total; ++q) {
    Coord k{0, 0, 0};
    std::size_t r = q;
    for (int a = n - 1; a >= 0; --a) {
      k[a] = static_cast<int>(r % width) - band;
      r /= width;
    }
    const std::size_t idx = torus.index(k);
    for (int c = 0; c < fiber; ++c) spec.at(idx, c) = rng.complex_normal();
  }
  // unitary inverse carries m^{-n/2}; undo it so amplitudes do not depend on m
  Field f = inverse_transform(spec);
  f *= std::sqrt(static_cast<double>(torus.num_points()));
  return f;
}

}  // namespace hodgelab
