#pragma once

// Reproducible random streams and random field generators.
//
// Streams are derived from (seed, stream index) with splitmix64, so a trial
// computed on any worker sees the same numbers as in a serial run. Uniform and
// normal variates are produced here rather than through <random>
// distributions, whose output is implementation-defined.

#include <cstdint>
#include <random>

#include "hodgelab/lattice.hpp"

namespace hodgelab {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  double uniform() noexcept;                 // [0, 1)
  double uniform(double lo, double hi) noexcept;
  double normal() noexcept;                  // standard Gaussian
  cplx complex_normal() noexcept;            // E|z|^2 = 1
  std::uint64_t next() noexcept { return engine_(); }
  /// Independent child stream, e.g. one per trial.
  Rng split(std::uint64_t stream) const noexcept;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Complex Gaussian coefficients on the modes |k_a| <= band of every axis,
/// synthesised on the grid. The draw order depends only on `band`, so the
/// same stream gives the same trigonometric polynomial on every grid with
/// m/2 > band. `band < 0` selects the default band m/8 (about m/4 modes).
Field random_bandlimited(const Torus& torus, int fiber, Rng& rng, int band = -1);

/// Default band for a torus.
int default_band(const Torus& torus) noexcept;

}  // namespace hodgelab
