#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "hodgelab/lattice.hpp"
#include "hodgelab/random.hpp"

using namespace hodgelab;
using std::numbers::pi;

namespace {

Field mode_field(const Torus& t, int k) {
  Field f(t, 1);
  for (std::size_t x = 0; x < t.num_points(); ++x) {
    const double xx = t.coord(x)[0] * t.spacing();
    f.at(x, 0) = std::exp(cplx(0, 2 * pi * k * xx / t.period()));
  }
  return f;
}

double direct_l2(const Field& f) {
  double s = 0;
  for (const cplx& v : f.values()) s += std::norm(v);
  return std::sqrt(s * f.torus().cell_volume());
}

}  // namespace

TEST_CASE("torus rejects invalid shapes") {
  CHECK_THROWS_AS(Torus(1, 6), LatticeError);
  CHECK_THROWS_AS(Torus(1, 2), LatticeError);
  CHECK_THROWS_AS(Torus(4, 8), LatticeError);
  CHECK_THROWS_AS(Torus(1, 8, 0.0), LatticeError);
  const Torus t(2, 8, 2.0);
  CHECK(t.num_points() == 64);
  CHECK(t.spacing() == doctest::Approx(0.25));
  CHECK(t.signed_mode(4) == -4);
  CHECK(t.signed_mode(3) == 3);
}

TEST_CASE("forward transform of a constant is concentrated at zero") {
  const Torus t(1, 16);
  const Field f = Field::constant(t, {1.0, 0.0});
  const Field g = forward_transform(f);
  CHECK(std::abs(g.at(0, 0) - cplx(4.0, 0.0)) < 1e-13);  // sqrt(16)
  for (std::size_t k = 1; k < 16; ++k) CHECK(std::abs(g.at(k, 0)) < 1e-13);
  for (std::size_t k = 0; k < 16; ++k) CHECK(std::abs(g.at(k, 1)) < 1e-13);
}

TEST_CASE("pure mode has a single coefficient at k = 1") {
  const Torus t(1, 32, 3.0);
  const Field g = forward_transform(mode_field(t, 1));
  for (std::size_t k = 0; k < 32; ++k) {
    if (k == 1) CHECK(std::abs(g.at(k, 0)) == doctest::Approx(std::sqrt(32.0)));
    else CHECK(std::abs(g.at(k, 0)) < 1e-12);
  }
}

TEST_CASE("Parseval and round trip on random fields") {
  for (int dim = 1; dim <= 3; ++dim) {
    const Torus t(dim, dim == 3 ? 8 : 16);
    Rng rng(5, dim);
    Field f(t, 3);
    for (auto& v : f.values()) v = rng.complex_normal();
    const Field g = forward_transform(f);
    CHECK(std::abs(coefficient_norm(g) - coefficient_norm(f)) <= 1e-12 * coefficient_norm(f));
    const Field back = inverse_transform(g);
    CHECK(coefficient_norm(back - f) <= 1e-12 * coefficient_norm(f));
  }
}

TEST_CASE("lp norms") {
  const Torus t(2, 8, 2.0);  // volume 4
  const Field c = Field::constant(t, {cplx(0.0, 3.0)});
  for (double p : {1.0, 1.5, 2.0, 3.0})
    CHECK(lp_norm(c, p) == doctest::Approx(3.0 * std::pow(4.0, 1.0 / p)).epsilon(1e-12));
  CHECK(lp_norm(c, INFINITY) == doctest::Approx(3.0));
  CHECK_THROWS_AS(lp_norm(c, 0.5), LatticeError);

  Rng rng(1);
  const Field f = random_bandlimited(t, 2, rng);
  for (double p : {1.0, 2.0, 4.0}) CHECK(lp_norm(2.0 * f, p) == doctest::Approx(2 * lp_norm(f, p)));
  CHECK(lp_norm(f, 2.0) == doctest::Approx(direct_l2(f)).epsilon(1e-12));

  // Indicator of half of a 1-D torus.
  const Torus t1(1, 32, 5.0);
  Field half(t1, 1);
  for (std::size_t x = 0; x < 16; ++x) half.at(x, 0) = 1.0;
  CHECK(lp_norm(half, 2.0) == doctest::Approx(std::sqrt(2.5)).epsilon(1e-12));
}

TEST_CASE("periodic distance") {
  const Torus t(1, 16, 1.0);
  const GridSet a = GridSet::single(t, 0);
  CHECK(periodic_distance(a, a) == 0.0);
  CHECK(periodic_distance(a, GridSet::single(t, 8)) == doctest::Approx(0.5));
  // x = 14/16 wraps around to distance 2/16.
  CHECK(periodic_distance(a, GridSet::single(t, 14)) == doctest::Approx(0.125));
  CHECK_THROWS_AS(periodic_distance(a, GridSet::empty(t)), LatticeError);

  // Exhaustive pair-minimum oracle, symmetry and triangle inequality on singletons.
  const Torus t2(2, 8, 1.0);
  for (std::size_t i = 0; i < t2.num_points(); i += 5)
    for (std::size_t j = 0; j < t2.num_points(); j += 3) {
      const double dij = periodic_distance(GridSet::single(t2, i), GridSet::single(t2, j));
      CHECK(dij == doctest::Approx(periodic_distance(GridSet::single(t2, j), GridSet::single(t2, i))));
      for (std::size_t k = 0; k < t2.num_points(); k += 7)
        CHECK(dij <= t2.distance(i, k) + t2.distance(k, j) + 1e-12);
      const Coord s = t2.separation(i, j);
      CHECK(dij == doctest::Approx(std::hypot(s[0], s[1]) * t2.spacing()));
    }
}

TEST_CASE("wraparound distance at 0.9 l") {
  const Torus t(1, 64, 10.0);
  // Points at 0 and 57.6 (= 0.9 l) are not on this grid; use the set-level oracle
  // with sets {0} and the nearest grid point to 0.9 l, 58 * h = 9.0625.
  const double d = periodic_distance(GridSet::single(t, 0), GridSet::single(t, 58));
  CHECK(d == doctest::Approx(10.0 - 9.0625));
}

TEST_CASE("dyadic cubes tile the torus") {
  const Torus t(1, 8);
  const auto cubes = dyadic_cubes(t, 1);
  CHECK(cubes.size() == 4);
  for (const auto& q : cubes) CHECK(q.sidelength == doctest::Approx(2 * t.spacing()));
  CHECK_THROWS_AS(dyadic_cubes(t, 4), LatticeError);

  for (int dim = 1; dim <= 3; ++dim) {
    const Torus tt(dim, dim == 3 ? 8 : 16);
    for (int level = 0; (1 << level) <= tt.points_per_axis(); ++level) {
      const auto qs = dyadic_cubes(tt, level);
      std::vector<int> hits(qs.size(), 0);
      for (std::size_t x = 0; x < tt.num_points(); ++x) ++hits[dyadic_cube_of(tt, level, x)];
      const int per = static_cast<int>(std::pow(1 << level, dim));
      for (int h : hits) CHECK(h == per);
    }
  }
}

TEST_CASE("shells") {
  const Torus t(1, 64, 1.0);
  const Ball b{10, 2.5 * t.spacing()};
  // S_1(B) = 4B.
  CHECK(shell(t, b, 1) == ball_set(t, Ball{10, 4 * b.radius}));
  // Shells are disjoint and their union over j = 1..J is 2^{J+1} B.
  GridSet acc = GridSet::empty(t);
  for (int j = 1; j <= 3; ++j) {
    const GridSet s = shell(t, b, j);
    CHECK((acc & s).is_empty());
    acc = acc | s;
  }
  CHECK(acc == ball_set(t, Ball{10, 16 * b.radius}));
}

TEST_CASE("field persistence round trips") {
  const Torus t(2, 4, 1.5);
  Rng rng(9);
  Field f(t, 2);
  for (auto& v : f.values()) v = rng.complex_normal();
  std::stringstream csv;
  write_field_csv(csv, f);
  const Field g = read_field_csv(csv);
  CHECK(g.same_shape(f));
  CHECK(coefficient_norm(g - f) == 0.0);
  std::stringstream bin;
  write_field_binary(bin, f);
  const Field h = read_field_binary(bin);
  CHECK(coefficient_norm(h - f) == 0.0);
}

TEST_CASE("random band-limited fields are reproducible and band-limited") {
  const Torus t(1, 32);
  Rng a(3, 4), b(3, 4);
  const Field u = random_bandlimited(t, 2, a, 3);
  const Field v = random_bandlimited(t, 2, b, 3);
  CHECK(coefficient_norm(u - v) == 0.0);
  const Field uh = forward_transform(u);
  for (std::size_t k = 0; k < t.num_points(); ++k)
    if (std::abs(t.signed_mode(static_cast<int>(k))) > 3)
      for (int c = 0; c < 2; ++c) CHECK(std::abs(uh.at(k, c)) < 1e-12);
}
