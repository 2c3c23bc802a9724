#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "hodgelab/tent.hpp"

using namespace hodgelab;
using std::numbers::pi;

namespace {

TentField constant_tent(const TimeGrid& g, const Torus& t, cplx c) {
  TentField f(g, t, 1);
  for (std::size_t i = 0; i < f.size(); ++i) f.slice(i) = Field::constant(t, {c});
  return f;
}

TentField random_tent(const TimeGrid& g, const Torus& t, int fiber, std::uint64_t seed) {
  Rng rng(seed);
  TentField f(g, t, fiber);
  for (std::size_t i = 0; i < f.size(); ++i)
    for (auto& v : f.slice(i).values()) v = rng.complex_normal();
  return f;
}

double fubini_sum(const TentField& f) {
  double s = 0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f.grid().weight(i) * std::pow(lp_norm(f.slice(i), 2), 2);
  return s;
}

double tent_distance(const TentField& a, const TentField& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::pow(coefficient_norm(a.slice(i) - b.slice(i)), 2);
  return std::sqrt(s);
}

double tent_size(const TentField& a) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::pow(coefficient_norm(a.slice(i)), 2);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("time grids") {
  const TimeGrid g = TimeGrid::geometric(0.01, 0.16);
  CHECK(g.size() == 17);
  double sum = 0;
  for (std::size_t i = 0; i + 1 < g.size(); ++i) {
    CHECK(g.t(i + 1) > g.t(i));
    CHECK(std::abs(g.t(i + 1) / g.t(i) - std::exp2(0.25)) < 1e-12);
  }
  for (double w : g.weights()) sum += w;
  CHECK(sum == doctest::Approx(std::log(16.0)));
  const TimeGrid s = TimeGrid::standard(Torus(1, 64));
  CHECK(s.t_min() == doctest::Approx(4.0 / 64));
  CHECK(s.t_max() == doctest::Approx(1.0 / 8));
  CHECK_THROWS_AS(TimeGrid::geometric(0.1, 0.05), TentError);
}

TEST_CASE("tent norm of a constant field") {
  const Torus t(1, 128, 2.0);
  const TimeGrid g = TimeGrid::geometric(0.0625, 0.25);
  const TentField one = constant_tent(g, t, 1.0);
  const double continuum = 2 * t.period() * std::log(4.0);
  CHECK(std::abs(std::pow(tent_norm(one, 2.0), 2) / continuum - 1) <= 0.05);
  // Homogeneity on a single slice.
  TentField single(g, t, 1);
  single.slice(3) = Field::constant(t, {1.0});
  TentField doubled = single;
  doubled *= 2.0;
  CHECK(tent_norm(doubled, 1.5) == doctest::Approx(2 * tent_norm(single, 1.5)));
  CHECK_THROWS_AS(tent_norm(one, 2.0, 5.0), TentError);  // 5 * 0.25 > period / 2
}

TEST_CASE("Fubini identity at p = 2 and aperture laws") {
  for (int dim = 1; dim <= 2; ++dim) {
    const Torus t(dim, dim == 1 ? 64 : 32);
    const TimeGrid g = TimeGrid::geometric(t.spacing(), t.period() / 8);
    const TentField f = random_tent(g, t, 2, 10 + dim);
    const double lhs = std::pow(tent_norm(f, 2.0), 2);
    const double rhs = unit_ball_volume(dim) * fubini_sum(f);
    CHECK(std::abs(lhs - rhs) <= 1e-8 * rhs);
    CHECK(std::pow(vertical_norm(f, 2.0), 2) == doctest::Approx(fubini_sum(f)).epsilon(1e-12));
    for (double p : {1.5, 2.0, 3.0}) {
      const double base = tent_norm(f, p, 1.0);
      for (double a : {2.0, 4.0}) {
        const double wide = tent_norm(f, p, a);
        CHECK(base <= wide);
        CHECK(std::log(wide / base) / std::log(a) <= dim / std::min(p, 2.0) + 0.2);
      }
    }
  }
}

TEST_CASE("Carleson norm") {
  const Torus t(1, 128, 1.0);
  const TimeGrid g = TimeGrid::geometric(0.03125, 0.25);
  SUBCASE("single cell") {
    TentField f(g, t, 1);
    f.slice(0).at(40, 0) = 3.0;
    const double expected = 3.0 * std::sqrt(t.spacing() * 0.5 * std::log(g.ratio()) / g.t(1));
    CHECK(carleson_norm(f) == doctest::Approx(expected).epsilon(1e-10));
  }
  SUBCASE("constant") {
    const double c = carleson_norm(constant_tent(g, t, 1.0));
    CHECK(std::abs(c / std::sqrt(2 * std::log(8.0)) - 1) <= 0.1);
  }
}

TEST_CASE("vertical norm") {
  const Torus t(1, 64, 3.0);
  const TimeGrid g = TimeGrid::geometric(0.1, 0.4);
  for (double p : {1.5, 2.0, 3.0})
    CHECK(vertical_norm(constant_tent(g, t, 1.0), p) ==
          doctest::Approx(std::sqrt(std::log(4.0)) * std::pow(3.0, 1 / p)).epsilon(1e-10));
  // Refinement oracle: the same continuum bump field on grids m and 2m.
  const TimeGrid gg = TimeGrid::geometric(0.02, 0.2);
  Rng a(5), b(5);
  const TentField coarse = random_tent_bumps(gg, Torus(1, 64), 1, a);
  const TentField fine = random_tent_bumps(gg, Torus(1, 128), 1, b);
  const double vc = vertical_norm(coarse, 1.5), vf = vertical_norm(fine, 1.5);
  CHECK(std::abs(vc - vf) <= 0.02 * vf);
}

TEST_CASE("dyadic averaging") {
  const Torus t(1, 64, 1.0);
  const double tt = 4 * t.spacing();  // level 2: cubes of 4 points
  CHECK(dyadic_level(t, tt) == 2);
  const Field c = Field::constant(t, {cplx(1, 2)});
  CHECK(coefficient_norm(dyadic_average(c, tt) - c) < 1e-14);

  Field ind(t, 1);
  for (std::size_t x = 8; x < 12; ++x) ind.at(x, 0) = 1.0;
  CHECK(coefficient_norm(dyadic_average(ind, tt) - ind) < 1e-14);

  // e^{i w x}: mean over [x0, x0 + L) of the sampled exponential (Riemann sum, 4 points).
  Field e(t, 1);
  const double w = 2 * pi * 3;
  for (std::size_t x = 0; x < t.num_points(); ++x) e.at(x, 0) = std::exp(cplx(0, w * x * t.spacing()));
  const Field avg = dyadic_average(e, tt);
  for (std::size_t x = 0; x < t.num_points(); ++x) {
    const std::size_t x0 = x - x % 4;
    // Geometric series closed form: (1/4) sum_{k<4} e^{i w (x0 + k) h}.
    const cplx q = std::exp(cplx(0, w * t.spacing()));
    const cplx mean = std::exp(cplx(0, w * x0 * t.spacing())) * (1.0 - std::pow(q, 4)) / (4.0 * (1.0 - q));
    CHECK(std::abs(avg.at(x, 0) - mean) < 1e-13);
  }
  // Idempotent and contractive.
  Rng rng(2);
  const Field u = random_bandlimited(t, 2, rng);
  const Field au = dyadic_average(u, 0.1);
  CHECK(coefficient_norm(dyadic_average(au, 0.1) - au) < 1e-14);
  CHECK(lp_norm(au, 2) <= lp_norm(u, 2) + 1e-14);
  CHECK_THROWS_AS(dyadic_average(u, 2.0), TentError);
}

TEST_CASE("principal part and the splitting") {
  const Torus t(1, 64);
  const TimeGrid g = TimeGrid::standard(t);
  SUBCASE("unperturbed: gamma_t = 0 and principal = 0") {
    auto op = std::make_shared<PerturbedDirac>(make_dirac1d_symbol(), t);
    const ResolventPlan plan(op);
    const PrincipalPart pp = principal_part(plan, g);
    for (const auto& m : pp.gamma) CHECK(m.sup_norm() < 1e-13);
    Rng rng(1);
    const Field u = random_bandlimited(t, 2, rng);
    const PrincipalSplit s = principal_split(plan, pp, u, 2);
    CHECK(tent_size(s.principal) < 1e-13);
    CHECK(tent_distance(s.approx, s.full) < 1e-13);
  }
  SUBCASE("perturbed: gamma_t nonzero, local L2 bound, exact reassembly") {
    Rng rng(3);
    auto op = std::make_shared<PerturbedDirac>(make_dirac1d_symbol(), t,
                                               random_accretive(t, 2, 0.5, Roughness::rough, rng),
                                               random_accretive(t, 2, 0.5, Roughness::rough, rng));
    const ResolventPlan plan(op);
    const PrincipalPart pp = principal_part(plan, g);
    double biggest = 0, worst_local = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      biggest = std::max(biggest, pp.gamma[i].sup_norm());
      // ||gamma_t||_{L^2(B(x0,t))} / t^{n/2} for x0 = 0, per column.
      const GridSet ball = ball_set(t, Ball{0, g.t(i)});
      for (int k = 0; k < 2; ++k) {
        Field col = pp.column(k).slice(i);
        worst_local = std::max(worst_local, lp_norm(restrict_to(col, ball), 2) / std::sqrt(g.t(i)));
      }
    }
    CHECK(biggest > 1e-3);
    CHECK(worst_local < 10.0);
    CHECK(std::isfinite(carleson_norm(pp.column(0))));
    const Field u = random_bandlimited(t, 2, rng);
    const PrincipalSplit s = principal_split(plan, pp, u, 2);
    CHECK(tent_distance(s.approx + s.principal, s.full) <= 1e-10 * tent_size(s.full));
  }
}

TEST_CASE("Schur operators: closed form for K = I, K^-_1") {
  const Torus t(1, 16);
  const TimeGrid g = TimeGrid::geometric(1.0 / 64, 0.25, std::exp2(1.0 / 128));
  const double a = 1.0 / 32, b = 1.0 / 8;
  // The indicator takes its midpoint value 1/2 at the jumps, as the trapezoid rule expects.
  TentField f(g, t, 1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const bool at_a = std::abs(g.t(i) / a - 1) < 1e-9, at_b = std::abs(g.t(i) / b - 1) < 1e-9;
    if (at_a || at_b) f.slice(i) = Field::constant(t, {1.0});
    else if (g.t(i) > a && g.t(i) < b) f.slice(i) = Field::constant(t, {2.0});
  }
  const TentField out = schur_apply(identity_kernel(), SchurVariant::minus, 1.0, f);
  for (std::size_t i = 0; i < g.size(); i += 16) {
    const double tt = g.t(i);
    const double expected = tt < b ? 2.0 * tt * (1 / std::max(tt, a) - 1 / b) : 0.0;
    const double got = out.slice(i).at(0, 0).real();
    if (expected > 0.05) CHECK(std::abs(got - expected) <= 0.01 * expected);
    if (tt > b * 1.01) CHECK(std::abs(got) < 1e-14);
  }
  CHECK(tent_size(schur_apply(identity_kernel(), SchurVariant::plus, cplx(0.5, 3), f.zeros_like())) == 0.0);
  // Linearity.
  const TentField r1 = random_tent(g, t, 1, 1), r2 = random_tent(g, t, 1, 2);
  const cplx z(0.5, -1.0);
  TentField sum = r1;
  sum += r2;
  const TentField lhs = schur_apply(identity_kernel(), SchurVariant::plus, z, sum);
  const TentField rhs = schur_apply(identity_kernel(), SchurVariant::plus, z, r1) +
                        schur_apply(identity_kernel(), SchurVariant::plus, z, r2);
  CHECK(tent_distance(lhs, rhs) <= 1e-12 * tent_size(lhs));
}

TEST_CASE("Schur uniformity in gamma for the high-frequency kernel") {
  const Torus t(1, 32);
  auto op = std::make_shared<PerturbedDirac>(make_dirac1d_symbol(), t);
  const ResolventPlan plan(op);
  const TimeGrid g = TimeGrid::geometric(t.spacing(), 0.25);
  const SeparableKernel k = high_frequency_kernel(plan, g, 2);
  double lo = 1e300, hi = 0;
  for (double gamma : {0.0, 1.0, -1.0, 10.0, -10.0}) {
    const double e = schur_norm_estimate(k, SchurVariant::plus, cplx(0.5, gamma), g, t, 2, 7).estimate;
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  CHECK(hi / lo <= 3.0);
}

TEST_CASE("factorization check") {
  const Torus t(1, 64);
  const TimeGrid g = TimeGrid::standard(t);
  const TentField one = constant_tent(g, t, 1.0);
  const FactorizationResult r = factorization_check(one, one, 2.0, 2.0);
  CHECK(std::isfinite(r.ratio));
  CHECK(r.ratio > 0);
  CHECK(r.lhs == doctest::Approx(tent_norm(one, 2.0)));
  CHECK(r.f_norm == doctest::Approx(std::sqrt(t.period())));  // N(x) = 1, L^2 norm
  const FactorizationResult z = factorization_check(one, one.zeros_like(), 1.5, 3.0);
  CHECK(z.lhs == 0.0);
  CHECK(z.ratio == 0.0);
}

TEST_CASE("non-tangential maximal bound") {
  const Torus t(2, 16, 2.0);
  const TimeGrid g = TimeGrid::geometric(2 * t.spacing(), t.period() / 4);
  auto op = std::make_shared<PerturbedDirac>(make_forms(2), t);
  const ResolventPlan plan(op);
  const Field one = Field::constant(t, {1.0, 0.0, 0.0, 0.0});
  auto pt = [&](double s, const Field& u) { return p_t(plan, s, u); };
  for (double p : {1.5, 2.0}) {
    const NontangentialResult r = nontangential_max(one, pt, g, p);
    CHECK(r.norm == doctest::Approx(std::pow(t.volume(), 1 / p)).epsilon(1e-10));
  }
  auto zero = [](double, const Field& u) { return u.zeros_like(); };
  CHECK(nontangential_max(one, zero, g, 2.0).norm == 0.0);
  Rng rng(4);
  const Field u = random_bandlimited(t, 4, rng);
  const NontangentialResult r = nontangential_max(u, pt, g, 2.0);
  CHECK(r.norm <= 5 * r.maximal);
}

TEST_CASE("Calderon constants") {
  CHECK(calderon_constant(1) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(calderon_constant(2) == doctest::Approx(12.0).epsilon(1e-6));
}

TEST_CASE("tent field serialisation has a header and one block per slice") {
  const Torus t(1, 8);
  const TimeGrid g = TimeGrid::geometric(0.1, 0.2, std::sqrt(2.0));
  std::stringstream os;
  write_tent_csv(os, random_tent(g, t, 1, 3));
  std::string header, first;
  std::getline(os, header);
  std::getline(os, first);
  CHECK(header == "K,n,m,period,N");
  CHECK(first == "3,1,8,1,1");
}
