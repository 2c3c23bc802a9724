#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hodgelab/dirac.hpp"

using namespace hodgelab;
using std::numbers::pi;

namespace {

Field mode(const Torus& t, int fiber, int comp, int k) {
  Field f(t, fiber);
  for (std::size_t x = 0; x < t.num_points(); ++x)
    f.at(x, comp) = std::exp(cplx(0, 2 * pi * k * t.coord(x)[0] * t.spacing() / t.period()));
  return f;
}

Field random_field(const Torus& t, int fiber, std::uint64_t seed) {
  Rng rng(seed);
  return random_bandlimited(t, fiber, rng);
}

double rel(const Field& a, const Field& b) { return coefficient_norm(a - b) / coefficient_norm(b); }

Vector flatten(const Field& u) { return Eigen::Map<const Vector>(u.values().data(), u.size()); }

}  // namespace

TEST_CASE("1D model: Gamma and Gamma^* on a pure mode") {
  const Torus t(1, 32, 2.0);
  const PerturbedDirac op(make_dirac1d_symbol(), t);
  const double w = 2 * pi / t.period();
  const Field u = mode(t, 2, 0, 1);
  const Field gu = op.apply_gamma(u);
  const Field expected = cplx(w, 0) * mode(t, 2, 1, 1);
  CHECK(coefficient_norm(gu - expected) < 1e-12 * coefficient_norm(expected));
  CHECK(coefficient_norm(op.apply_gamma_star(u)) < 1e-12);
}

TEST_CASE("constants are annihilated and Gamma is nilpotent") {
  const Torus t(2, 8);
  for (const DiracSymbol& s : {make_forms(2), make_gradient_symbol(2)}) {
    const PerturbedDirac op(s, t);
    std::vector<cplx> w(s.fiber_dim(), cplx(0.3, -1.0));
    CHECK(coefficient_norm(op.apply_pi(Field::constant(t, w))) < 1e-12);
    const Field u = random_field(t, s.fiber_dim(), 4);
    CHECK(coefficient_norm(op.apply_gamma(op.apply_gamma(u))) <= 1e-10 * coefficient_norm(u));
    CHECK(s.nilpotency_defect() <= 1e-12);
  }
}

TEST_CASE("nilpotency audit rejects non-nilpotent generators") {
  Matrix g(2, 2);
  g << 0, 1, 1, 0;
  CHECK_THROWS_AS(check_nilpotency(DiracSymbol(1, {g})), AuditError);
  try {
    check_nilpotency(DiracSymbol(1, {g}));
  } catch (const AuditError& e) {
    CHECK(e.kind() == "nilpotency");
  }
  CHECK_NOTHROW(check_nilpotency(make_forms(3)));
}

TEST_CASE("adjointness of Gamma and Gamma^*") {
  const Torus t(2, 8, 1.5);
  const PerturbedDirac op(make_forms(2), t);
  const Field u = random_field(t, 4, 1), v = random_field(t, 4, 2);
  const cplx lhs = inner(op.apply_gamma(u), v);
  const cplx rhs = inner(u, op.apply_gamma_star(v));
  CHECK(std::abs(lhs - rhs) <= 1e-10 * std::sqrt(std::abs(inner(u, u)) * std::abs(inner(v, v))));
}

TEST_CASE("Pi_B reduces to Pi for B = I and matches the dense matrix") {
  const Torus t(1, 16);
  const DiracSymbol s = make_dirac1d_symbol();
  const PerturbedDirac plain(s, t);
  const PerturbedDirac ident(s, t, MatrixField::identity(t, 2), MatrixField::identity(t, 2));
  const Field u = random_field(t, 2, 8);
  CHECK(coefficient_norm(ident.apply_pi_b(u) - plain.apply_pi(u)) < 1e-12 * coefficient_norm(u));

  Rng rng(17);
  const MatrixField b1 = random_accretive(t, 2, 0.5, Roughness::rough, rng);
  const MatrixField b2 = random_accretive(t, 2, 0.5, Roughness::smooth, rng);
  const PerturbedDirac pert(s, t, b1, b2);
  const Field direct = pert.apply_gamma(u) + b1.apply(pert.apply_gamma_star(b2.apply(u)));
  CHECK(rel(pert.apply_pi_b(u), direct) < 1e-12);
  const Vector dense = pert.dense_matrix() * flatten(u);
  CHECK((dense - flatten(pert.apply_pi_b(u))).norm() <= 1e-10 * dense.norm());
}

TEST_CASE("elliptic block operator maps f + 0 to (0, grad f)") {
  const Torus t(2, 8);
  Rng rng(3);
  Field a = Field::constant(t, {1.0});
  const PerturbedDirac op = make_elliptic(a, MatrixField::identity(t, 2));
  Field f(t, 3);
  const Field scalar = random_bandlimited(t, 1, rng);
  for (std::size_t x = 0; x < t.num_points(); ++x) f.at(x, 0) = scalar.at(x, 0);
  const Field out = op.apply_pi_b(f);
  // grad via the spectral derivative of each axis.
  Field fh = forward_transform(scalar);
  for (int axis = 0; axis < 2; ++axis) {
    Field d = fh;
    for (std::size_t k = 0; k < t.num_points(); ++k) d.at(k, 0) *= cplx(0, t.frequency(k)[axis]);
    const Field g = inverse_transform(d);
    double err = 0, nrm = 0;
    for (std::size_t x = 0; x < t.num_points(); ++x) {
      err += std::norm(out.at(x, 1 + axis) - g.at(x, 0));
      nrm += std::norm(g.at(x, 0));
    }
    CHECK(std::sqrt(err) <= 1e-12 * std::sqrt(nrm));
  }
  for (std::size_t x = 0; x < t.num_points(); ++x) CHECK(std::abs(out.at(x, 0)) < 1e-12);
}

TEST_CASE("elliptic with a = 1, A = I has the symbol [[0, xi], [xi, 0]] in 1D") {
  const Torus t(1, 16);
  const PerturbedDirac op = make_elliptic(Field::constant(t, {1.0}), MatrixField::identity(t, 1));
  const std::array<double, 3> xi{2.5, 0, 0};
  const Matrix p = op.symbol().pi_hat(xi);
  CHECK(std::abs(p(0, 0)) < 1e-15);
  CHECK(std::abs(p(1, 1)) < 1e-15);
  CHECK(std::abs(std::abs(p(0, 1)) - 2.5) < 1e-14);
  CHECK(std::abs(std::abs(p(1, 0)) - 2.5) < 1e-14);
  // Pi_B^2 is block diagonal with L = -div grad in the upper block.
  Rng rng(2);
  const Field u = random_bandlimited(t, 2, rng);
  const Field sq = op.apply_pi_b(op.apply_pi_b(u));
  Field lapl = forward_transform(u);
  for (std::size_t k = 0; k < t.num_points(); ++k) {
    const double x2 = std::pow(t.frequency(k)[0], 2);
    lapl.at(k, 0) *= x2;
    lapl.at(k, 1) *= x2;
  }
  CHECK(rel(sq, inverse_transform(lapl)) < 1e-11);
}

TEST_CASE("(Pi_B)^2 is block diagonal for perturbed elliptic operators") {
  const Torus t(2, 8);
  Rng rng(12);
  Field a = Field::constant(t, {1.0});
  for (std::size_t x = 0; x < t.num_points(); ++x) a.at(x, 0) += 0.3 * rng.uniform(-1, 1);
  const PerturbedDirac op = make_elliptic(a, random_accretive(t, 2, 0.4, Roughness::rough, rng));
  Field f(t, 3);
  const Field s = random_bandlimited(t, 1, rng);
  for (std::size_t x = 0; x < t.num_points(); ++x) f.at(x, 0) = s.at(x, 0);
  const Field out = op.apply_pi_b(op.apply_pi_b(f));
  double off = 0;
  for (std::size_t x = 0; x < t.num_points(); ++x) off += std::norm(out.at(x, 1)) + std::norm(out.at(x, 2));
  CHECK(std::sqrt(off) <= 1e-10 * coefficient_norm(out));
}

TEST_CASE("coercivity audit") {
  const Torus t(1, 32, 1.0);
  CHECK(coercivity_audit(make_dirac1d_symbol(), t).kappa == doctest::Approx(1.0));
  CHECK(coercivity_audit(make_gradient_symbol(1), t).kappa == doctest::Approx(1.0));
  const CoercivityReport z = coercivity_audit(DiracSymbol(1, {Matrix::Zero(2, 2)}), t);
  CHECK(z.vacuous);
  CHECK(std::isinf(z.kappa));
  CHECK(coercivity_audit(make_forms(2), Torus(2, 8)).kappa > 0.5);
}

TEST_CASE("accretivity audit") {
  const Torus t(1, 32);
  const DiracSymbol s = make_dirac1d_symbol();
  SUBCASE("identity") {
    const PerturbedDirac op(s, t, MatrixField::identity(t, 2), MatrixField::identity(t, 2));
    const AccretivityReport r = accretivity_audit(op, 8, 1);
    CHECK(r.kappa1 == doctest::Approx(1.0));
    CHECK(r.kappa2 == doctest::Approx(1.0));
    CHECK(r.omega == 0.0);
  }
  SUBCASE("constant phase") {
    const double phi = 0.6;
    Field ph = Field::constant(t, {std::polar(1.0, phi)});
    const MatrixField b = MatrixField::scalar(ph, 2);
    const PerturbedDirac op(s, t, b, MatrixField::identity(t, 2));
    const AccretivityReport r = accretivity_audit(op, 8, 1);
    CHECK(r.omega1 == doctest::Approx(phi).epsilon(1e-10));
    CHECK(r.omega2 == doctest::Approx(0.0));
  }
  SUBCASE("I + 0.5 diag(e^{i theta(x)})") {
    Rng rng(4);
    MatrixField b(t, 2);
    for (std::size_t x = 0; x < t.num_points(); ++x) {
      b.at(x).setIdentity();
      b.at(x)(0, 0) += 0.5 * std::polar(1.0, rng.uniform(0, 2 * pi));
      b.at(x)(1, 1) += 0.5 * std::polar(1.0, rng.uniform(0, 2 * pi));
    }
    const PerturbedDirac op(s, t, b, b);
    const AccretivityReport r = accretivity_audit(op, 16, 2);
    CHECK(r.kappa1 >= 0.5 - 1e-12);
    CHECK(r.kappa2 >= 0.5 - 1e-12);
    CHECK(pointwise_accretivity(b) >= 0.5 - 1e-12);
  }
  SUBCASE("non-accretive rotation is rejected") {
    Field ph = Field::constant(t, {std::polar(1.0, 2.0)});
    const PerturbedDirac op(s, t, MatrixField::scalar(ph, 2), MatrixField::identity(t, 2));
    CHECK_THROWS_AS(accretivity_audit(op, 8, 1), AuditError);
  }
  SUBCASE("deterministic under a fixed seed") {
    Rng rng(5);
    const PerturbedDirac op(s, t, random_accretive(t, 2, 0.6, Roughness::rough, rng),
                            random_accretive(t, 2, 0.6, Roughness::rough, rng));
    const AccretivityReport a = accretivity_audit(op, 8, 3), b = accretivity_audit(op, 8, 3);
    CHECK(a.kappa1 == b.kappa1);
    CHECK(a.omega == b.omega);
  }
}

TEST_CASE("ellipticity audit") {
  const Torus t(1, 16);
  Field a = Field::constant(t, {-1.0});
  CHECK_THROWS_AS(make_elliptic(a, MatrixField::identity(t, 1)), AuditError);
}

TEST_CASE("structural conditions hold for the built-in constructors") {
  const Torus t(2, 8);
  Rng rng(21);
  Field a = Field::constant(t, {1.0});
  const PerturbedDirac ell = make_elliptic(a, random_accretive(t, 2, 0.5, Roughness::rough, rng));
  const StructuralReport r = structural_audit(ell, 4, 1);
  CHECK(r.gamma_defect < 1e-10);
  CHECK(r.gamma_star_defect < 1e-10);

  Matrix h(2, 2);
  h << 0, 1, 1, 0;
  const PerturbedDirac da = make_da(DiracSymbol(1, {h}), random_accretive(Torus(1, 16), 2, 0.4, Roughness::smooth, rng));
  CHECK(da.fiber_dim() == 4);
  const StructuralReport d = structural_audit(da, 4, 1);
  CHECK(d.gamma_defect < 1e-10);
  CHECK(d.gamma_star_defect < 1e-10);
}

TEST_CASE("forms in two dimensions: d on 0-forms is the gradient") {
  const DiracSymbol f = make_forms(2);
  CHECK(f.fiber_dim() == 4);
  const Torus t(2, 8);
  const PerturbedDirac op(f, t);
  Rng rng(6);
  const Field s = random_bandlimited(t, 1, rng);
  Field u(t, 4);
  for (std::size_t x = 0; x < t.num_points(); ++x) u.at(x, 0) = s.at(x, 0);
  const Field du = op.apply_gamma(u);
  // The 1-form part carries |grad s|^2 in total; the 0- and 2-form parts vanish.
  Field sh = forward_transform(s);
  double grad2 = 0;
  for (std::size_t k = 0; k < t.num_points(); ++k) {
    const auto xi = t.frequency(k);
    grad2 += (xi[0] * xi[0] + xi[1] * xi[1]) * std::norm(sh.at(k, 0));
  }
  double one_form = 0, other = 0;
  for (std::size_t x = 0; x < t.num_points(); ++x) {
    other += std::norm(du.at(x, 0)) + std::norm(du.at(x, 3));
    one_form += std::norm(du.at(x, 1)) + std::norm(du.at(x, 2));
  }
  CHECK(other < 1e-20 * one_form);
  CHECK(one_form == doctest::Approx(grad2).epsilon(1e-12));
}

TEST_CASE("underline swaps the roles of Gamma and Gamma^*") {
  const Torus t(1, 16);
  Rng rng(30);
  const MatrixField b1 = random_accretive(t, 2, 0.4, Roughness::smooth, rng);
  const MatrixField b2 = random_accretive(t, 2, 0.4, Roughness::smooth, rng);
  const PerturbedDirac op(make_dirac1d_symbol(), t, b1, b2);
  const PerturbedDirac u = op.underline();
  const Field v = random_field(t, 2, 9);
  const Field expected = op.apply_gamma_star(v) + b2.apply(op.apply_gamma(b1.apply(v)));
  CHECK(rel(u.apply_pi_b(v), expected) < 1e-12);
}
