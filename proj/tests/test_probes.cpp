#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hodgelab/probes.hpp"

using namespace hodgelab;
using std::numbers::pi;

namespace {

OperatorSpec spec1d(int m, double amplitude, std::uint64_t seed) {
  OperatorSpec s;
  s.builtin = "dirac1d";
  s.m = m;
  s.amplitude = amplitude;
  s.roughness = Roughness::rough;
  s.seed = seed;
  return s;
}

OperatorSpec elliptic(int n, int m, double amplitude, double a_amplitude, std::uint64_t seed) {
  OperatorSpec s;
  s.builtin = "elliptic-" + std::to_string(n);
  s.m = m;
  s.amplitude = amplitude;
  s.a_amplitude = a_amplitude;
  s.roughness = Roughness::rough;
  s.seed = seed;
  return s;
}

TrialOptions trials(int count, std::uint64_t seed, int workers = 1) {
  TrialOptions o;
  o.trials = count;
  o.seed = seed;
  o.workers = workers;
  return o;
}

double rel(const Field& a, const Field& b) { return coefficient_norm(a - b) / coefficient_norm(b); }

}  // namespace

TEST_CASE("builtin operators and their audits") {
  auto op = build_operator(spec1d(32, 0.5, 1));
  CHECK_FALSE(op->is_unperturbed());
  const AccretivityReport a = audit_operator(*op, 16, 2);
  CHECK(a.kappa1 >= 0.3);
  CHECK(a.kappa2 >= 0.3);
  CHECK(a.omega < pi / 2);
  // Same seed, same coefficients.
  auto again = build_operator(spec1d(32, 0.5, 1));
  CHECK(again->b1()->at(5) == op->b1()->at(5));

  CHECK_THROWS_AS(build_operator(spec1d(32, 1.0, 1)), ProbeError);
  CHECK_THROWS_AS(build_operator(spec1d(31, 0.2, 1)), ProbeError);
  OperatorSpec forms;
  forms.builtin = "forms-2";
  forms.m = 8;
  forms.amplitude = 0.2;
  CHECK_THROWS_AS(build_operator(forms), ProbeError);
  forms.builtin = "nonsense";
  CHECK_THROWS_AS(build_operator(forms), ProbeError);

  // A rotation by 2 radians leaves the sector: accretivity fails.
  OperatorSpec rotated = spec1d(32, 0.3, 3);
  rotated.phase = 2.0;
  auto bad = build_operator(rotated);
  try {
    audit_operator(*bad, 16, 4);
    FAIL("expected an accretivity failure");
  } catch (const AuditError& e) {
    CHECK(e.kind() == "accretivity");
  }
}

TEST_CASE("catalogues and descriptions") {
  const std::string d = describe_builtin("elliptic-2");
  CHECK(d.find("n = 2") != std::string::npos);
  CHECK(d.find("Pi_B = [[0, -a div A], [grad, 0]]") != std::string::npos);
  CHECK(builtin_dimension("elliptic-3") == 3);
  CHECK(builtin_dimension("dirac1d") == 1);
  CHECK_THROWS_AS(describe_builtin("elliptic-x"), ProbeError);
  std::vector<std::string> names;
  for (const auto& e : experiment_catalog()) names.push_back(e.name);
  for (const char* required : {"identities", "hodge", "offdiag", "sq_equiv", "low_freq", "high_freq",
                               "conical_vertical", "kato", "riesz", "sgn", "sobolev", "schur",
                               "factorization", "tent_laws"})
    CHECK(std::find(names.begin(), names.end(), required) != names.end());
  CHECK_THROWS_AS(describe_experiment("nope"), ProbeError);
}

TEST_CASE("ratio summaries and refinement drift") {
  std::vector<TrialRecord> t{{0, 2.0, 1.0, 2.0}, {1, 3.0, 1.0, 3.0}, {2, 1.0, 0.0, 0.0}};
  RatioReport r = summarize("x", t);
  CHECK(r.c == 2.0);
  CHECK(r.C == 3.0);
  CHECK(r.spread == doctest::Approx(1.5));
  CHECK(r.degenerate == 1);
  CHECK(r.c <= r.C);
  RatioReport fine = summarize("x", {{0, 2.2, 1.0, 2.2}, {1, 3.0, 1.0, 3.0}});
  CHECK(compare_refinement(r, fine, 0.05) == doctest::Approx(0.1));
  CHECK_FALSE(fine.stable);
  const RatioReport empty = summarize("x", {{0, 1.0, 0.0, 0.0}});
  CHECK(std::isnan(empty.spread));
  CHECK_FALSE(empty.stable);
}

TEST_CASE("algebraic identities in both solver modes") {
  auto op = build_operator(spec1d(64, 0.5, 5));
  for (SolverMode mode : {SolverMode::dense, SolverMode::iterative}) {
    SolverOptions o;
    o.mode = mode;
    const ResolventPlan plan(op, o);
    Rng rng(6);
    const Field u = random_bandlimited(op->torus(), 2, rng);
    const IdentityReport r = algebraic_identities(plan, 0.1, 0.03, u, 2);
    CHECK(r.max() <= 1e-8);
  }
  const ResolventPlan plan(op);
  CHECK_THROWS_AS(algebraic_identities(plan, 0.01, 0.1, Field(op->torus(), 2), 2), ProbeError);
}

TEST_CASE("Hodge checks") {
  OperatorSpec s;
  s.builtin = "forms-2";
  s.m = 8;
  auto forms = build_operator(s);
  const ResolventPlan exact(forms);
  Rng rng(7);
  const HodgeCheck e = hodge_check(exact, random_bandlimited(forms->torus(), 4, rng));
  CHECK(e.exact);
  CHECK(e.sum_error <= 1e-6);
  CHECK(e.idempotency_error <= 1e-6);
  CHECK(e.gamma_residual <= 1e-10);

  auto op = build_operator(spec1d(32, 0.5, 8));
  const ResolventPlan plan(op);
  const HodgeCheck p = hodge_check(plan, random_bandlimited(op->torus(), 2, rng));
  CHECK_FALSE(p.exact);
  CHECK(p.sum_error <= 1e-4);
  CHECK(p.idempotency_error <= 1e-4);
}

TEST_CASE("off-diagonal decay orders") {
  const std::vector<double> seps{1, 2, 4, 8};
  SUBCASE("unperturbed P_t decays fast") {
    auto op = build_operator(spec1d(64, 0.0, 0));
    const ResolventPlan plan(op);
    const auto ts = offdiag_times(op->torus(), seps);
    CHECK(ts.size() == 3);
    CHECK(ts.back() * (1 + 8) <= op->torus().period() / 2 + 1e-12);
    const OffdiagResult r = offdiag_order([&](double t, const Field& u) { return p_t(plan, t, u); },
                                          op->torus(), 2, ts, seps, 0, 1);
    CHECK((r.order >= 4 || r.noise_floor));
    CHECK(r.samples.size() == ts.size() * seps.size());
  }
  SUBCASE("perturbed resolvent decays at least quadratically") {
    auto op = build_operator(spec1d(64, 0.5, 9));
    const ResolventPlan plan(op);
    const OffdiagResult r =
        offdiag_order([&](double t, const Field& u) { return plan.resolvent(t, u); }, op->torus(), 2,
                      offdiag_times(op->torus(), seps), seps, 0, 2);
    CHECK(r.order >= 2);
    CHECK(std::isfinite(r.residual));
  }
  SUBCASE("dyadic averages are local: the block is exactly zero") {
    const Torus t(1, 64);
    const std::vector<double> ts{2 * t.spacing(), 4 * t.spacing()};
    const OffdiagResult r = offdiag_order([](double tt, const Field& u) { return dyadic_average(u, tt); },
                                          t, 1, ts, {1, 2, 3, 4}, 0, 3);
    CHECK(r.noise_floor);
    for (const auto& s : r.samples) CHECK(s[2] == 0.0);
  }
}

TEST_CASE("square-function ratios, unperturbed closed form") {
  auto op = build_operator(spec1d(64, 0.0, 0));
  const ResolventPlan plan(op);
  const TimeGrid g = TimeGrid::standard(op->torus());
  // A single mode (0, e^{2 pi i k x}) lies in R(Gamma); |Q_t| there is t w / (1 + t^2 w^2).
  const Torus& t = op->torus();
  const int k = 3;
  const double w = 2 * pi * k;
  Field u(t, 2);
  for (std::size_t x = 0; x < t.num_points(); ++x)
    u.at(x, 1) = std::exp(cplx(0, w * t.coord(x)[0] * t.spacing()));
  std::vector<Field> slices;
  double expected = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    slices.push_back(q_t_power(plan, g.t(i), 2, u));
    const double q = g.t(i) * w / (1 + g.t(i) * g.t(i) * w * w);
    expected += g.weight(i) * std::pow(q, 4);
  }
  expected = std::sqrt(unit_ball_volume(1) * expected) * lp_norm(u, 2);
  CHECK(tent_norm(TentField(g, std::move(slices)), 2.0) == doctest::Approx(expected).epsilon(1e-8));

  const RatioReport r = sq_equiv(plan, 2.0, 2, Subspace::range_gamma, g, trials(6, 10));
  CHECK(r.degenerate == 0);
  CHECK(r.c > 0);
  CHECK(r.c <= r.C);
  CHECK(r.spread <= 4.0);
}

TEST_CASE("square-function ratios, perturbed, and determinism across workers") {
  auto op = build_operator(spec1d(64, 0.5, 11));
  const ResolventPlan plan(op);
  const TimeGrid g = TimeGrid::standard(op->torus());
  const RatioReport a = sq_equiv(plan, 2.0, 2, Subspace::range_pi_b, g, trials(4, 12, 1));
  const RatioReport b = sq_equiv(plan, 2.0, 2, Subspace::range_pi_b, g, trials(4, 12, 4));
  CHECK(std::isfinite(a.spread));
  CHECK(a.spread <= 100);
  REQUIRE(a.trials.size() == b.trials.size());
  for (std::size_t i = 0; i < a.trials.size(); ++i) CHECK(a.trials[i].ratio == b.trials[i].ratio);
  CHECK_THROWS_AS(sq_equiv(plan, 2.0, 0, Subspace::range_gamma, g, trials(1, 0)), ProbeError);
  CHECK(parse_subspace("R(Gamma)") == Subspace::range_gamma);
  CHECK(to_string(parse_subspace("range_pi_b")) == "range_pi_b");
  CHECK_THROWS_AS(parse_subspace("everything"), ProbeError);
}

TEST_CASE("low and high frequency splits") {
  auto op = build_operator(spec1d(32, 0.4, 13));
  const ResolventPlan plan(op);
  const TimeGrid g = TimeGrid::geometric(op->torus().spacing(), 0.125);
  const LowFreqReport lo = low_freq(plan, 2.0, 2, 2, g, trials(3, 14));
  CHECK(lo.reassembly_error <= 1e-10);
  CHECK(std::isfinite(lo.ratio.C));
  CHECK(lo.principal.C > 0);
  const HighFreqReport hi = high_freq(plan, 2.0, 2, 2, g, trials(3, 15));
  CHECK(hi.identity_error <= 1e-8);
  CHECK(std::isfinite(hi.ratio.C));
  const RatioReport cv = conical_vertical(plan, 2.0, 1, g, trials(3, 16));
  CHECK(cv.c > 0);
  CHECK(std::isfinite(cv.C));
}

TEST_CASE("Kato and Riesz identity case") {
  auto op = build_operator(elliptic(2, 16, 0.0, 0.0, 0));
  const ResolventPlan plan(op);
  const RatioReport k = kato_experiment(plan, 2.0, trials(5, 17));
  CHECK(std::abs(k.c - 1) <= 1e-6);
  CHECK(std::abs(k.C - 1) <= 1e-6);
  const RieszReport r = riesz_experiment(plan, 2.0, trials(3, 18));
  CHECK(std::abs(r.ratio.c - 1) <= 1e-6);
  CHECK(std::abs(r.ratio.C - 1) <= 1e-6);
  CHECK(r.involution_error <= 1e-4);
  // Not an elliptic operator.
  const ResolventPlan other(build_operator(spec1d(16, 0.0, 0)));
  CHECK_THROWS_AS(kato_experiment(other, 2.0, trials(1, 0)), ProbeError);
}

TEST_CASE("Kato ratio with rough coefficients stays bounded") {
  auto op = build_operator(elliptic(2, 16, 0.4, 0.3, 19));
  const ResolventPlan plan(op);
  const RatioReport k = kato_experiment(plan, 2.0, trials(4, 20));
  CHECK(k.c > 0);
  CHECK(k.spread <= 50);
}

TEST_CASE("sgn involution and the Sobolev probe") {
  auto op = build_operator(spec1d(32, 0.5, 21));
  const ResolventPlan plan(op);
  const RatioReport s = sgn_involution(plan, trials(3, 22));
  CHECK(s.C <= 1e-4);
  const SobolevReport sob = sobolev_resolvent_probe(plan, 1.5, {0.05, 0.1}, trials(3, 23));
  CHECK(sob.p_star == doctest::Approx(0.6));
  CHECK_FALSE(sob.meaningful);
  CHECK(std::isfinite(sob.ratio.C));
  CHECK(sob.ratio.c > 0);
  CHECK_THROWS_AS(sobolev_resolvent_probe(plan, 1.0, {0.1}, trials(1, 0)), ProbeError);
}

TEST_CASE("dense oracle") {
  auto op = build_operator(spec1d(16, 0.5, 24));
  const ResolventPlan plan(op);
  Rng rng(25);
  const Field u = random_bandlimited(op->torus(), 2, rng);
  DenseOracleInfo info;
  CHECK(rel(dense_oracle(*op, [](cplx) { return cplx(1); }, u, &info), u) <= 1e-10);
  CHECK(info.null_dim >= 1);
  const double t = 0.2;
  const Field r = dense_oracle(*op, [&](cplx z) { return 1.0 / (1.0 + cplx(0, t) * z); }, u);
  CHECK(rel(r, plan.resolvent(t, u)) <= 1e-8);
  const PsiFunction psi = make_psi("rational(1,1)");
  CHECK(rel(dense_oracle(*op, psi.eval, u), apply_psi(plan, psi, u)) <= 1e-6);
  // 2D elliptic at m = 8.
  auto ell = build_operator(elliptic(2, 8, 0.4, 0.2, 26));
  const ResolventPlan eplan(ell);
  const Field v = random_bandlimited(ell->torus(), 3, rng);
  CHECK(rel(dense_oracle(*ell, [&](cplx z) { return 1.0 / (1.0 + cplx(0, t) * z); }, v),
            eplan.resolvent(t, v)) <= 1e-8);
}

TEST_CASE("Schur uniformity, factorisation and tent laws") {
  auto op = build_operator(spec1d(32, 0.0, 0));
  const ResolventPlan plan(op);
  const TimeGrid g = TimeGrid::geometric(op->torus().spacing(), 0.125);
  const SchurReport s = schur_uniformity(plan, g, 2, 0.5, {0.0, 1.0, -1.0, 10.0, -10.0}, 27);
  CHECK(s.norms.size() == 5);
  CHECK(s.max_over_min <= 3.0);
  CHECK_THROWS_AS(schur_uniformity(plan, g, 2, 0.5, {}, 0), ProbeError);

  const FactorizationReport f = factorization_experiment(op->torus(), g, 2.0, 2.0, 6, 28);
  CHECK(f.pairs.size() == 6);
  CHECK(std::isfinite(f.max_ratio));
  CHECK(f.max_ratio > 0);
  const FactorizationReport f4 = factorization_experiment(op->torus(), g, 2.0, 2.0, 6, 28, 4);
  CHECK(f4.max_ratio == f.max_ratio);

  const TentLawReport t = tent_laws(op->torus(), g, 8, {1.5, 2.0, 3.0}, {2.0, 4.0}, 29);
  CHECK(t.fields == 8);
  CHECK(t.monotonicity_violations == 0);
  CHECK(t.max_growth_exponent_excess <= 0);
  CHECK(t.max_fubini_error <= 1e-8);
}
