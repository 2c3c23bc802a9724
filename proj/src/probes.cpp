#include "hodgelab/probes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "hodgelab/parallel.hpp"

namespace hodgelab {

namespace {

constexpr double kNoiseFloor = 1e-14;
constexpr double kHighFreqIdentityTol = 1e-9;
constexpr std::uint64_t kCoefficientStream = 0xb0b;

/// Parses "<family>-<n>" and returns n; -1 when the name has no suffix.
int family_dimension(const std::string& name, const std::string& family) {
  if (name.rfind(family + "-", 0) != 0) return -1;
  const std::string tail = name.substr(family.size() + 1);
  if (tail.empty() || tail.find_first_not_of("0123456789") != std::string::npos) return -1;
  return std::stoi(tail);
}

MatrixField rotate(MatrixField b, double phase) {
  if (phase == 0.0) return b;
  const cplx e = std::polar(1.0, phase);
  for (std::size_t x = 0; x < b.torus().num_points(); ++x) b.at(x) *= e;
  return b;
}

Field components(const Field& u, int first, int count) {
  Field out(u.torus(), count, u.domain());
  for (std::size_t x = 0; x < u.torus().num_points(); ++x)
    for (int c = 0; c < count; ++c) out.at(x, c) = u.at(x, first + c);
  return out;
}

Field embed_scalar(const Field& f, int fiber) {
  Field out(f.torus(), fiber, f.domain());
  for (std::size_t x = 0; x < f.torus().num_points(); ++x) out.at(x, 0) = f.at(x, 0);
  return out;
}

TentField tent_of(const TimeGrid& grid, const std::function<Field(double)>& slice) {
  std::vector<Field> slices;
  slices.reserve(grid.size());
  for (double t : grid.times()) slices.push_back(slice(t));
  return TentField(grid, std::move(slices));
}

std::vector<TrialRecord> run_trials(int trials, int workers,
                                    const std::function<TrialRecord(std::size_t)>& body) {
  if (trials < 1) throw ProbeError("at least one trial is required");
  std::vector<TrialRecord> out(static_cast<std::size_t>(trials));
  parallel_for(out.size(), workers, [&](std::size_t i) {
    out[i] = body(i);
    out[i].trial = i;
  });
  return out;
}

TrialRecord record(double num, double den) {
  TrialRecord r;
  r.numerator = num;
  r.denominator = den;
  r.ratio = den > 0.0 ? num / den : 0.0;
  return r;
}

void require_elliptic(const ResolventPlan& plan) {
  const int n = plan.op().torus().dim();
  if (plan.op().fiber_dim() != 1 + n || plan.op().name().rfind("elliptic", 0) != 0)
    throw ProbeError("experiment requires an elliptic-n operator");
}

double relative(const Field& err, const Field& ref) {
  const double r = lp_norm(ref, 2.0);
  return r > 0.0 ? lp_norm(err, 2.0) / r : lp_norm(err, 2.0);
}

}  // namespace

// --- operators --------------------------------------------------------------------------

std::shared_ptr<const PerturbedDirac> build_operator(const OperatorSpec& spec) {
  if (spec.m < 2 || spec.m % 2) throw ProbeError("m must be even and >= 2");
  if (!(spec.amplitude >= 0.0) || spec.amplitude >= 1.0 || !(spec.a_amplitude >= 0.0) ||
      spec.a_amplitude >= 1.0)
    throw ProbeError("perturbation amplitudes must lie in [0, 1)");
  Rng rng(spec.seed, kCoefficientStream);
  const bool identity = spec.amplitude == 0.0 && spec.a_amplitude == 0.0 && spec.phase == 0.0;
  const std::string& name = spec.builtin;

  if (name == "dirac1d") {
    const Torus torus(1, spec.m, spec.period);
    if (identity)
      return std::make_shared<PerturbedDirac>(make_dirac1d_symbol(), torus,
                                              std::nullopt, std::nullopt, name);
    MatrixField b1 = random_accretive_diagonal(torus, 2, spec.amplitude, spec.roughness, rng,
                                               spec.band);
    MatrixField b2 = random_accretive_diagonal(torus, 2, spec.amplitude, spec.roughness, rng,
                                               spec.band);
    return std::make_shared<PerturbedDirac>(make_dirac1d_symbol(), torus,
                                            rotate(std::move(b1), spec.phase),
                                            rotate(std::move(b2), spec.phase), name);
  }
  if (const int n = family_dimension(name, "elliptic"); n >= 1) {
    if (n > 3) throw ProbeError("elliptic-n is supported for n = 1, 2, 3");
    const Torus torus(n, spec.m, spec.period);
    if (identity)
      return std::make_shared<PerturbedDirac>(make_gradient_symbol(n), torus, std::nullopt,
                                              std::nullopt, name);
    const MatrixField a1 =
        rotate(random_accretive(torus, 1, spec.a_amplitude, spec.roughness, rng, spec.band),
               spec.phase);
    Field a(torus, 1);
    for (std::size_t x = 0; x < torus.num_points(); ++x) a.at(x, 0) = a1.at(x)(0, 0);
    const MatrixField A =
        rotate(random_accretive(torus, n, spec.amplitude, spec.roughness, rng, spec.band),
               spec.phase);
    return std::make_shared<PerturbedDirac>(make_elliptic(a, A));
  }
  if (const int n = family_dimension(name, "forms"); n >= 1) {
    if (spec.amplitude != 0.0 || spec.a_amplitude != 0.0)
      throw ProbeError("forms-n is available with B = I (or a constant phase) only");
    const Torus torus(n, spec.m, spec.period);
    if (identity)
      return std::make_shared<PerturbedDirac>(make_forms(n), torus, std::nullopt, std::nullopt,
                                              name);
    const int size = 1 << n;
    MatrixField b = rotate(MatrixField::identity(torus, size), spec.phase);
    return std::make_shared<PerturbedDirac>(make_forms(n), torus, b, b, name);
  }
  if (const int n = family_dimension(name, "da"); n >= 1 || name == "da") {
    const int dim = n >= 1 ? n : 1;
    if (dim > 3) throw ProbeError("da-n is supported for n = 1, 2, 3");
    const Torus torus(dim, spec.m, spec.period);
    const DiracSymbol forms = make_forms(dim);
    std::vector<Matrix> gens;
    for (const Matrix& g : forms.generators()) gens.push_back(g + g.adjoint());
    const DiracSymbol d(dim, std::move(gens));
    const MatrixField A = rotate(
        random_accretive(torus, d.fiber_dim(), spec.amplitude, spec.roughness, rng, spec.band),
        spec.phase);
    PerturbedDirac op = make_da(d, A);
    return std::make_shared<PerturbedDirac>(op.symbol(), torus, op.b1(), op.b2(),
                                            "da-" + std::to_string(dim));
  }
  throw ProbeError("unknown builtin operator '" + name + "'");
}

AccretivityReport audit_operator(const PerturbedDirac& op, int trials, std::uint64_t seed) {
  check_nilpotency(op.symbol());
  coercivity_audit(op.symbol(), op.torus());
  if (op.is_unperturbed()) return AccretivityReport{1.0, 1.0, 0.0, 0.0, 0.0};
  const AccretivityReport rep = accretivity_audit(op, trials, seed);
  const StructuralReport s = structural_audit(op, std::min(trials, 4), seed);
  if (s.gamma_defect > 1e-8 || s.gamma_star_defect > 1e-8)
    throw AuditError("nilpotency", "Gamma^*_B or Gamma fails to be nilpotent after perturbation");
  return rep;
}

std::vector<CatalogEntry> builtin_operators() {
  return {
      {"dirac1d", "1D model: Gamma = [[0,0],[d/dx,0]] on C^2, diagonal accretive B1, B2"},
      {"elliptic-n", "divergence form: Pi_B = [[0, -a div A],[grad, 0]] on C^{1+n}"},
      {"forms-n", "differential forms: Gamma = d on C^{2^n}, Pi = d + d^* (B = I)"},
      {"da-n", "DA systems: Pi_B = [[0, A D A],[D, 0]] with D = d + d^* on forms"},
  };
}

std::string describe_builtin(const std::string& name) {
  std::ostringstream os;
  if (name == "dirac1d") {
    os << "dirac1d: n = 1, N = 2\n"
       << "  Gamma = -i G d/dx with G = [[0,0],[1,0]]; Gamma-hat(xi) = [[0,0],[xi,0]]\n"
       << "  B1, B2 = I + rho with diagonal rho, sup ||rho|| = amplitude (< 1)\n"
       << "  Pi_B = Gamma + B1 Gamma^* B2; accretivity holds with kappa >= 1 - amplitude\n";
    return os.str();
  }
  if (const int n = family_dimension(name, "elliptic"); n >= 1) {
    os << name << ": n = " << n << ", N = " << 1 + n << "\n"
       << "  Gamma = [[0, 0], [grad, 0]], Gamma^* = [[0, -div], [0, 0]]\n"
       << "  B1 = diag(a, 0), B2 = diag(0, A) with Re a >= kappa, Re A >= kappa I\n"
       << "  Pi_B = [[0, -a div A], [grad, 0]]\n"
       << "  Pi_B^2 = [[L, 0], [0, -grad a div A]], L = -a div A grad\n"
       << "  (Pi_B^2)^{1/2} (f, 0) = (L^{1/2} f, 0)\n"
       << "  sgn(Pi_B) = [[0, -L^{-1/2} a div A], [grad L^{-1/2}, 0]]\n";
    return os.str();
  }
  if (const int n = family_dimension(name, "forms"); n >= 1) {
    os << name << ": n = " << n << ", N = " << (1 << n) << "\n"
       << "  Gamma = d (exterior derivative), G_j = i (dx_j wedge .)\n"
       << "  Pi = d + d^*, Pi^2 = -Laplacian on forms\n"
       << "  perturbations: only B = I or a constant phase e^{i phase} I\n";
    return os.str();
  }
  if (const int n = family_dimension(name, "da"); n >= 1 || name == "da") {
    const int dim = n >= 1 ? n : 1;
    os << "da-" << dim << ": n = " << dim << ", N = " << 2 * (1 << dim) << "\n"
       << "  D = d + d^* on forms (Hermitian generators), Gamma = [[0, 0], [D, 0]]\n"
       << "  B1 = diag(A, 0), B2 = diag(0, A)\n"
       << "  Pi_B = [[0, A D A], [D, 0]]\n";
    return os.str();
  }
  throw ProbeError("unknown builtin operator '" + name + "'");
}

int builtin_dimension(const std::string& name) {
  if (name == "dirac1d" || name == "da") return 1;
  for (const char* family : {"elliptic", "forms", "da"})
    if (const int n = family_dimension(name, family); n >= 1 && n <= 3) return n;
  throw ProbeError("unknown builtin operator '" + name + "'");
}

std::vector<CatalogEntry> experiment_catalog() {
  return {
      {"identities", "resolvent and P/Q algebraic identities (relative errors)"},
      {"hodge", "Hodge decomposition: component sum and idempotency errors"},
      {"offdiag", "fitted off-diagonal decay order of P_t (unperturbed) and R_t^B"},
      {"sq_equiv", "tent_norm((Q_t^B)^M u)/||u||_p on R(Gamma), R(Gamma*_B) or R(Pi_B)"},
      {"low_freq", "tent_norm((Q_t^B)^M P_t^N u)/||u||_p with the principal-part split"},
      {"high_freq", "tent_norm((Q_t^B)^M (I - P_t^N) u)/||u||_p on R(Gamma)"},
      {"conical_vertical", "conical versus vertical square function of (Q_t^B)^M G(t)"},
      {"kato", "||L^{1/2} f||_p / ||grad f||_p for elliptic-n"},
      {"riesz", "||grad L^{-1/2} g||_p / ||g||_p for elliptic-n"},
      {"sgn", "sgn(Pi_B)^2 u = u on R(Pi_B)"},
      {"sobolev", "sup_t ||t R_t^B u||_p / ||u||_{p_*} on R(Gamma)"},
      {"calculus", "empirical H-infinity calculus bound over the psi dictionary"},
      {"schur", "T^{2,2} norms of Schur operators K^+_{eps + i gamma}"},
      {"factorization", "||F G||_{T^{p,q}} / (||F||_{T^{p,inf}} ||G||_{T^{inf,q}})"},
      {"tent_laws", "aperture monotonicity and growth, Fubini identity"},
  };
}

std::string describe_experiment(const std::string& name) {
  for (const auto& e : experiment_catalog())
    if (e.name == name) return e.name + ": " + e.summary + "\n";
  throw ProbeError("unknown experiment '" + name + "'");
}

// --- ratio reports ----------------------------------------------------------------------

RatioReport summarize(std::string quantity, std::vector<TrialRecord> trials) {
  RatioReport r;
  r.quantity = std::move(quantity);
  r.c = std::numeric_limits<double>::infinity();
  r.C = 0.0;
  for (const TrialRecord& t : trials) {
    if (!(t.denominator > 0.0) || !std::isfinite(t.ratio)) {
      ++r.degenerate;
      continue;
    }
    r.c = std::min(r.c, t.ratio);
    r.C = std::max(r.C, t.ratio);
  }
  if (r.degenerate == trials.size()) {
    r.c = r.C = 0.0;
    r.spread = std::numeric_limits<double>::quiet_NaN();
    r.stable = false;
  } else {
    r.spread = r.c > 0.0 ? r.C / r.c : std::numeric_limits<double>::infinity();
  }
  r.trials = std::move(trials);
  return r;
}

double compare_refinement(const RatioReport& coarse, RatioReport& fine, double tol) {
  auto rel = [](double a, double b) {
    return a > 0.0 ? std::abs(b - a) / a : (b == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  };
  fine.drift = std::max(rel(coarse.c, fine.c), rel(coarse.C, fine.C));
  fine.stable = fine.drift <= tol;
  return fine.drift;
}

Subspace parse_subspace(const std::string& s) {
  if (s == "range_gamma" || s == "R(Gamma)") return Subspace::range_gamma;
  if (s == "range_gamma_star_b" || s == "R(Gamma*_B)") return Subspace::range_gamma_star_b;
  if (s == "range_pi_b" || s == "R(Pi_B)") return Subspace::range_pi_b;
  throw ProbeError("unknown subspace '" + s + "'");
}

std::string to_string(Subspace s) {
  switch (s) {
    case Subspace::range_gamma: return "range_gamma";
    case Subspace::range_gamma_star_b: return "range_gamma_star_b";
    case Subspace::range_pi_b: return "range_pi_b";
  }
  return "?";
}

Field sample_subspace(const ResolventPlan& plan, Subspace s, Rng& rng, int band) {
  const Field v = random_bandlimited(plan.op().torus(), plan.op().fiber_dim(), rng, band);
  switch (s) {
    case Subspace::range_gamma: return hodge_projections(plan.unperturbed(), v).range_gamma;
    case Subspace::range_gamma_star_b: return plan.op().apply_gamma_star_b(v);
    case Subspace::range_pi_b: return v - null_projection(plan, v);
  }
  return v;
}

// --- off-diagonal decay ------------------------------------------------------------------

OffdiagResult offdiag_order(const std::function<Field(double, const Field&)>& family,
                            const Torus& torus, int fiber, const std::vector<double>& ts,
                            const std::vector<double>& separations, std::size_t center,
                            std::uint64_t seed, int inputs) {
  if (inputs < 1) throw ProbeError("offdiag needs at least one input per t");
  if (separations.size() < 4) throw ProbeError("offdiag needs at least 4 separations per t");
  const double max_sep = *std::max_element(separations.begin(), separations.end());
  OffdiagResult res;
  // per-t centred sums for a fixed-effects slope (common slope, one intercept per t)
  double sxy = 0.0, sxx = 0.0;
  std::vector<std::vector<std::pair<double, double>>> groups;
  std::size_t below = 0, total = 0;
  for (std::size_t it = 0; it < ts.size(); ++it) {
    const double t = ts[it];
    if ((1.0 + max_sep) * t > torus.period() / 2 + 1e-12) continue;
    const GridSet f = ball_set(torus, {center, t});
    if (f.is_empty()) continue;
    Rng rng(seed, it);
    std::vector<Field> outputs;
    for (int k = 0; k < inputs; ++k) {
      Field u(torus, fiber);
      for (std::size_t x = 0; x < torus.num_points(); ++x)
        if (f.contains(x))
          for (int c = 0; c < fiber; ++c) u.at(x, c) = rng.complex_normal();
      u *= 1.0 / lp_norm(u, 2.0);
      outputs.push_back(family(t, u));
    }
    std::vector<std::pair<double, double>> g;
    for (double r : separations) {
      const GridSet e = far_set(f, r * t);
      if (e.is_empty()) continue;
      double ms = 0.0;
      for (const Field& v : outputs) {
        const double nv = lp_norm(restrict_to(v, e), 2.0);
        ms += nv * nv;
      }
      const double val = std::sqrt(ms / static_cast<double>(inputs));
      res.samples.push_back({t, r, val});
      ++total;
      if (val <= kNoiseFloor) {
        ++below;
        continue;
      }
      g.emplace_back(std::log1p(r), std::log(val));
    }
    if (g.size() >= 2) groups.push_back(std::move(g));
  }
  if (total == 0) throw ProbeError("no admissible (t, separation) pairs on this torus");
  if (groups.empty()) {
    // decay below noise floor: report the order that reaching the floor at the
    // smallest separation would imply
    const double r_min = *std::min_element(separations.begin(), separations.end());
    res.noise_floor = true;
    res.order = -std::log(kNoiseFloor) / std::log1p(r_min);
    return res;
  }
  for (const auto& g : groups) {
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : g) mx += x, my += y;
    mx /= g.size();
    my /= g.size();
    for (const auto& [x, y] : g) {
      sxy += (x - mx) * (y - my);
      sxx += (x - mx) * (x - mx);
    }
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  double ss = 0.0;
  for (const auto& g : groups) {
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : g) mx += x, my += y;
    mx /= g.size();
    my /= g.size();
    for (const auto& [x, y] : g) {
      const double r = (y - my) - slope * (x - mx);
      ss += r * r;
      ++res.used;
    }
  }
  res.order = -slope;
  res.residual = std::sqrt(ss / static_cast<double>(res.used));
  res.noise_floor = below > 0;
  return res;
}

std::vector<double> offdiag_times(const Torus& torus, const std::vector<double>& separations) {
  if (separations.empty()) throw ProbeError("offdiag needs separations");
  const double max_sep = *std::max_element(separations.begin(), separations.end());
  const double t_max = torus.period() / (2.0 * (1.0 + max_sep));
  const double q = std::exp2(-0.125);
  return {t_max * q * q, t_max * q, t_max};
}

// --- square functions ---------------------------------------------------------------------

RatioReport sq_equiv(const ResolventPlan& plan, double p, int M, Subspace subspace,
                     const TimeGrid& grid, const TrialOptions& opts) {
  if (M < 1) throw ProbeError("M must be >= 1");
  auto trials = run_trials(opts.trials, opts.workers, [&](std::size_t i) {
    Rng rng(opts.seed, i);
    const Field u = sample_subspace(plan, subspace, rng, opts.band);
    const TentField f = tent_of(grid, [&](double t) { return q_t_power(plan, t, M, u); });
    return record(tent_norm(f, p), lp_norm(u, p));
  });
  return summarize("sq_equiv", std::move(trials));
}

LowFreqReport low_freq(const ResolventPlan& plan, double p, int M, int n_tilde,
                       const TimeGrid& grid, const TrialOptions& opts) {
  if (M < 1 || n_tilde < 1) throw ProbeError("M and N must be >= 1");
  const PrincipalPart gamma = principal_part(plan, grid);
  const ResolventPlan& plain = plan.unperturbed();
  const std::size_t count = static_cast<std::size_t>(std::max(opts.trials, 1));
  std::vector<TrialRecord> full(count), approx(count), principal(count);
  std::vector<double> reassembly(count, 0.0);
  parallel_for(count, opts.workers, [&](std::size_t i) {
    Rng rng(opts.seed, i);
    const Field v = random_bandlimited(plan.op().torus(), plan.op().fiber_dim(), rng, opts.band);
    const Field u = v - null_projection(plain, v);
    const double nu = lp_norm(u, p);
    const TentField f = tent_of(grid, [&](double t) {
      return q_t_power(plan, t, M, p_t_power(plain, t, n_tilde, u));
    });
    const PrincipalSplit split = principal_split(plan, gamma, u, n_tilde);
    full[i] = record(tent_norm(f, p), nu);
    approx[i] = record(tent_norm(split.approx, p), nu);
    principal[i] = record(tent_norm(split.principal, p), nu);
    const double ref = tent_norm(split.full, 2.0);
    const double gap = tent_norm(split.full - split.approx - split.principal, 2.0);
    reassembly[i] = ref > 0.0 ? gap / ref : gap;
    full[i].trial = approx[i].trial = principal[i].trial = i;
  });
  LowFreqReport rep;
  rep.ratio = summarize("low_freq", std::move(full));
  rep.approx = summarize("low_freq_approx", std::move(approx));
  rep.principal = summarize("low_freq_principal", std::move(principal));
  rep.reassembly_error = *std::max_element(reassembly.begin(), reassembly.end());
  return rep;
}

HighFreqReport high_freq(const ResolventPlan& plan, double p, int M, int n_tilde,
                         const TimeGrid& grid, const TrialOptions& opts) {
  if (M < 1 || n_tilde < 1) throw ProbeError("M and N must be >= 1");
  const ResolventPlan& plain = plan.unperturbed();
  const std::size_t count = static_cast<std::size_t>(std::max(opts.trials, 1));
  std::vector<double> identity(count, 0.0);
  auto trials = run_trials(opts.trials, opts.workers, [&](std::size_t i) {
    Rng rng(opts.seed, i);
    const Field v = random_bandlimited(plan.op().torus(), plan.op().fiber_dim(), rng, opts.band);
    const Field u = plan.op().apply_gamma(v);
    const TentField f = tent_of(grid, [&](double t) {
      const Field high = u - p_t_power(plain, t, n_tilde, u);
      // (I - P_t^N) u = t Gamma (sum_{k<N} P_t^k) Q_t u for u in R(Gamma)
      Field term = q_t(plain, t, u);
      Field sum = term;
      for (int k = 1; k < n_tilde; ++k) {
        term = p_t(plain, t, term);
        sum += term;
      }
      const Field rhs = cplx(t) * plan.op().apply_gamma(sum);
      identity[i] = std::max(identity[i], relative(high - rhs, u));
      return q_t_power(plan, t, M, high);
    });
    if (identity[i] > kHighFreqIdentityTol)
      throw ProbeError("high-frequency factorisation identity violated (error " +
                       std::to_string(identity[i]) + ")");
    return record(tent_norm(f, p), lp_norm(u, p));
  });
  HighFreqReport rep;
  rep.ratio = summarize("high_freq", std::move(trials));
  rep.identity_error = *std::max_element(identity.begin(), identity.end());
  return rep;
}

RatioReport conical_vertical(const ResolventPlan& plan, double p, int M, const TimeGrid& grid,
                             const TrialOptions& opts) {
  auto trials = run_trials(opts.trials, opts.workers, [&](std::size_t i) {
    Rng rng(opts.seed, i);
    const TentField g = random_tent_bumps(grid, plan.op().torus(), plan.op().fiber_dim(), rng);
    std::vector<Field> slices;
    for (std::size_t k = 0; k < grid.size(); ++k)
      slices.push_back(q_t_power(plan, grid.t(k), M, g.slice(k)));
    return record(tent_norm(TentField(grid, std::move(slices)), p), vertical_norm(g, p));
  });
  return summarize("conical_vertical", std::move(trials));
}

// --- elliptic experiments -----------------------------------------------------------------

RatioReport kato_experiment(const ResolventPlan& plan, double p, const TrialOptions& opts) {
  require_elliptic(plan);
  const int n = plan.op().torus().dim();
  SgnOptions so;
  so.null_policy = NullPolicy::project;
  auto trials = run_trials(opts.trials, opts.workers, [&](std::size_t i) {
    Rng rng(opts.seed, i);
    const Field f = random_bandlimited(plan.op().torus(), 1, rng, opts.band);
    const Field u = embed_scalar(f, 1 + n);
    const Field root = components(sqrt_pib2(plan, u, so), 0, 1);
    const Field grad = components(plan.op().apply_gamma(u), 1, n);
    return record(lp_norm(root, p), lp_norm(grad, p));
  });
  return summarize("kato", std::move(trials));
}

RieszReport riesz_experiment(const ResolventPlan& plan, double p, const TrialOptions& opts) {
  require_elliptic(plan);
  const int n = plan.op().torus().dim();
  SgnOptions so;
  so.null_policy = NullPolicy::project;
  const std::size_t count = static_cast<std::size_t>(std::max(opts.trials, 1));
  std::vector<double> involution(count, 0.0);
  auto trials = run_trials(opts.trials, opts.workers, [&](std::size_t i) {
    Rng rng(opts.seed, i);
    const Field f = random_bandlimited(plan.op().torus(), 1, rng, opts.band);
    const Field g = components(sqrt_pib2(plan, embed_scalar(f, 1 + n), so), 0, 1);
    const Field w = embed_scalar(g, 1 + n);
    const Field s = apply_sgn(plan, w, so);
    const Field riesz = components(s, 1, n);
    const Field twice = apply_sgn(plan, s, so);
    const Field w_range = w - null_projection(plan, w);
    involution[i] = relative(twice - w_range, w_range);
    return record(lp_norm(riesz, p), lp_norm(g, p));
  });
  RieszReport rep;
  rep.ratio = summarize("riesz", std::move(trials));
  rep.involution_error = *std::max_element(involution.begin(), involution.end());
  return rep;
}

RatioReport sgn_involution(const ResolventPlan& plan, const TrialOptions& opts) {
  SgnOptions so;
  so.null_policy = NullPolicy::project;
  auto trials = run_trials(opts.trials, opts.workers, [&](std::size_t i) {
    Rng rng(opts.seed, i);
    const Field u = sample_subspace(plan, Subspace::range_pi_b, rng, opts.band);
    const Field twice = apply_sgn(plan, apply_sgn(plan, u, so), so);
    return record(lp_norm(twice - u, 2.0), lp_norm(u, 2.0));
  });
  return summarize("sgn_involution", std::move(trials));
}

SobolevReport sobolev_resolvent_probe(const ResolventPlan& plan, double p,
                                      const std::vector<double>& ts, const TrialOptions& opts) {
  if (!(p > 1.0)) throw ProbeError("sobolev probe requires p > 1");
  if (ts.empty()) throw ProbeError("sobolev probe requires at least one t");
  SobolevReport rep;
  const int n = plan.op().torus().dim();
  rep.p = p;
  rep.p_star = n * p / (n + p);
  rep.meaningful = rep.p_star > 1.0;
  auto trials = run_trials(opts.trials, opts.workers, [&](std::size_t i) {
    Rng rng(opts.seed, i);
    const Field u = sample_subspace(plan, Subspace::range_gamma, rng, opts.band);
    double num = 0.0;
    for (double t : ts) num = std::max(num, t * lp_norm(plan.resolvent(t, u), p));
    const double den =
        rep.p_star >= 1.0 ? lp_norm(u, rep.p_star) : lp_quasinorm(u, rep.p_star);
    return record(num, den);
  });
  rep.ratio = summarize("sobolev", std::move(trials));
  return rep;
}

// --- identities, Hodge --------------------------------------------------------------------

double IdentityReport::max() const {
  return std::max({resolvent, p_product, t_pi_q, qq_product, high_freq, commutation});
}

IdentityReport algebraic_identities(const ResolventPlan& plan, double t, double s, const Field& u,
                                    int n_tilde) {
  if (!(s > 0.0) || !(t >= s)) throw ProbeError("identities need 0 < s <= t");
  IdentityReport rep;
  const PerturbedDirac& op = plan.op();
  const Field rt = plan.resolvent(t, u);
  rep.resolvent = relative(rt + cplx(0.0, t) * op.apply_pi_b(rt) - u, u);
  const Field pt = p_t(plan, t, u);
  rep.p_product = relative(pt - plan.resolvent(t, plan.resolvent(-t, u)), u);
  rep.t_pi_q = relative(cplx(t) * op.apply_pi_b(q_t(plan, t, u)) - (u - pt), u);

  const ResolventPlan& plain = plan.unperturbed();
  const Field qq = q_t(plain, t, q_t(plain, s, u));
  const Field ps = p_t(plain, s, u);
  rep.qq_product = relative(qq - cplx(s / t) * (ps - p_t(plain, t, ps)), u);
  rep.commutation = relative(qq - q_t(plain, s, q_t(plain, t, u)), u);

  const Field ug = plain.op().apply_gamma(u);
  if (lp_norm(ug, 2.0) > 0.0) {
    const Field high = ug - p_t_power(plain, t, n_tilde, ug);
    Field term = q_t(plain, t, ug);
    Field sum = term;
    for (int k = 1; k < n_tilde; ++k) {
      term = p_t(plain, t, term);
      sum += term;
    }
    rep.high_freq = relative(high - cplx(t) * plain.op().apply_gamma(sum), ug);
  }
  return rep;
}

HodgeCheck hodge_check(const ResolventPlan& plan, const Field& u) {
  const HodgeParts parts = hodge_projections(plan, u);
  HodgeCheck rep;
  rep.exact = parts.exact;
  rep.stabilization = parts.stabilization;
  const double nu = lp_norm(u, 2.0);
  if (nu == 0.0) return rep;
  rep.sum_error = lp_norm(parts.null + parts.range_gamma + parts.range_gamma_star_b - u, 2.0) / nu;
  const HodgeParts pn = hodge_projections(plan, parts.null);
  const HodgeParts pg = hodge_projections(plan, parts.range_gamma);
  const HodgeParts ps = hodge_projections(plan, parts.range_gamma_star_b);
  rep.idempotency_error =
      std::max({lp_norm(pn.null - parts.null, 2.0), lp_norm(pg.range_gamma - parts.range_gamma, 2.0),
                lp_norm(ps.range_gamma_star_b - parts.range_gamma_star_b, 2.0)}) /
      nu;
  rep.stabilization = std::max({rep.stabilization, pn.stabilization, pg.stabilization,
                                ps.stabilization});
  double symbol_norm = 0.0;
  for (std::size_t k = 0; k < plan.op().torus().num_points(); ++k) {
    Eigen::JacobiSVD<Matrix> svd(plan.op().gamma_hat_at(k));
    if (svd.singularValues().size()) symbol_norm = std::max(symbol_norm, svd.singularValues()(0));
  }
  if (symbol_norm > 0.0)
    rep.gamma_residual = lp_norm(plan.op().apply_gamma(parts.range_gamma), 2.0) / (symbol_norm * nu);
  return rep;
}

// --- Schur uniformity, factorisation, tent laws ----------------------------------------------

SchurReport schur_uniformity(const ResolventPlan& plan, const TimeGrid& grid, int n_tilde,
                             double eps, const std::vector<double>& gammas, std::uint64_t seed) {
  if (gammas.empty()) throw ProbeError("schur uniformity needs at least one gamma");
  const SeparableKernel k = high_frequency_kernel(plan, grid, n_tilde);
  SchurReport rep;
  rep.gammas = gammas;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double g : gammas) {
    const NormEstimate e = schur_norm_estimate(k, SchurVariant::plus, cplx(eps, g), grid,
                                               plan.op().torus(), plan.op().fiber_dim(), seed);
    rep.norms.push_back(e);
    lo = std::min(lo, e.estimate);
    hi = std::max(hi, e.estimate);
  }
  rep.max_over_min = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  return rep;
}

FactorizationReport factorization_experiment(const Torus& torus, const TimeGrid& grid, double p,
                                             double q, int pairs, std::uint64_t seed,
                                             int workers) {
  if (pairs < 1) throw ProbeError("factorization needs at least one pair");
  FactorizationReport rep;
  rep.p = p;
  rep.q = q;
  rep.pairs.resize(static_cast<std::size_t>(pairs));
  parallel_for(rep.pairs.size(), workers, [&](std::size_t i) {
    Rng rng(seed, i);
    const TentField f = random_tent_bumps(grid, torus, 1, rng);
    const TentField g = random_tent_bumps(grid, torus, 1, rng);
    rep.pairs[i] = factorization_check(f, g, p, q);
  });
  for (const auto& r : rep.pairs) rep.max_ratio = std::max(rep.max_ratio, r.ratio);
  return rep;
}

TentLawReport tent_laws(const Torus& torus, const TimeGrid& grid, int fields,
                        const std::vector<double>& ps, const std::vector<double>& alphas,
                        std::uint64_t seed, int workers) {
  if (fields < 1) throw ProbeError("tent laws need at least one field");
  struct Local {
    std::size_t violations = 0;
    double excess = -std::numeric_limits<double>::infinity();
    double fubini = 0.0;
  };
  std::vector<Local> local(static_cast<std::size_t>(fields));
  const int n = torus.dim();
  const double cn = unit_ball_volume(n);
  std::vector<double> sorted = alphas;
  std::sort(sorted.begin(), sorted.end());
  parallel_for(local.size(), workers, [&](std::size_t i) {
    Rng rng(seed, i);
    TentField f = random_tent_bumps(grid, torus, 2, rng);
    if (i % 2) {  // alternate smooth bumps with white noise
      for (std::size_t k = 0; k < f.size(); ++k)
        for (cplx& z : f.slice(k).values()) z = rng.complex_normal();
    }
    Local& out = local[i];
    for (double p : ps) {
      double prev = tent_norm(f, p, 1.0);
      const double base = prev;
      for (double a : sorted) {
        const double v = tent_norm(f, p, a);
        if (v < prev) ++out.violations;
        prev = v;
        if (a > 1.0 && base > 0.0)
          out.excess = std::max(out.excess, std::log(v / base) / std::log(a) -
                                                (n / std::min(p, 2.0) + 0.2));
      }
    }
    const double t2 = tent_norm(f, 2.0, 1.0);
    double sum = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
      const double nk = lp_norm(f.slice(k), 2.0);
      sum += grid.weight(k) * nk * nk;
    }
    const double value = t2 * t2;
    out.fubini = value > 0.0 ? std::abs(value - cn * sum) / value : std::abs(cn * sum);
  });
  TentLawReport rep;
  rep.fields = local.size();
  for (const Local& l : local) {
    rep.monotonicity_violations += l.violations;
    rep.max_growth_exponent_excess = std::max(rep.max_growth_exponent_excess, l.excess);
    rep.max_fubini_error = std::max(rep.max_fubini_error, l.fubini);
  }
  return rep;
}

double principal_part_carleson(const PrincipalPart& gamma) {
  if (gamma.gamma.empty()) return 0.0;
  double best = 0.0;
  for (int k = 0; k < gamma.gamma.front().rows(); ++k)
    best = std::max(best, carleson_norm(gamma.column(k)));
  return best;
}

// --- dense oracle ---------------------------------------------------------------------------

namespace {

/// Schur-Parlett recurrence for f(T), T upper triangular with distinct diagonal.
Matrix parlett(const Matrix& T, const std::vector<cplx>& fdiag, double scale) {
  const Eigen::Index n = T.rows();
  Matrix F = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) F(i, i) = fdiag[static_cast<std::size_t>(i)];
  for (Eigen::Index d = 1; d < n; ++d) {
    for (Eigen::Index i = 0; i + d < n; ++i) {
      const Eigen::Index j = i + d;
      const cplx gap = T(j, j) - T(i, i);
      if (std::abs(gap) < 1e-8 * scale)
        throw ProbeError("ill-conditioned eigenbasis and Schur fallback failed "
                         "(repeated eigenvalues)");
      cplx s = T(i, j) * (F(j, j) - F(i, i));
      for (Eigen::Index k = i + 1; k < j; ++k) s += F(i, k) * T(k, j) - T(i, k) * F(k, j);
      F(i, j) = s / gap;
    }
  }
  return F;
}

}  // namespace

Field dense_oracle(const PerturbedDirac& op, const std::function<cplx(cplx)>& f, const Field& u,
                   DenseOracleInfo* info) {
  if (op.total_dim() > 4096) throw ProbeError("dense oracle is limited to m^n N <= 4096");
  if (u.fiber_dim() != op.fiber_dim() || u.torus() != op.torus())
    throw ProbeError("input field does not match the operator");
  const Matrix A = op.dense_matrix();
  const Eigen::Index dim = A.rows();
  const Eigen::Map<const Vector> x(u.values().data(), dim);

  Eigen::ComplexEigenSolver<Matrix> es(A);
  if (es.info() != Eigen::Success) throw ProbeError("dense eigendecomposition failed");
  const Vector lam = es.eigenvalues();
  Matrix V = es.eigenvectors();
  const double scale = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
  std::vector<Eigen::Index> null_idx;
  for (Eigen::Index i = 0; i < dim; ++i)
    if (std::abs(lam(i)) <= 1e-6 * scale) null_idx.push_back(i);

  // eigenvectors of the (semisimple) null cluster are replaced by an SVD null basis
  if (!null_idx.empty()) {
    Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeFullV);
    const Matrix& W = svd.matrixV();
    for (std::size_t k = 0; k < null_idx.size(); ++k)
      V.col(null_idx[k]) = W.col(dim - 1 - static_cast<Eigen::Index>(k));
  }
  std::vector<cplx> fl(static_cast<std::size_t>(dim));
  for (Eigen::Index i = 0; i < dim; ++i) fl[static_cast<std::size_t>(i)] = f(lam(i));
  for (Eigen::Index i : null_idx) fl[static_cast<std::size_t>(i)] = f(cplx(0.0));

  Eigen::BDCSVD<Matrix> vs(V);
  const auto& sv = vs.singularValues();
  const double cond = sv(dim - 1) > 0.0 ? sv(0) / sv(dim - 1) : std::numeric_limits<double>::infinity();

  Vector y;
  DenseOracleInfo local;
  local.condition = cond;
  local.null_dim = null_idx.size();
  if (cond <= 1e8) {
    Vector c = V.partialPivLu().solve(x);
    for (Eigen::Index i = 0; i < dim; ++i) c(i) *= fl[static_cast<std::size_t>(i)];
    y = V * c;
    local.method = "eigen";
  } else {
    Eigen::ComplexSchur<Matrix> schur(A);
    const Matrix& T = schur.matrixT();
    const Matrix& U = schur.matrixU();
    std::vector<cplx> fd(static_cast<std::size_t>(dim));
    for (Eigen::Index i = 0; i < dim; ++i)
      fd[static_cast<std::size_t>(i)] = std::abs(T(i, i)) <= 1e-6 * scale ? f(cplx(0.0)) : f(T(i, i));
    const Matrix F = parlett(T, fd, scale);
    y = U * (F * (U.adjoint() * x));
    local.method = "schur";
  }
  if (info) *info = local;
  Field out = u.zeros_like();
  for (Eigen::Index i = 0; i < dim; ++i) out.values()[static_cast<std::size_t>(i)] = y(i);
  return out;
}

}  // namespace hodgelab
