#include "hodgelab/funcalc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace hodgelab {

namespace {

constexpr cplx kI(0.0, 1.0);

// Quadrature nodes live on the global grid r = 2^{q / kFineRes}; coarser
// levels use every (kFineRes / L)-th point, so refinements reuse solves.
constexpr long kFineRes = 1L << 12;

std::vector<double> parse_args(const std::string& id, std::string& name) {
  const auto open = id.find('(');
  std::vector<double> args;
  if (open == std::string::npos) {
    name = id;
    return args;
  }
  if (id.back() != ')') throw FuncalcError("malformed function id '" + id + "'");
  name = id.substr(0, open);
  std::stringstream ss(id.substr(open + 1, id.size() - open - 2));
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      args.push_back(std::stod(item, &used));
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw FuncalcError("bad argument '" + item + "' in '" + id + "'");
    }
  }
  return args;
}

int as_int(double v, const std::string& id) {
  if (v != std::floor(v) || v < 0 || v > 64)
    throw FuncalcError("integer argument expected in '" + id + "'");
  return static_cast<int>(v);
}

void expect_args(const std::vector<double>& a, std::size_t n, const std::string& id) {
  if (a.size() != n)
    throw FuncalcError("'" + id + "' expects " + std::to_string(n) + " argument(s)");
}

// z / (1 + z^2)
cplx qsym(cplx z) { return z / (1.0 + z * z); }

}  // namespace

PsiFunction make_psi(const std::string& id) {
  std::string name;
  const auto a = parse_args(id, name);
  PsiFunction f;
  f.id = id;
  if (name == "zero") {
    expect_args(a, 0, id);
    f.formula = "0";
    f.eval = [](cplx) { return cplx(0.0); };
    f.alpha = f.beta = 1.0;
    f.nondegenerate = false;
  } else if (name == "rational") {
    expect_args(a, 2, id);
    const int p = as_int(a[0], id), q = as_int(a[1], id);
    if (p < 1 || q < 1 || (p + q) % 2 != 0)
      throw FuncalcError("rational(a,b) needs a, b >= 1 with a + b even");
    const int k = (p + q) / 2;
    f.formula = (p == 1 ? std::string("z") : "z^" + std::to_string(p)) + "/(1+z^2)" +
                (k == 1 ? std::string() : "^" + std::to_string(k));
    f.eval = [p, k](cplx z) { return std::pow(z, p) / std::pow(1.0 + z * z, k); };
    f.alpha = p;
    f.beta = q;
  } else if (name == "resolvent") {
    expect_args(a, 1, id);
    const double t = a[0];
    if (!(t > 0)) throw FuncalcError("resolvent(t) needs t > 0");
    f.formula = "i t z / (1 + i t z)^2  (= R_t - R_t^2)";
    f.eval = [t](cplx z) {
      const cplx w = 1.0 + kI * t * z;
      return kI * t * z / (w * w);
    };
    f.alpha = f.beta = 1.0;
  } else if (name == "qpower") {
    expect_args(a, 1, id);
    const int m = as_int(a[0], id);
    if (m < 1) throw FuncalcError("qpower(M) needs M >= 1");
    f.formula = "(z/(1+z^2))^" + std::to_string(m);
    f.eval = [m](cplx z) { return std::pow(qsym(z), m); };
    f.alpha = f.beta = m;
  } else if (name == "lowfreq") {
    expect_args(a, 2, id);
    const int m = as_int(a[0], id), nt = as_int(a[1], id);
    if (m < 1) throw FuncalcError("lowfreq(M,N) needs M >= 1");
    f.formula = "(z/(1+z^2))^" + std::to_string(m) + " (1+z^2)^-" + std::to_string(nt);
    f.eval = [m, nt](cplx z) { return std::pow(qsym(z), m) * std::pow(1.0 + z * z, -nt); };
    f.alpha = m;
    f.beta = m + 2 * nt;
  } else if (name == "highfreq") {
    expect_args(a, 2, id);
    const int m = as_int(a[0], id), nt = as_int(a[1], id);
    if (m < 1 || nt < 1) throw FuncalcError("highfreq(M,N) needs M, N >= 1");
    f.formula = "(z/(1+z^2))^" + std::to_string(m) + " (1 - (1+z^2)^-" + std::to_string(nt) + ")";
    f.eval = [m, nt](cplx z) {
      return std::pow(qsym(z), m) * (1.0 - std::pow(1.0 + z * z, -nt));
    };
    f.alpha = m + 2;
    f.beta = m;
  } else if (name == "one") {
    expect_args(a, 0, id);
    f.formula = "1";
    f.eval = [](cplx) { return cplx(1.0); };
  } else if (name == "phase") {
    expect_args(a, 1, id);
    const double tau = a[0];
    f.formula = "exp(i tau z / sqrt(1+z^2))";
    f.eval = [tau](cplx z) { return std::exp(kI * tau * z / std::sqrt(1.0 + z * z)); };
  } else if (name == "sgn") {
    expect_args(a, 0, id);
    f.formula = "sgn(Re z)";
    f.eval = [](cplx z) { return cplx(z.real() > 0 ? 1.0 : (z.real() < 0 ? -1.0 : 0.0)); };
  } else {
    throw FuncalcError("unknown function '" + id + "'");
  }
  return f;
}

PsiFunction product(const PsiFunction& a, const PsiFunction& b) {
  PsiFunction f;
  f.id = a.id + "*" + b.id;
  f.formula = "(" + a.formula + ") (" + b.formula + ")";
  f.eval = [fa = a.eval, fb = b.eval](cplx z) { return fa(z) * fb(z); };
  f.alpha = a.alpha + b.alpha;
  f.beta = a.beta + b.beta;
  f.mu = std::min(a.mu, b.mu);
  f.nondegenerate = a.nondegenerate && b.nondegenerate;
  return f;
}

std::vector<PsiDictionaryEntry> psi_dictionary() {
  return {
      {"zero", "0", "trivial", "zero function"},
      {"rational(a,b)", "z^a / (1+z^2)^{(a+b)/2}, a+b even", "Psi_a^b",
       "rational functions of the Psi-classes, Sec. 2.1"},
      {"resolvent(t)", "i t z / (1+i t z)^2 = R_t - R_t^2", "Psi_1^1",
       "closed-form resolvent cross-check"},
      {"qpower(M)", "(z/(1+z^2))^M, symbol of (Q_t)^M at t = 1", "Psi_M^M",
       "square-function generator, Sec. 3"},
      {"lowfreq(M,N)", "(z/(1+z^2))^M (1+z^2)^-N", "Psi_M^{M+2N}",
       "low-frequency part Q^M P^N"},
      {"highfreq(M,N)", "(z/(1+z^2))^M (1 - (1+z^2)^-N)", "Psi_{M+2}^M",
       "high-frequency part Q^M (I - P^N)"},
      {"one", "1", "H-infinity", "identity on the range"},
      {"phase(tau)", "exp(i tau z / sqrt(1+z^2))", "H-infinity", "phase twist"},
      {"sgn", "sgn(Re z)", "H-infinity", "sgn(Pi_B) = (Pi_B^2)^{-1/2} Pi_B"},
  };
}

std::string describe_psi(const std::string& id) {
  const PsiFunction f = make_psi(id);
  std::ostringstream os;
  os << id << ": psi(z) = " << f.formula << "\n";
  if (f.decaying())
    os << "  class Psi_" << f.alpha << "^" << f.beta << " (|psi(z)| <= C|z|^" << f.alpha
       << " / (1+|z|^" << f.alpha + f.beta << "))\n";
  else
    os << "  bounded holomorphic (H-infinity); applied as the limit of regularised psi_n\n";
  os << "  holomorphic on S_mu for mu < pi/2\n";
  return os.str();
}

double audit_decay_class(const PsiFunction& psi, double theta) {
  if (!(theta < psi.mu)) throw FuncalcError("contour angle must be below the function's mu");
  if (!psi.decaying()) return sector_sup(psi, theta);
  auto ratio = [&](double r) {
    double worst = 0.0;
    for (double phi : {theta, -theta, M_PI - theta, M_PI + theta}) {
      const cplx z = std::polar(r, phi);
      worst = std::max(worst, std::abs(psi(z)) * (1.0 + std::pow(r, psi.alpha + psi.beta)) /
                                  std::pow(r, psi.alpha));
    }
    return worst;
  };
  double c = 0.0;
  for (int k = -60; k <= 60; ++k) c = std::max(c, ratio(std::pow(10.0, k / 10.0)));
  const double lo_growth = ratio(1e-6) / std::max(ratio(1e-5), 1e-300);
  const double hi_growth = ratio(1e6) / std::max(ratio(1e5), 1e-300);
  if (psi.nondegenerate && (lo_growth > 1.5 || hi_growth > 1.5))
    throw FuncalcError("function '" + psi.id + "' violates its declared decay class");
  return c;
}

double sector_sup(const PsiFunction& f, double theta, double scale) {
  double s = 0.0;
  for (int k = -240; k <= 240; ++k) {
    const double r = scale * std::pow(10.0, k / 40.0);
    for (double phi : {theta, -theta, M_PI - theta, M_PI + theta})
      s = std::max(s, std::abs(f(std::polar(r, phi))));
  }
  return s;
}

// --- contour ------------------------------------------------------------------------

namespace {

struct Ray {
  double phi;
  double sign;
};

std::array<Ray, 4> rays(double theta) {
  // counter-clockwise around each half of the double sector
  return {Ray{theta, -1.0}, Ray{-theta, 1.0}, Ray{M_PI - theta, 1.0}, Ray{M_PI + theta, -1.0}};
}

long q_floor(double r, long res) { return static_cast<long>(std::floor(std::log2(r) * res)); }
long q_ceil(double r, long res) { return static_cast<long>(std::ceil(std::log2(r) * res)); }

// Trapezoid node set in fine units: q = qlo .. qhi step `stride`, half weight at the ends.
struct NodeRange {
  long qlo, qhi, stride;
};

NodeRange node_range(double r_min, double r_max, int steps_per_octave) {
  if (!(r_min > 0 && r_max > r_min)) throw FuncalcError("invalid contour window");
  if (steps_per_octave < 1 || kFineRes % steps_per_octave != 0)
    throw FuncalcError("steps per octave must divide " + std::to_string(kFineRes));
  const long stride = kFineRes / steps_per_octave;
  long lo = q_floor(r_min, steps_per_octave) * stride;
  long hi = q_ceil(r_max, steps_per_octave) * stride;
  if (hi - lo < 8 * stride) hi = lo + 8 * stride;
  return {lo, hi, stride};
}

double node_radius(long q) { return std::exp2(static_cast<double>(q) / kFineRes); }

// Cache of (I + tau Pi_B)^{-1} u keyed by (ray, fine node index).
class SolveCache {
 public:
  SolveCache(const ResolventPlan& plan, const Field& u) : plan_(plan), u_(u) {}
  const Field& get(int ray, long q, cplx z) {
    const auto key = std::make_pair(ray, q);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      it = cache_.emplace(key, plan_.solve(-1.0 / z, u_)).first;
      ++solves_;
    }
    return it->second;
  }
  long solves() const { return solves_; }

 private:
  const ResolventPlan& plan_;
  const Field& u_;
  std::map<std::pair<int, long>, Field> cache_;
  long solves_ = 0;
};

Field contour_sum(SolveCache& cache, const PsiFunction& psi, const Contour& c, const Field& u) {
  const NodeRange nr = node_range(c.r_min, c.r_max, c.steps_per_octave);
  const double ds = M_LN2 / c.steps_per_octave;
  const auto rs = rays(c.theta);
  Field acc = u.zeros_like();
  for (int k = 0; k < 4; ++k) {
    for (long q = nr.qlo; q <= nr.qhi; q += nr.stride) {
      const cplx z = std::polar(node_radius(q), rs[k].phi);
      const cplx fz = psi(z);
      if (fz == cplx(0.0)) continue;
      const double end = (q == nr.qlo || q == nr.qhi) ? 0.5 : 1.0;
      const cplx w = rs[k].sign * end * ds / (2.0 * M_PI * kI) * fz;
      acc += w * cache.get(k, q, z);
    }
  }
  return acc;
}

double relative_change(const Field& a, const Field& b) {
  const double nb = coefficient_norm(b);
  const double d = coefficient_norm(a - b);
  return nb > 0 ? d / nb : d;
}

}  // namespace

int Contour::nodes_per_ray() const {
  const NodeRange nr = node_range(r_min, r_max, steps_per_octave);
  return static_cast<int>((nr.qhi - nr.qlo) / nr.stride + 1);
}

void Contour::nodes(std::vector<cplx>& z, std::vector<cplx>& w) const {
  z.clear();
  w.clear();
  const NodeRange nr = node_range(r_min, r_max, steps_per_octave);
  const double ds = M_LN2 / steps_per_octave;
  for (const Ray& ray : rays(theta)) {
    for (long q = nr.qlo; q <= nr.qhi; q += nr.stride) {
      const double end = (q == nr.qlo || q == nr.qhi) ? 0.5 : 1.0;
      z.push_back(std::polar(node_radius(q), ray.phi));
      w.push_back(ray.sign * end * ds / (2.0 * M_PI * kI));
    }
  }
}

SpectralWindow spectral_window(const ResolventPlan& plan) {
  const PerturbedDirac& op = plan.op();
  const Torus& t = op.torus();
  double pi_max = 0.0;
  for (std::size_t k = 0; k < t.num_points(); ++k) {
    const Matrix& g = op.gamma_hat_at(k);
    Eigen::JacobiSVD<Matrix> svd(g + g.adjoint());
    pi_max = std::max(pi_max, svd.singularValues()(0));
  }
  const CoercivityReport coer = coercivity_audit(op.symbol(), t);
  const double kappa = coer.vacuous ? 1.0 : coer.kappa;
  double b_lo = 1.0, b_hi = 1.0;
  for (const auto* b : {&op.b1(), &op.b2()}) {
    if (!*b) continue;
    b_lo = std::min(b_lo, std::max(0.05, pointwise_accretivity(**b)));
    b_hi *= std::max(1.0, (*b)->sup_norm());
  }
  const double lower = 2.0 * M_PI / t.period() * kappa * b_lo;
  const double upper = std::max(pi_max * b_hi, lower * 2.0);
  return {lower, upper};
}

double operator_angle(const ResolventPlan& plan, const FuncalcOptions& opts) {
  if (!std::isnan(opts.omega)) return opts.omega;
  if (plan.op().is_unperturbed()) return 0.0;
  return accretivity_audit(plan.op(), opts.audit_trials, opts.audit_seed).omega;
}

Contour default_contour(const ResolventPlan& plan, const FuncalcOptions& opts) {
  const double omega = operator_angle(plan, opts);
  Contour c;
  c.theta = std::isnan(opts.theta) ? 0.5 * (omega + M_PI / 2) : opts.theta;
  if (!(c.theta > omega && c.theta < M_PI / 2))
    throw FuncalcError("contour angle must lie in (omega, pi/2)");
  const SpectralWindow sw = spectral_window(plan);
  c.r_min = sw.lower / opts.padding;
  c.r_max = sw.upper * opts.padding;
  c.steps_per_octave = opts.steps_per_octave;
  return c;
}

namespace {

Field apply_psi_cached(SolveCache& cache, const PsiFunction& psi, const Contour& start,
                       const Field& u, const FuncalcOptions& opts, QuadratureReport* report) {
  if (!(start.theta < psi.mu)) throw FuncalcError("contour angle exceeds the function's sector");
  if (!psi.decaying())
    throw FuncalcError("'" + psi.id + "' is not in a Psi-class; use apply_function");
  Contour c = start;
  Field prev = contour_sum(cache, psi, c, u);
  double change = 0.0;
  if (opts.max_refinements == 0) {  // single evaluation, no convergence check
    if (report) *report = {0, 0.0, cache.solves(), c};
    return prev;
  }
  for (int level = 1; level <= opts.max_refinements; ++level) {
    c.steps_per_octave *= 2;
    c.r_min /= 2.0;
    c.r_max *= 2.0;
    Field next = contour_sum(cache, psi, c, u);
    change = relative_change(prev, next);
    // an identically vanishing result has converged trivially
    if (change <= opts.tol || coefficient_norm(next) == 0.0) {
      if (report) *report = {level, change, cache.solves(), c};
      return next;
    }
    prev = std::move(next);
  }
  std::ostringstream msg;
  msg << "contour quadrature not converged (relative change " << change << " after "
      << opts.max_refinements << " refinements)";
  throw FuncalcError(msg.str());
}

}  // namespace

Field apply_psi(const ResolventPlan& plan, const PsiFunction& psi, const Contour& contour,
                const Field& u, const FuncalcOptions& opts, QuadratureReport* report) {
  SolveCache cache(plan, u);
  return apply_psi_cached(cache, psi, contour, u, opts, report);
}

Field apply_psi(const ResolventPlan& plan, const PsiFunction& psi, const Field& u,
                const FuncalcOptions& opts, QuadratureReport* report) {
  return apply_psi(plan, psi, default_contour(plan, opts), u, opts, report);
}

Field apply_function(const ResolventPlan& plan, const PsiFunction& f, const Field& u,
                     const FuncalcOptions& opts) {
  if (f.decaying()) return apply_psi(plan, f, u, opts);
  if (f.id == "sgn") {
    SgnOptions so;
    so.null_policy = NullPolicy::project;
    return apply_sgn(plan, u, so);
  }
  const Contour base = default_contour(plan, opts);
  const SpectralWindow sw = spectral_window(plan);
  const double centre = std::sqrt(sw.lower * sw.upper);
  SolveCache cache(plan, u);
  std::vector<Field> extrapolated;
  Field prev_raw = u.zeros_like();
  double last_change = 0.0;
  for (int k = 1; k <= 6; ++k) {
    const double n = std::pow(4.0, k);
    PsiFunction psi;
    psi.id = f.id + "-reg" + std::to_string(static_cast<int>(n));
    psi.formula = f.formula;
    psi.alpha = psi.beta = 2.0;
    psi.mu = f.mu;
    psi.eval = [&f, n, centre](cplx z) {
      const cplx x = z / centre;
      const cplx x2 = x * x;
      return f(z) * (n * n * x2) / ((1.0 + n * n * x2) * (1.0 + x2 / (n * n)));
    };
    Contour c = base;
    c.r_min = std::min(base.r_min, centre / (10.0 * n));
    c.r_max = std::max(base.r_max, centre * n * 10.0);
    Field raw = apply_psi_cached(cache, psi, c, u, opts, nullptr);
    if (k >= 2) {
      Field e = raw;
      e *= 16.0;
      e -= prev_raw;
      e *= 1.0 / 15.0;
      extrapolated.push_back(std::move(e));
      if (extrapolated.size() >= 2) {
        last_change = relative_change(extrapolated[extrapolated.size() - 2], extrapolated.back());
        if (last_change <= 1e-4 || coefficient_norm(extrapolated.back()) == 0.0)
          return extrapolated.back();
      }
    }
    prev_raw = std::move(raw);
  }
  std::ostringstream msg;
  msg << "regularised limit for '" << f.id << "' not converged (change " << last_change << ")";
  throw FuncalcError(msg.str());
}

// --- sgn ------------------------------------------------------------------------------

Field apply_sgn(const ResolventPlan& plan, const Field& u, const SgnOptions& opts,
                SgnReport* report) {
  SgnReport rep;
  Field v = u;
  const double nu = lp_norm(u, 2.0);
  if (nu == 0.0) {
    if (report) *report = rep;
    return u.zeros_like();
  }
  {
    const Field un = null_projection(plan, u);
    rep.null_fraction = lp_norm(un, 2.0) / nu;
    if (rep.null_fraction > opts.null_tol) {
      if (opts.null_policy == NullPolicy::reject)
        throw FuncalcError("sgn undefined on null space input (the project policy uses sgn(0) = 0); "
                           "null fraction " + std::to_string(rep.null_fraction));
      v -= un;
    }
  }
  const SpectralWindow sw = spectral_window(plan);
  const double t_min = opts.t_min > 0 ? opts.t_min : 1e-3 / sw.upper;
  const double t_max = opts.t_max > 0 ? opts.t_max : 1e3 / sw.lower;
  std::map<long, Field> q_cache;
  long solves = 0;
  auto q_at = [&](long q) -> const Field& {
    auto it = q_cache.find(q);
    if (it == q_cache.end()) {
      it = q_cache.emplace(q, q_t(plan, node_radius(q), v)).first;
      solves += 2;
    }
    return it->second;
  };
  auto integral = [&](double lo, double hi, int steps) {
    const NodeRange nr = node_range(lo, hi, steps);
    const double ds = M_LN2 / steps;
    Field acc = v.zeros_like();
    for (long q = nr.qlo; q <= nr.qhi; q += nr.stride) {
      const bool end = (q == nr.qlo || q == nr.qhi);
      // interior trapezoid weight; endpoint: half weight plus the tail correction
      const double w = end ? 0.5 * ds + 1.0 : ds;
      acc += cplx(w) * q_at(q);
    }
    return acc *= (2.0 / M_PI);
  };
  double lo = t_min, hi = t_max;
  int steps = opts.steps_per_octave;
  Field prev = integral(lo, hi, steps);
  if (opts.max_refinements == 0) {
    rep.solves = solves;
    if (report) *report = rep;
    return prev;
  }
  for (int level = 1; level <= opts.max_refinements; ++level) {
    lo /= 2.0;
    hi *= 2.0;
    steps *= 2;
    Field next = integral(lo, hi, steps);
    rep.change = relative_change(prev, next);
    if (rep.change <= opts.tol) {
      rep.refinements = level;
      rep.solves = solves;
      if (report) *report = rep;
      return next;
    }
    prev = std::move(next);
  }
  std::ostringstream msg;
  msg << "sgn quadrature not converged (relative change " << rep.change << ")";
  throw FuncalcError(msg.str());
}

Field sqrt_pib2(const ResolventPlan& plan, const Field& u, const SgnOptions& opts) {
  return apply_sgn(plan, plan.op().apply_pi_b(u), opts);
}

// --- calculus bound ----------------------------------------------------------------

CalculusBound calculus_bound_estimate(const ResolventPlan& plan, double p,
                                      const std::vector<std::string>& family, int trials,
                                      std::uint64_t seed, const FuncalcOptions& opts) {
  if (family.empty()) throw FuncalcError("empty function family");
  const Contour c = default_contour(plan, opts);
  const SpectralWindow sw = spectral_window(plan);
  const double centre = std::sqrt(sw.lower * sw.upper);
  std::vector<PsiFunction> fs;
  std::vector<double> norms;
  for (const auto& id : family) {
    fs.push_back(make_psi(id));
    const double s = sector_sup(fs.back(), c.theta, centre);
    norms.push_back(s > 0 ? s : 1.0);
  }
  CalculusBound out;
  Rng root(seed, 0xca1c);
  for (int k = 0; k < trials; ++k) {
    Rng rng = root.split(static_cast<std::uint64_t>(k));
    const std::size_t which = static_cast<std::size_t>(k) % fs.size();
    const Field u = random_bandlimited(plan.op().torus(), plan.op().fiber_dim(), rng);
    Field fu = apply_function(plan, fs[which], u, opts);
    fu *= 1.0 / norms[which];
    const double r = lp_norm(fu, p) / lp_norm(u, p);
    out.ratios.push_back(r);
    if (r > out.estimate) {
      out.estimate = r;
      out.argmax_function = fs[which].id;
      out.argmax_trial = k;
    }
  }
  return out;
}

}  // namespace hodgelab
