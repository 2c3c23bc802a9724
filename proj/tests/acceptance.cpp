// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [criterion numbers...]   (default: all of 1..11)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>
#include <sys/wait.h>
#include <unistd.h>

#include "hodgelab/probes.hpp"

using namespace hodgelab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

double rel(const Field& a, const Field& b) {
  const double nb = coefficient_norm(b);
  return nb > 0 ? coefficient_norm(a - b) / nb : coefficient_norm(a);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

OperatorSpec dirac(int m, double amplitude, std::uint64_t seed, Roughness r = Roughness::rough) {
  OperatorSpec s;
  s.builtin = "dirac1d";
  s.m = m;
  s.amplitude = amplitude;
  s.roughness = r;
  s.seed = seed;
  return s;
}

OperatorSpec elliptic2(int m, double amplitude, double a_amplitude, std::uint64_t seed) {
  OperatorSpec s;
  s.builtin = "elliptic-2";
  s.m = m;
  s.amplitude = amplitude;
  s.a_amplitude = a_amplitude;
  s.roughness = Roughness::rough;
  s.seed = seed;
  return s;
}

TrialOptions trials(int count, std::uint64_t seed) {
  TrialOptions o;
  o.trials = count;
  o.seed = seed;
  return o;
}

cplx sgn_scalar(cplx z) { return z.real() > 0 ? 1.0 : z.real() < 0 ? -1.0 : 0.0; }

// 1. Algebraic identities at m = 64, dense and iterative, within 30 s.
Outcome identities() {
  const auto t0 = std::chrono::steady_clock::now();
  auto op = build_operator(dirac(64, 0.5, 101));
  double worst = 0;
  for (SolverMode mode : {SolverMode::dense, SolverMode::iterative}) {
    SolverOptions o;
    o.mode = mode;
    const ResolventPlan plan(op, o);
    for (int i = 0; i < 3; ++i) {
      Rng rng(102, i);
      const Field u = random_bandlimited(op->torus(), 2, rng);
      for (auto [t, s] : {std::pair{0.02, 0.01}, {0.1, 0.03}, {0.5, 0.1}})
        worst = std::max(worst, algebraic_identities(plan, t, s, u, 2).max());
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-8 && secs < 30,
          "max relative error " + fmt(worst) + " (<= 1e-8), " + fmt(secs) + " s (< 30 s)"};
}

// 2. apply_psi / apply_sgn against the dense oracle on 20 (operator, input) pairs.
Outcome oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::string> psis{"rational(1,1)", "rational(2,2)", "qpower(2)", "lowfreq(1,2)"};
  SgnOptions so;
  so.null_policy = NullPolicy::project;
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    const bool two_d = i % 2;
    const double amp = 0.2 + 0.04 * (i / 2);
    auto op = build_operator(two_d ? elliptic2(8, amp, amp / 2, 200 + i) : dirac(16, amp, 200 + i));
    const ResolventPlan plan(op);
    Rng rng(201, i);
    const Field u = random_bandlimited(op->torus(), op->fiber_dim(), rng);
    const PsiFunction psi = make_psi(psis[i % psis.size()]);
    worst = std::max(worst, rel(apply_psi(plan, psi, u), dense_oracle(*op, psi.eval, u)));
    const Field v = u - null_projection(plan, u);
    worst = std::max(worst, rel(apply_sgn(plan, v, so), dense_oracle(*op, sgn_scalar, v)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-5 && secs < 120,
          "max relative error " + fmt(worst) + " (<= 1e-5), " + fmt(secs) + " s (< 120 s)"};
}

// 3. Quadratic estimate at p = 2, M = 2 over 50 perturbed operators, m = 64 -> 128.
Outcome quadratic_estimate() {
  const TimeGrid grid = TimeGrid::standard(Torus(1, 64));
  double worst_spread = 0, worst_drift = 0, min_kappa = 1e300, max_b = 0;
  bool finite = true;
  for (int i = 0; i < 50; ++i) {
    const double amp = 0.1 + 0.5 * (i % 10) / 9.0;  // ||B - I|| <= 0.6, so ||B|| <= 1.6
    const std::uint64_t seed = 300 + i;
    auto coarse_op = build_operator(dirac(64, amp, seed, Roughness::smooth));
    auto fine_op = build_operator(dirac(128, amp, seed, Roughness::smooth));
    const AccretivityReport a = audit_operator(*coarse_op, 16, seed);
    min_kappa = std::min({min_kappa, a.kappa1, a.kappa2});
    max_b = std::max({max_b, coarse_op->b1()->sup_norm(), coarse_op->b2()->sup_norm()});
    const ResolventPlan coarse(coarse_op), fine(fine_op);
    const RatioReport rc = sq_equiv(coarse, 2.0, 2, Subspace::range_gamma, grid, trials(4, seed));
    RatioReport rf = sq_equiv(fine, 2.0, 2, Subspace::range_gamma, grid, trials(4, seed));
    finite = finite && std::isfinite(rc.spread) && std::isfinite(rf.spread) && rc.c > 0;
    worst_spread = std::max({worst_spread, rc.spread, rf.spread});
    worst_drift = std::max(worst_drift, compare_refinement(rc, rf, 0.10));
  }
  const bool ok = finite && min_kappa >= 0.3 && max_b <= 2 && worst_spread <= 100 && worst_drift <= 0.10;
  return {ok, "min kappa " + fmt(min_kappa) + ", max ||B|| " + fmt(max_b) + ", max C/c " +
                  fmt(worst_spread) + " (<= 100), max drift " + fmt(worst_drift) + " (<= 0.10)"};
}

// 4. Kato: identity case over 50 f, and rough coefficients (amplitude 0.4).
Outcome kato() {
  const ResolventPlan id(build_operator(elliptic2(16, 0, 0, 0)));
  const RatioReport r = kato_experiment(id, 2.0, trials(50, 400));
  const double err = std::max(std::abs(r.c - 1), std::abs(r.C - 1));
  const ResolventPlan rough(build_operator(elliptic2(16, 0.4, 0.4, 401)));
  const RatioReport k = kato_experiment(rough, 2.0, trials(20, 402));
  const bool ok = err <= 1e-6 && r.trials.size() == 50 && std::isfinite(k.spread) && k.spread <= 50;
  return {ok, "identity case |ratio - 1| <= " + fmt(err) + " (<= 1e-6); rough C/c " + fmt(k.spread) +
                  " (<= 50)"};
}

// 5. sgn(Pi_B)^2 u = u on R(Pi_B) for 20 perturbed trials.
Outcome sgn() {
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    const ResolventPlan plan(build_operator(dirac(32, 0.2 + 0.02 * i, 500 + i)));
    worst = std::max(worst, sgn_involution(plan, trials(1, 500 + i)).C);
  }
  return {worst <= 1e-4, "max ||sgn^2 u - u|| / ||u|| " + fmt(worst) + " (<= 1e-4)"};
}

// 6. Hodge decomposition, exact (unperturbed) and limit (perturbed) paths, 20 trials each.
Outcome hodge() {
  double exact = 0, limit = 0;
  OperatorSpec forms;
  forms.builtin = "forms-2";
  forms.m = 8;
  const ResolventPlan fplan(build_operator(forms));
  for (int i = 0; i < 20; ++i) {
    Rng rng(600, i);
    const HodgeCheck e = hodge_check(fplan, random_bandlimited(fplan.op().torus(), 4, rng));
    exact = std::max({exact, e.sum_error, e.idempotency_error});
    const ResolventPlan plan(build_operator(dirac(32, 0.2 + 0.02 * i, 600 + i)));
    const HodgeCheck p = hodge_check(plan, random_bandlimited(plan.op().torus(), 2, rng));
    limit = std::max({limit, p.sum_error, p.idempotency_error});
  }
  return {exact <= 1e-6 && limit <= 1e-4,
          "exact path " + fmt(exact) + " (<= 1e-6), limit path " + fmt(limit) + " (<= 1e-4)"};
}

// 7. Tent-space laws on 200 random fields in 1D and 2D.
Outcome tent() {
  std::size_t violations = 0;
  double excess = -1e300, fubini = 0;
  for (int dim = 1; dim <= 2; ++dim) {
    const Torus t(dim, dim == 1 ? 64 : 32);
    const TimeGrid g = TimeGrid::geometric(t.spacing(), t.period() / 8);
    const TentLawReport r = tent_laws(t, g, 200, {1.5, 2.0, 3.0}, {2.0, 4.0}, 700 + dim);
    violations += r.monotonicity_violations;
    excess = std::max(excess, r.max_growth_exponent_excess);
    fubini = std::max(fubini, r.max_fubini_error);
  }
  return {violations == 0 && excess <= 0 && fubini <= 1e-8,
          std::to_string(violations) + " monotonicity violations, growth excess " + fmt(excess) +
              " (<= 0), Fubini error " + fmt(fubini) + " (<= 1e-8)"};
}

// 8. Factorisation: per-(p, q) constants over >= 500 pairs, stable under grid doubling.
Outcome factorization() {
  const Torus coarse(1, 64), fine(1, 128);
  const TimeGrid g = TimeGrid::standard(coarse);
  const std::vector<double> ps{1.5, 2.0, 3.0};
  int pairs = 0;
  double worst_drift = 0, largest = 0;
  bool finite = true;
  for (double p : ps)
    for (double q : ps) {
      const FactorizationReport a = factorization_experiment(coarse, g, p, q, 56, 800);
      const FactorizationReport b = factorization_experiment(fine, g, p, q, 56, 800);
      pairs += static_cast<int>(a.pairs.size());
      finite = finite && std::isfinite(a.max_ratio) && a.max_ratio > 0;
      largest = std::max(largest, a.max_ratio);
      worst_drift = std::max(worst_drift, std::abs(b.max_ratio - a.max_ratio) / a.max_ratio);
    }
  return {finite && pairs >= 500 && worst_drift <= 0.15,
          std::to_string(pairs) + " pairs, largest constant " + fmt(largest) + ", max drift " +
              fmt(worst_drift) + " (<= 0.15)"};
}

// 9. Off-diagonal decay orders at m = 64, d/t in {1, 2, 4, 8}.
Outcome offdiag() {
  const std::vector<double> seps{1, 2, 4, 8};
  const ResolventPlan plain(build_operator(dirac(64, 0, 0)));
  const auto ts = offdiag_times(plain.op().torus(), seps);
  const OffdiagResult u = offdiag_order([&](double t, const Field& f) { return p_t(plain, t, f); },
                                        plain.op().torus(), 2, ts, seps, 0, 900);
  double worst = 1e300, min_kappa = 1e300;
  for (int i = 0; i < 5; ++i) {
    auto op = build_operator(dirac(64, 0.5, 901 + i));
    const AccretivityReport a = audit_operator(*op, 16, 901 + i);
    min_kappa = std::min({min_kappa, a.kappa1, a.kappa2});
    const ResolventPlan plan(op);
    const OffdiagResult r =
        offdiag_order([&](double t, const Field& f) { return plan.resolvent(t, f); }, op->torus(), 2,
                      ts, seps, 0, 910 + i);
    worst = std::min(worst, r.order);
  }
  const bool unperturbed_ok = u.order >= 4 || u.noise_floor;
  return {unperturbed_ok && worst >= 2 && min_kappa >= 0.3,
          "unperturbed P_t order " + fmt(u.order) + (u.noise_floor ? " (noise floor)" : "") +
              " (>= 4), perturbed R_t^B min order " + fmt(worst) + " (>= 2) at kappa >= " +
              fmt(min_kappa)};
}

// 10. Schur uniformity: eps = 0.5, gamma in {0, +-1, +-10}, within a factor 3.
Outcome schur() {
  const ResolventPlan plan(build_operator(dirac(64, 0, 0)));
  const SchurReport r = schur_uniformity(plan, TimeGrid::standard(plan.op().torus()), 2, 0.5,
                                         {0.0, 1.0, -1.0, 10.0, -10.0}, 1000);
  return {std::isfinite(r.max_over_min) && r.max_over_min <= 3,
          "max/min norm estimate " + fmt(r.max_over_min) + " (<= 3)"};
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// 11. Byte-identical CSVs across reruns with 1 and 4 workers.
Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("hodgelab-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg = dir / "config.json";
  std::ofstream(cfg) << R"({
  "schema_version": 1,
  "seed": 11,
  "torus": {"m": 32},
  "operator": {"builtin": "dirac1d", "amplitude": 0.4, "roughness": "rough"},
  "defaults": {"trials": 6},
  "experiments": [
    {"type": "identities"},
    {"type": "hodge"},
    {"type": "sq_equiv", "p": [1.5, 2]},
    {"type": "low_freq"},
    {"type": "sgn"},
    {"type": "offdiag"},
    {"type": "factorization", "pairs": 12},
    {"type": "tent_laws", "fields": 12}
  ]
})";
  std::vector<std::string> outputs;
  int bad_exit = 0;
  for (const char* w : {"1", "4", "1"}) {
    const fs::path out = dir / ("out" + std::to_string(outputs.size()));
    const int code = shell(std::string(HODGELAB_CLI_PATH) + " run -c " + cfg.string() + " -o " +
                           out.string() + " --workers " + w + " > /dev/null 2>&1");
    if (code != 0) bad_exit = code;
    std::vector<fs::path> csvs;
    for (const auto& e : fs::directory_iterator(out))
      if (e.path().extension() == ".csv") csvs.push_back(e.path());
    std::sort(csvs.begin(), csvs.end());
    std::string all;
    for (const auto& p : csvs) all += p.filename().string() + "\n" + slurp(p);
    outputs.push_back(all);
  }
  fs::remove_all(dir);
  const bool same = outputs[0] == outputs[1] && outputs[0] == outputs[2];
  return {bad_exit == 0 && same && !outputs[0].empty(),
          std::string(same ? "identical" : "different") + " CSV bytes for workers 1, 4, 1" +
              (bad_exit ? " (cli exit " + std::to_string(bad_exit) + ")" : "")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"algebraic identities", identities},
      {"dense oracle equivalence", oracle},
      {"L2 quadratic estimate", quadratic_estimate},
      {"Kato square root", kato},
      {"sgn involution", sgn},
      {"Hodge decomposition", hodge},
      {"tent-space laws", tent},
      {"factorisation inequality", factorization},
      {"off-diagonal decay", offdiag},
      {"Schur uniformity", schur},
      {"determinism", determinism},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty())
    for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) selected.push_back(i);

  int failures = 0;
  for (int k : selected) {
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::cerr << "unknown criterion " << k << "\n";
      return 2;
    }
    const auto& [name, fn] = criteria[k - 1];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << k << ". " << name << ": " << o.detail << " ["
              << fmt(seconds_since(t0)) << " s]" << std::endl;
  }
  return failures ? 1 : 0;
}
