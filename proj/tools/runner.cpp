#include "runner.hpp"

#include "hodgelab/parallel.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>

namespace hodgelab::cli {

namespace fs = std::filesystem;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string num(double v) { return format_number(v); }
std::string num(std::size_t v) { return std::to_string(v); }
std::string num(int v) { return std::to_string(v); }

/// JSON cannot hold inf/nan; they are written as strings.
json jnum(double v) { return std::isfinite(v) ? json(v) : json(format_number(v)); }

std::string mode_name(SolverMode m) {
  switch (m) {
    case SolverMode::automatic: return "automatic";
    case SolverMode::frequency_diagonal: return "frequency_diagonal";
    case SolverMode::iterative: return "iterative";
    case SolverMode::dense: return "dense";
  }
  return "?";
}

class Table {
 public:
  explicit Table(std::vector<std::string> header = {}) : header_(std::move(header)) {}
  void set_header(std::vector<std::string> h) { header_ = std::move(h); }
  void add(std::vector<std::string> row) {
    if (row.size() != header_.size()) throw Error("cli", "CSV row width mismatch");
    rows_.push_back(std::move(row));
  }
  void write(const fs::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("io", "cannot write " + path.string());
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
      os << '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    if (!os) throw Error("io", "write failed for " + path.string());
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::vector<double> doubles(const json& params, const char* key, std::vector<double> dflt) {
  if (!params.contains(key)) return dflt;
  const json& j = params[key];
  if (j.is_number()) return {j.get<double>()};
  return j.get<std::vector<double>>();
}

struct Context {
  const RunConfig& cfg;
  std::shared_ptr<const PerturbedDirac> op;
  std::shared_ptr<ResolventPlan> plan;
  std::string id, type;
  json params;
  std::uint64_t seed = 0;
  int workers = 1;
  TimeGrid grid;
  Table table{};
  json results = json::object();
  std::vector<std::string> breaches;

  TrialOptions trial_options(int default_trials) const {
    TrialOptions o;
    o.trials = params.value("trials", default_trials);
    o.seed = seed;
    o.workers = workers;
    o.band = params.value("band", 4);
    return o;
  }
  int M() const { return params.value("M", 2); }
  int N() const { return params.value("N", 2); }
  bool refine() const { return params.value("refine", false); }
  double refine_tol(double dflt) const { return params.value("refine_tol", dflt); }

  std::shared_ptr<ResolventPlan> refined_plan() const {
    return std::make_shared<ResolventPlan>(build(cfg.op, 2 * op->torus().points_per_axis()),
                                           cfg.solver);
  }
  /// Columns carried by every row: grid, truncation and solver metadata.
  static std::vector<std::string> meta_header() {
    return {"experiment", "id", "operator", "n", "m", "period", "t_min", "t_max", "K", "solver", "solver_tol"};
  }
  std::vector<std::string> meta(const PerturbedDirac& o, const ResolventPlan& p) const {
    return {type,
            id,
            o.name(),
            num(o.torus().dim()),
            num(o.torus().points_per_axis()),
            num(o.torus().period()),
            num(grid.t_min()),
            num(grid.t_max()),
            num(grid.size()),
            mode_name(p.mode()),
            num(cfg.solver.tol)};
  }
  void header(std::vector<std::string> extra) {
    auto h = meta_header();
    h.insert(h.end(), extra.begin(), extra.end());
    table.set_header(std::move(h));
  }
  void row(const PerturbedDirac& o, const ResolventPlan& p, std::vector<std::string> extra) {
    auto r = meta(o, p);
    r.insert(r.end(), extra.begin(), extra.end());
    table.add(std::move(r));
  }
  void breach(const std::string& what) { breaches.push_back(id + ": " + what); }
};

json report_json(const RatioReport& r) {
  return {{"quantity", r.quantity}, {"trials", r.trials.size()}, {"degenerate", r.degenerate},
          {"c", jnum(r.c)},         {"C", jnum(r.C)},            {"spread", jnum(r.spread)},
          {"stable", r.stable},     {"drift", jnum(r.drift)}};
}

// --- ratio experiments (sq_equiv, low_freq, ...) ------------------------------------------

using RatioFn = std::function<std::vector<RatioReport>(const ResolventPlan&, double p, json& extra)>;

void ratio_experiment(Context& ctx, const RatioFn& fn, const std::vector<double>& ps,
                      double default_refine_tol = 0.1) {
  ctx.header({"quantity", "p", "M", "N", "trial", "numerator", "denominator", "ratio"});
  const bool refine = ctx.refine();
  std::shared_ptr<ResolventPlan> fine_plan = refine ? ctx.refined_plan() : nullptr;
  json out = json::array();
  for (double p : ps) {
    json extra = json::object();
    std::vector<RatioReport> base = fn(*ctx.plan, p, extra);
    std::vector<RatioReport> fine;
    json fine_extra = json::object();
    if (refine) {
      fine = fn(*fine_plan, p, fine_extra);
      for (std::size_t k = 0; k < base.size(); ++k) {
        compare_refinement(base[k], fine[k], ctx.refine_tol(default_refine_tol));
        if (!fine[k].stable)
          ctx.breach(base[k].quantity + " at p = " + num(p) + ": refinement drift " +
                     num(fine[k].drift) + " exceeds " + num(ctx.refine_tol(default_refine_tol)));
      }
    }
    auto emit = [&](const ResolventPlan& plan, const std::vector<RatioReport>& reps) {
      for (const RatioReport& r : reps)
        for (const TrialRecord& t : r.trials)
          ctx.row(plan.op(), plan,
                  {r.quantity, num(p), num(ctx.M()), num(ctx.N()), num(t.trial), num(t.numerator),
                   num(t.denominator), num(t.ratio)});
    };
    emit(*ctx.plan, base);
    if (refine) emit(*fine_plan, fine);
    json entry = {{"p", p}, {"reports", json::array()}};
    for (const RatioReport& r : base) entry["reports"].push_back(report_json(r));
    if (refine) {
      entry["refined"] = {{"m", fine_plan->op().torus().points_per_axis()}, {"reports", json::array()}};
      for (const RatioReport& r : fine) entry["refined"]["reports"].push_back(report_json(r));
      if (!fine_extra.empty()) entry["refined"]["extra"] = fine_extra;
    }
    if (!extra.empty()) entry["extra"] = extra;
    for (const RatioReport& r : base)
      if (!(r.c <= r.C)) ctx.breach(r.quantity + ": c > C");
    out.push_back(entry);
  }
  ctx.results["by_p"] = out;
}

// --- experiment bodies --------------------------------------------------------------------

void run_identities(Context& ctx) {
  const double period = ctx.op->torus().period();
  const auto times = doubles(ctx.params, "times", {0.01 * period, 0.1 * period, period});
  const double s_ratio = ctx.params.value("s_ratio", 0.5);
  if (s_ratio > 1.0) throw ConfigError(ctx.id + ".s_ratio: must be <= 1");
  std::vector<std::string> modes = ctx.params.value("modes", std::vector<std::string>{"automatic"});
  ctx.header({"mode", "t", "s", "resolvent", "p_product", "t_pi_q", "qq_product", "high_freq",
              "commutation"});
  Rng rng(ctx.seed, 0x1de);
  const Field u = random_bandlimited(ctx.op->torus(), ctx.op->fiber_dim(), rng,
                                     ctx.params.value("band", 4));
  double worst = 0.0;
  for (const std::string& m : modes) {
    SolverOptions so = ctx.cfg.solver;
    so.mode = m == "dense" ? SolverMode::dense
              : m == "iterative" ? SolverMode::iterative
              : m == "frequency_diagonal" ? SolverMode::frequency_diagonal
                                          : SolverMode::automatic;
    const ResolventPlan plan(ctx.op, so);
    for (double t : times) {
      const IdentityReport r = algebraic_identities(plan, t, s_ratio * t, u, ctx.N());
      worst = std::max(worst, r.max());
      ctx.row(*ctx.op, plan,
              {mode_name(plan.mode()), num(t), num(s_ratio * t), num(r.resolvent), num(r.p_product),
               num(r.t_pi_q), num(r.qq_product), num(r.high_freq), num(r.commutation)});
    }
  }
  ctx.results["max_error"] = jnum(worst);
  if (worst > 1e-8) ctx.breach("identity error " + num(worst) + " exceeds 1e-8");
}

void run_hodge(Context& ctx) {
  ctx.header({"trial", "sum_error", "idempotency_error", "gamma_residual", "stabilization", "exact"});
  const TrialOptions o = ctx.trial_options(8);
  std::vector<HodgeCheck> checks(static_cast<std::size_t>(o.trials));
  parallel_for(checks.size(), o.workers, [&](std::size_t i) {
    Rng rng(o.seed, i);
    const Field u = random_bandlimited(ctx.op->torus(), ctx.op->fiber_dim(), rng, o.band);
    checks[i] = hodge_check(*ctx.plan, u);
  });
  double sum = 0.0, idem = 0.0, stab = 0.0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const HodgeCheck& c = checks[i];
    ctx.row(*ctx.op, *ctx.plan,
            {num(i), num(c.sum_error), num(c.idempotency_error), num(c.gamma_residual),
             num(c.stabilization), c.exact ? "1" : "0"});
    sum = std::max(sum, c.sum_error);
    idem = std::max(idem, c.idempotency_error);
    stab = std::max(stab, c.stabilization);
  }
  const bool exact = ctx.op->is_unperturbed();
  const double tol = exact ? 1e-6 : 1e-4;
  ctx.results = {{"max_sum_error", jnum(sum)},
                 {"max_idempotency_error", jnum(idem)},
                 {"max_stabilization", jnum(stab)},
                 {"path", exact ? "exact" : "limit"},
                 {"tolerance", tol}};
  if (std::max(sum, idem) > tol) ctx.breach("Hodge error " + num(std::max(sum, idem)) + " exceeds " + num(tol));
}

void run_offdiag(Context& ctx) {
  const auto seps = doubles(ctx.params, "separations", {1, 2, 4, 8});
  const auto times = doubles(ctx.params, "times", offdiag_times(ctx.op->torus(), seps));
  const std::string family =
      ctx.params.value("family", std::string(ctx.op->is_unperturbed() ? "p_t" : "resolvent"));
  const ResolventPlan& plan = *ctx.plan;
  std::function<Field(double, const Field&)> fam;
  if (family == "p_t") fam = [&](double t, const Field& u) { return p_t(plan, t, u); };
  else if (family == "q_t") fam = [&](double t, const Field& u) { return q_t(plan, t, u); };
  else if (family == "resolvent") fam = [&](double t, const Field& u) { return plan.resolvent(t, u); };
  else fam = [](double t, const Field& u) { return dyadic_average(u, t); };
  const auto center = ctx.params.value("center", std::size_t{0});
  if (center >= ctx.op->torus().num_points()) throw ConfigError(ctx.id + ".center: outside the grid");
  const OffdiagResult r = offdiag_order(fam, ctx.op->torus(), ctx.op->fiber_dim(), times, seps,
                                        center, ctx.seed, ctx.params.value("inputs", 8));
  ctx.header({"family", "t", "d_over_t", "norm"});
  for (const auto& s : r.samples)
    ctx.row(*ctx.op, plan, {family, num(s[0]), num(s[1]), num(s[2])});
  ctx.results = {{"family", family},        {"order", jnum(r.order)},
                 {"residual", jnum(r.residual)}, {"noise_floor", r.noise_floor},
                 {"fitted_samples", r.used},  {"times", times},
                 {"separations", seps}};
  if (r.noise_floor && r.used == 0)
    ctx.results["note"] = "decay below noise floor; order lower bound reported";
}

void run_schur(Context& ctx) {
  const auto gammas = doubles(ctx.params, "gammas", {0.0, 1.0, -1.0, 10.0, -10.0});
  const double eps = ctx.params.value("eps", 0.5);
  const SeparableKernel k = high_frequency_kernel(*ctx.plan, ctx.grid, ctx.N());
  ctx.header({"N", "eps", "gamma", "estimate", "power", "probe_max", "iterations"});
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double g : gammas) {
    const NormEstimate e =
        schur_norm_estimate(k, SchurVariant::plus, cplx(eps, g), ctx.grid, ctx.op->torus(),
                            ctx.op->fiber_dim(), ctx.seed, ctx.params.value("probes", 4),
                            ctx.params.value("iterations", 20));
    ctx.row(*ctx.op, *ctx.plan,
            {num(ctx.N()), num(eps), num(g), num(e.estimate), num(e.power), num(e.probe_max),
             num(e.iterations)});
    lo = std::min(lo, e.estimate);
    hi = std::max(hi, e.estimate);
  }
  ctx.results = {{"max_over_min", jnum(lo > 0 ? hi / lo : std::numeric_limits<double>::infinity())},
                 {"min", jnum(lo)},
                 {"max", jnum(hi)}};
  if (!std::isfinite(hi)) ctx.breach("Schur norm estimate is not finite");
}

void run_factorization(Context& ctx) {
  const auto ps = doubles(ctx.params, "p", {1.5, 2.0, 3.0});
  const auto qs = doubles(ctx.params, "q", {1.5, 2.0, 3.0});
  const int pairs = ctx.params.value("pairs", 100);
  const bool refine = ctx.refine();
  const double tol = ctx.refine_tol(0.15);
  ctx.header({"p", "q", "pair", "lhs", "f_norm", "g_norm", "ratio"});
  json out = json::array();
  const Torus base = ctx.op->torus();
  const Torus fine(base.dim(), 2 * base.points_per_axis(), base.period());
  for (double p : ps)
    for (double q : qs) {
      const FactorizationReport r = factorization_experiment(base, ctx.grid, p, q, pairs, ctx.seed, ctx.workers);
      for (std::size_t i = 0; i < r.pairs.size(); ++i)
        ctx.row(*ctx.op, *ctx.plan,
                {num(p), num(q), num(i), num(r.pairs[i].lhs), num(r.pairs[i].f_norm),
                 num(r.pairs[i].g_norm), num(r.pairs[i].ratio)});
      json entry = {{"p", p}, {"q", q}, {"max_ratio", jnum(r.max_ratio)}};
      if (refine) {
        const FactorizationReport f = factorization_experiment(fine, ctx.grid, p, q, pairs, ctx.seed, ctx.workers);
        const double drift = std::abs(f.max_ratio - r.max_ratio) / r.max_ratio;
        entry["refined_max_ratio"] = jnum(f.max_ratio);
        entry["drift"] = jnum(drift);
        entry["stable"] = drift <= tol;
        if (drift > tol)
          ctx.breach("factorization constant at (p, q) = (" + num(p) + ", " + num(q) +
                     ") drifts by " + num(drift));
      }
      out.push_back(entry);
    }
  ctx.results["by_pq"] = out;
}

void run_tent_laws(Context& ctx) {
  const auto ps = doubles(ctx.params, "p", {1.5, 2.0, 3.0});
  const auto alphas = doubles(ctx.params, "alphas", {2.0, 4.0});
  for (double a : alphas)
    if (a < 1.0) throw ConfigError(ctx.id + ".alphas: apertures must be >= 1");
  const TentLawReport r = tent_laws(ctx.op->torus(), ctx.grid, ctx.params.value("fields", 50), ps,
                                    alphas, ctx.seed, ctx.workers);
  ctx.header({"fields", "monotonicity_violations", "max_growth_exponent_excess", "max_fubini_error"});
  ctx.row(*ctx.op, *ctx.plan,
          {num(r.fields), num(r.monotonicity_violations), num(r.max_growth_exponent_excess),
           num(r.max_fubini_error)});
  ctx.results = {{"fields", r.fields},
                 {"monotonicity_violations", r.monotonicity_violations},
                 {"max_growth_exponent_excess", jnum(r.max_growth_exponent_excess)},
                 {"max_fubini_error", jnum(r.max_fubini_error)}};
  if (r.monotonicity_violations) ctx.breach("aperture monotonicity violated");
  if (r.max_growth_exponent_excess > 0.0) ctx.breach("aperture growth exponent above n/min(p,2) + 0.2");
  if (r.max_fubini_error > 1e-8) ctx.breach("Fubini identity error " + num(r.max_fubini_error));
}

void run_calculus(Context& ctx) {
  const auto ps = doubles(ctx.params, "p", {2.0});
  const auto functions = ctx.params.value(
      "functions", std::vector<std::string>{"rational(1,1)", "qpower(2)", "lowfreq(1,2)", "sgn", "phase(1)"});
  const int trials = ctx.params.value("trials", 2 * static_cast<int>(functions.size()));
  ctx.header({"p", "trial", "function", "ratio"});
  json out = json::array();
  for (double p : ps) {
    const CalculusBound b = calculus_bound_estimate(*ctx.plan, p, functions, trials, ctx.seed, ctx.cfg.funcalc);
    for (std::size_t k = 0; k < b.ratios.size(); ++k)
      ctx.row(*ctx.op, *ctx.plan, {num(p), num(k), functions[k % functions.size()], num(b.ratios[k])});
    out.push_back({{"p", p}, {"estimate", jnum(b.estimate)}, {"argmax_function", b.argmax_function},
                   {"argmax_trial", b.argmax_trial}});
  }
  ctx.results["by_p"] = out;
}

void run_ratio_type(Context& ctx) {
  const std::string& type = ctx.type;
  const TrialOptions o = ctx.trial_options(8);
  const int M = ctx.M(), N = ctx.N();
  const TimeGrid& grid = ctx.grid;
  std::vector<double> ps = doubles(ctx.params, "p", {2.0});
  RatioFn fn;
  if (type == "sq_equiv") {
    const Subspace s = parse_subspace(ctx.params.value("subspace", std::string("range_gamma")));
    ctx.results["subspace"] = to_string(s);
    fn = [=](const ResolventPlan& plan, double p, json&) {
      return std::vector<RatioReport>{sq_equiv(plan, p, M, s, grid, o)};
    };
  } else if (type == "low_freq") {
    fn = [=](const ResolventPlan& plan, double p, json& extra) {
      LowFreqReport r = low_freq(plan, p, M, N, grid, o);
      extra["reassembly_error"] = jnum(r.reassembly_error);
      extra["principal_carleson"] = jnum(principal_part_carleson(principal_part(plan, grid)));
      return std::vector<RatioReport>{r.ratio, r.approx, r.principal};
    };
  } else if (type == "high_freq") {
    fn = [=](const ResolventPlan& plan, double p, json& extra) {
      HighFreqReport r = high_freq(plan, p, M, N, grid, o);
      extra["identity_error"] = jnum(r.identity_error);
      return std::vector<RatioReport>{r.ratio};
    };
  } else if (type == "conical_vertical") {
    fn = [=](const ResolventPlan& plan, double p, json&) {
      return std::vector<RatioReport>{conical_vertical(plan, p, M, grid, o)};
    };
  } else if (type == "kato") {
    fn = [=](const ResolventPlan& plan, double p, json&) {
      return std::vector<RatioReport>{kato_experiment(plan, p, o)};
    };
  } else if (type == "riesz") {
    fn = [&ctx, o](const ResolventPlan& plan, double p, json& extra) {
      RieszReport r = riesz_experiment(plan, p, o);
      extra["involution_error"] = jnum(r.involution_error);
      if (r.involution_error > 1e-4) ctx.breach("sgn^2 consistency error " + num(r.involution_error));
      return std::vector<RatioReport>{r.ratio};
    };
  } else if (type == "sgn") {
    ps = {2.0};
    fn = [&ctx, o](const ResolventPlan& plan, double, json&) {
      RatioReport r = sgn_involution(plan, o);
      if (r.C > 1e-4) ctx.breach("sgn involution error " + num(r.C) + " exceeds 1e-4");
      return std::vector<RatioReport>{r};
    };
  } else if (type == "sobolev") {
    const auto times = doubles(ctx.params, "times", grid.times());
    fn = [=](const ResolventPlan& plan, double p, json& extra) {
      SobolevReport r = sobolev_resolvent_probe(plan, p, times, o);
      extra["p_star"] = r.p_star;
      extra["meaningful"] = r.meaningful;
      if (!r.meaningful) extra["note"] = "p_* <= 1: quasi-norm used, ratio not meaningful";
      return std::vector<RatioReport>{r.ratio};
    };
  } else {
    throw ConfigError("unknown experiment type '" + type + "'");
  }
  ratio_experiment(ctx, fn, ps);
  if (type == "kato" && ctx.op->is_unperturbed())
    for (const json& e : ctx.results["by_p"])
      if (e["p"].get<double>() == 2.0) {
        const json& r = e["reports"][0];
        const double c = r["c"].is_number() ? r["c"].get<double>() : 0.0;
        const double C = r["C"].is_number() ? r["C"].get<double>() : 0.0;
        if (std::abs(c - 1.0) > 1e-6 || std::abs(C - 1.0) > 1e-6)
          ctx.breach("Kato identity case deviates from 1 by more than 1e-6");
      }
}

const std::map<std::string, std::function<void(Context&)>>& bodies() {
  static const std::map<std::string, std::function<void(Context&)>> b = {
      {"identities", run_identities}, {"hodge", run_hodge},
      {"offdiag", run_offdiag},       {"schur", run_schur},
      {"factorization", run_factorization}, {"tent_laws", run_tent_laws},
      {"calculus", run_calculus},     {"sq_equiv", run_ratio_type},
      {"low_freq", run_ratio_type},   {"high_freq", run_ratio_type},
      {"conical_vertical", run_ratio_type}, {"kato", run_ratio_type},
      {"riesz", run_ratio_type},      {"sgn", run_ratio_type},
      {"sobolev", run_ratio_type},
  };
  return b;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("io", "cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw Error("io", "write failed for " + path.string());
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (const auto* a = dynamic_cast<const AuditError*>(&e)) {
    if (a->kind() == "nilpotency") return kExitNilpotency;
    if (a->kind() == "coercivity") return kExitCoercivity;
    if (a->kind() == "accretivity") return kExitAccretivity;
    if (a->kind() == "ellipticity") return kExitEllipticity;
    return kExitDirac;
  }
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    static const std::map<std::string, int> codes = {
        {"config", kExitConfig},     {"lattice", kExitLattice}, {"dirac", kExitDirac},
        {"resolvent", kExitResolvent}, {"funcalc", kExitFuncalc}, {"tent", kExitTent},
        {"probes", kExitProbes},     {"io", kExitIo}};
    const auto it = codes.find(err->module());
    return it == codes.end() ? kExitUnknown : it->second;
  }
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kExitIo;
  return kExitUnknown;
}

std::vector<std::pair<int, std::string>> exit_code_table() {
  return {{kExitOk, "success"},
          {kExitUnknown, "unexpected error"},
          {kExitConfig, "configuration / schema violation"},
          {kExitLattice, "lattice error"},
          {kExitNilpotency, "nilpotency audit failed"},
          {kExitCoercivity, "coercivity audit failed"},
          {kExitAccretivity, "accretivity audit failed"},
          {kExitEllipticity, "ellipticity audit failed"},
          {kExitDirac, "operator construction error"},
          {kExitResolvent, "resolvent solver failure"},
          {kExitFuncalc, "functional calculus failure"},
          {kExitTent, "tent-space error"},
          {kExitProbes, "experiment failure (including inline assertions)"},
          {kExitInvariant, "invariant breach under --strict"},
          {kExitIo, "output could not be written"}};
}

RunResult run(const RunConfig& cfg) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const auto op = build(cfg.op);
  const AccretivityReport audit = audit_operator(*op, cfg.audit_trials, cfg.seed);
  auto plan = std::make_shared<ResolventPlan>(op, cfg.solver);

  const fs::path out_dir(cfg.output);
  fs::create_directories(out_dir);

  RunResult result;
  json manifest_experiments = json::array();
  for (const ExperimentConfig& exp : cfg.experiments) {
    const auto te = clock::now();
    Context ctx{cfg, op, plan, exp.id, exp.type, resolve_params(cfg, exp),
                0, cfg.workers, TimeGrid::standard(op->torus()), Table{}, json::object(), {}};
    ctx.seed = cfg.seed + ctx.params.value("seed", std::uint64_t{0});
    ctx.grid = make_grid(parse_window(ctx.params.value("time_grid", json())), op->torus());
    plan->reset_stats();
    plan->unperturbed().reset_stats();
    bodies().at(exp.type)(ctx);

    const SolveStats st = plan->stats();
    json summary = {
        {"schema_version", kSchemaVersion},
        {"experiment", exp.type},
        {"id", exp.id},
        {"operator",
         {{"name", op->name()}, {"perturbed", !op->is_unperturbed()}, {"fiber", op->fiber_dim()}}},
        {"grid", {{"n", op->torus().dim()}, {"m", op->torus().points_per_axis()}, {"period", op->torus().period()}}},
        {"truncation",
         {{"t_min", ctx.grid.t_min()}, {"t_max", ctx.grid.t_max()}, {"K", ctx.grid.size()},
          {"ratio", ctx.grid.ratio()}}},
        {"solver",
         {{"mode", mode_name(plan->mode())}, {"tol", cfg.solver.tol}, {"solves", st.solves},
          {"iterations", st.iterations}, {"max_residual", jnum(st.max_residual)}}},
        {"parameters", ctx.params},
        {"seed", ctx.seed},
        {"results", ctx.results},
        {"breaches", ctx.breaches},
    };
    ExperimentOutcome oc;
    oc.id = exp.id;
    oc.type = exp.type;
    oc.csv = exp.id + ".csv";
    oc.summary = exp.id + ".json";
    oc.breaches = ctx.breaches;
    ctx.table.write(out_dir / oc.csv);
    write_json(out_dir / oc.summary, summary);
    oc.seconds = std::chrono::duration<double>(clock::now() - te).count();
    result.breaches.insert(result.breaches.end(), ctx.breaches.begin(), ctx.breaches.end());
    manifest_experiments.push_back({{"id", oc.id}, {"type", oc.type}, {"csv", oc.csv},
                                    {"summary", oc.summary}, {"seconds", oc.seconds},
                                    {"breaches", oc.breaches}});
    result.experiments.push_back(std::move(oc));
  }
  if (cfg.strict && !result.breaches.empty()) result.exit_code = kExitInvariant;

  const json manifest = {
      {"schema_version", kSchemaVersion},
      {"tool", "hodgelab"},
      {"version", kToolVersion},
      {"config_sha256", sha256_hex(cfg.document.dump())},
      {"config", cfg.document},
      {"effective",
       {{"seed", cfg.seed}, {"workers", cfg.workers}, {"preset", cfg.preset}, {"strict", cfg.strict},
        {"output", cfg.output}}},
      {"operator",
       {{"name", op->name()},
        {"n", op->torus().dim()},
        {"m", op->torus().points_per_axis()},
        {"period", op->torus().period()},
        {"fiber", op->fiber_dim()},
        {"perturbed", !op->is_unperturbed()},
        {"audit",
         {{"kappa1", jnum(audit.kappa1)}, {"kappa2", jnum(audit.kappa2)}, {"omega", jnum(audit.omega)}}}}},
      {"experiments", manifest_experiments},
      {"breaches", result.breaches},
      {"exit_code", result.exit_code},
      {"total_seconds", std::chrono::duration<double>(clock::now() - t0).count()},
  };
  write_json(out_dir / "manifest.json", manifest);
  return result;
}

}  // namespace hodgelab::cli
